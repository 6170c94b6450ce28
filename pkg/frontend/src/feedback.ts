// Feedback screen geometry and rendering.
//
// One large circle split into thirds, one wedge per class: the wedge's
// radius tracks the smoothed probability and an arc marks that class's
// threshold inside its third. Two smaller circles fill with the binary
// accumulators and flash when a pulse fires. All geometry is computed by
// pure functions so the view can be tested headless.

import { clamp01, ControlFrame } from "./protocol.js";

export interface Wedge {
  className: string;
  startAngle: number;
  endAngle: number;
  /** wedge radius as a fraction of the full circle radius */
  radiusFraction: number;
  /** threshold arc radius as a fraction of the full circle radius */
  thresholdFraction: number;
  /** true when the smoothed probability clears the threshold */
  active: boolean;
}

export interface FillCircle {
  label: "A" | "B";
  fillFraction: number;
  pulsing: boolean;
}

export interface FeedbackViewModel {
  wedges: Wedge[];
  fills: FillCircle[];
  label: string;
  connected: boolean;
}

export function wedgeLayout(
  classNames: string[],
  probs: number[],
  thresholds: Record<string, number>,
  label: string,
): Wedge[] {
  const n = Math.max(classNames.length, 1);
  const slice = (2 * Math.PI) / n;
  return classNames.map((className, i) => {
    const probability = clamp01(probs[i] ?? 0);
    const threshold = clamp01(thresholds[className] ?? 0.5);
    return {
      className,
      startAngle: -Math.PI / 2 + i * slice,
      endAngle: -Math.PI / 2 + (i + 1) * slice,
      radiusFraction: probability,
      thresholdFraction: threshold,
      active: className === label && probability >= threshold,
    };
  });
}

export function feedbackViewModel(
  classNames: string[],
  frame: ControlFrame | null,
  thresholds: Record<string, number>,
  connected: boolean,
): FeedbackViewModel {
  const probs = frame ? frame.probs : classNames.map(() => 0);
  const label = frame ? frame.label : "";
  return {
    wedges: wedgeLayout(classNames, probs, thresholds, label),
    fills: [
      {
        label: "A",
        fillFraction: clamp01(frame?.a_fill ?? 0),
        pulsing: Boolean(frame?.a),
      },
      {
        label: "B",
        fillFraction: clamp01(frame?.b_fill ?? 0),
        pulsing: Boolean(frame?.b),
      },
    ],
    label,
    connected,
  };
}

const CLASS_COLORS = ["#e4572e", "#17bebb", "#ffc914", "#76b041", "#8e5572"];

export function renderFeedback(
  ctx: CanvasRenderingContext2D,
  view: FeedbackViewModel,
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  ctx.globalAlpha = view.connected ? 1.0 : 0.35;

  const cx = height / 2;
  const cy = height / 2;
  const radius = height * 0.42;

  view.wedges.forEach((wedge, i) => {
    ctx.beginPath();
    ctx.moveTo(cx, cy);
    ctx.arc(cx, cy, radius * wedge.radiusFraction, wedge.startAngle, wedge.endAngle);
    ctx.closePath();
    ctx.fillStyle = CLASS_COLORS[i % CLASS_COLORS.length];
    ctx.globalAlpha *= wedge.active ? 1.0 : 0.75;
    ctx.fill();
    ctx.globalAlpha = view.connected ? 1.0 : 0.35;

    ctx.beginPath();
    ctx.arc(cx, cy, radius * wedge.thresholdFraction, wedge.startAngle, wedge.endAngle);
    ctx.strokeStyle = "#f8f8f8";
    ctx.setLineDash([6, 4]);
    ctx.lineWidth = 2;
    ctx.stroke();
    ctx.setLineDash([]);

    const mid = (wedge.startAngle + wedge.endAngle) / 2;
    ctx.fillStyle = "#f8f8f8";
    ctx.font = "14px sans-serif";
    ctx.textAlign = "center";
    ctx.fillText(
      wedge.className,
      cx + Math.cos(mid) * radius * 1.12,
      cy + Math.sin(mid) * radius * 1.12,
    );
    ctx.beginPath();
    ctx.arc(cx, cy, radius, wedge.startAngle, wedge.endAngle);
    ctx.strokeStyle = "#555";
    ctx.lineWidth = 1;
    ctx.stroke();
  });

  view.fills.forEach((fill, i) => {
    const fx = height + 90;
    const fy = height * (0.3 + 0.4 * i);
    const r = height * 0.12;
    ctx.beginPath();
    ctx.arc(fx, fy, r, 0, 2 * Math.PI);
    ctx.strokeStyle = fill.pulsing ? "#fff" : "#888";
    ctx.lineWidth = fill.pulsing ? 5 : 2;
    ctx.stroke();
    // fill from the bottom up
    const level = fy + r - 2 * r * fill.fillFraction;
    ctx.save();
    ctx.beginPath();
    ctx.rect(fx - r, level, 2 * r, fy + r - level);
    ctx.clip();
    ctx.beginPath();
    ctx.arc(fx, fy, r, 0, 2 * Math.PI);
    ctx.fillStyle = fill.pulsing ? "#ffffff" : "#4f9dde";
    ctx.fill();
    ctx.restore();
    ctx.fillStyle = "#f8f8f8";
    ctx.font = "16px sans-serif";
    ctx.textAlign = "center";
    ctx.fillText(fill.label, fx, fy + r + 18);
  });

  ctx.globalAlpha = 1.0;
}
