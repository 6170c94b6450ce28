// Browser entry point: connects to the pipeline, routes messages into the
// console state, and drives the three views (feedback, dino, calibration).

import {
  DEFAULT_PARAMS,
  DinoParams,
  DinoState,
  dinoCue,
  dinoTick,
  initialDino,
  successTable,
  totalAttempts,
} from "./dino.js";
import { feedbackViewModel, renderFeedback } from "./feedback.js";
import { ConsoleLink } from "./net.js";
import { ControlFrame } from "./protocol.js";
import {
  applyServerMessage,
  classNames,
  ConsoleState,
  initialState,
  setConnected,
  setView,
  View,
} from "./state.js";

const params = new URLSearchParams(window.location.search);
const wsUrl = params.get("ws") ?? "ws://127.0.0.1:8765";

let state: ConsoleState = initialState();
let dino: DinoState | null = null;
let dinoParams: DinoParams | null = null;

const canvas = document.getElementById("view") as HTMLCanvasElement;
const ctx = canvas.getContext("2d") as CanvasRenderingContext2D;
const statusEl = document.getElementById("status") as HTMLElement;
const slidersEl = document.getElementById("sliders") as HTMLElement;

const link = new ConsoleLink(wsUrl, {
  onMessage(msg) {
    state = applyServerMessage(state, msg);
    if (msg.type === "config") rebuildSliders();
    if (msg.type === "control" && state.view === "dino") stepDino(msg);
    if (msg.type === "cue" && state.view === "dino") cueDino(msg.class);
  },
  onStatus(connected) {
    state = setConnected(state, connected);
    statusEl.textContent = connected ? `connected to ${wsUrl}` : "reconnecting...";
    statusEl.className = connected ? "ok" : "down";
  },
});
link.connect();

function ensureDino(): void {
  if (dino || !state.config) return;
  dinoParams = {
    ...DEFAULT_PARAMS,
    classes: classNames(state),
    thresholds: state.config.thresholds,
  };
  dino = initialDino(dinoParams, state.frame?.ts ?? 0);
}

function stepDino(frame: ControlFrame): void {
  ensureDino();
  if (!dino || !dinoParams) return;
  const tick = dinoTick(dino, frame, dinoParams);
  dino = tick.state;
  for (const event of tick.events) link.send(event);
}

function cueDino(cueClass: string): void {
  ensureDino();
  if (!dino || !dinoParams) return;
  const tick = dinoCue(dino, cueClass, dino.lastTs, dinoParams);
  dino = tick.state;
  for (const event of tick.events) link.send(event);
}

function rebuildSliders(): void {
  if (!state.config) return;
  slidersEl.replaceChildren();
  for (const cls of classNames(state)) {
    const row = document.createElement("div");
    row.className = "slider-row";
    const label = document.createElement("label");
    const value = state.config.thresholds[cls];
    label.textContent = `${cls} threshold (${value.toFixed(2)})`;
    const slider = document.createElement("input");
    slider.type = "range";
    slider.min = "0.34";
    slider.max = "1.0";
    slider.step = "0.01";
    slider.value = String(value);
    slider.addEventListener("change", () => {
      link.send({ type: "set_threshold", class: cls,
                  value: Number(slider.value) });
    });
    row.append(label, slider);
    slidersEl.append(row);
  }
}

for (const id of ["feedback", "dino", "calibration"] as View[]) {
  const button = document.getElementById(`tab-${id}`) as HTMLButtonElement;
  button.addEventListener("click", () => {
    state = setView(state, id);
    if (id === "dino") {
      dino = null;
      ensureDino();
    }
    document.querySelectorAll("nav button").forEach((b) =>
      b.classList.toggle("active", b.id === `tab-${id}`));
  });
}

function drawDino(): void {
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (!dino) {
    ctx.fillStyle = "#f8f8f8";
    ctx.font = "16px sans-serif";
    ctx.fillText("waiting for config...", 40, 60);
    return;
  }
  const groundY = canvas.height * 0.7;
  ctx.strokeStyle = "#888";
  ctx.beginPath();
  ctx.moveTo(0, groundY);
  ctx.lineTo(canvas.width, groundY);
  ctx.stroke();

  const jumping = dino.phase === "JUMP";
  const dinoX = canvas.width * 0.25;
  const dinoY = groundY - (jumping ? 70 : 0);
  ctx.fillStyle = dino.phase === "FAIL_RECOVERY" ? "#e4572e" : "#76b041";
  ctx.fillRect(dinoX - 18, dinoY - 36, 36, 36);

  if (dino.phase === "QTE") {
    ctx.fillStyle = "#555";
    ctx.fillRect(canvas.width * 0.55 - 12, groundY - 30, 24, 30);
    ctx.fillStyle = "#f8f8f8";
    ctx.font = "bold 22px sans-serif";
    ctx.textAlign = "center";
    ctx.fillText(`imagine: ${dino.cueClass}`, canvas.width / 2, 50);
    const barW = 28;
    const barH = 120;
    const bx = canvas.width * 0.8;
    ctx.strokeStyle = "#f8f8f8";
    ctx.strokeRect(bx, groundY - barH - 40, barW, barH);
    ctx.fillStyle = "#ffc914";
    const h = barH * dino.barFill;
    ctx.fillRect(bx, groundY - 40 - h, barW, h);
    const remaining = Math.max(0, dino.qteDeadline - dino.lastTs);
    ctx.fillStyle = "#aaa";
    ctx.font = "14px sans-serif";
    ctx.fillText(`${remaining.toFixed(1)}s`, bx + barW / 2, groundY - 20);
  }

  ctx.fillStyle = "#f8f8f8";
  ctx.font = "16px sans-serif";
  ctx.textAlign = "left";
  ctx.fillText(`health: ${"♥".repeat(dino.health)}`, 20, 30);
  const table = successTable(dino);
  let y = 60;
  for (const cls of Object.keys(table).sort()) {
    ctx.fillText(`${cls}: ${table[cls].success}/${table[cls].total}`, 20, y);
    y += 22;
  }
  if (dino.gameOver) {
    ctx.font = "bold 30px sans-serif";
    ctx.textAlign = "center";
    ctx.fillText(`game over - ${totalAttempts(dino)} obstacles`,
                 canvas.width / 2, canvas.height / 2);
  }
}

function frameLoop(): void {
  if (state.view === "dino") {
    drawDino();
  } else {
    const thresholds = state.config?.thresholds ?? {};
    const view = feedbackViewModel(classNames(state), state.frame, thresholds,
                                   state.connected);
    renderFeedback(ctx, view, canvas.width, canvas.height);
    if (state.lastCue) {
      ctx.fillStyle = "#ffc914";
      ctx.font = "bold 20px sans-serif";
      ctx.textAlign = "left";
      ctx.fillText(`cue: ${state.lastCue.class}`, 20, 30);
    }
  }
  requestAnimationFrame(frameLoop);
}

requestAnimationFrame(frameLoop);
