"""Bidirectional diagonal state-space sequence classifier.

Each layer owns, per hidden channel, a diagonal complex state matrix A
(N entries), input/output vectors B and C, a skip term D and a log
timestep. ZOH discretization gives

    Abar = exp(dt*A),  Bbar = (Abar - 1)/A * B

and the layer is either materialized as the causal convolution kernel

    K[l] = Re( sum_n C_n * Abar_n^l * Bbar_n ),   l = 0..L-1

(a Vandermonde-structured evaluation, used for batch training) or stepped
as the equivalent linear recurrence

    x_t = Abar * x_{t-1} + Bbar * u_t,   y_t = Re(C x_t) + D u_t

(used online). Stability is guaranteed structurally: the real part of A is
parameterized through a negative softplus, so |Abar| < 1 always holds, even
mid-training. The bidirectional pass applies the same SSM to the
time-reversed sequence and concatenates both outputs.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

DTYPE = torch.float64
CDTYPE = torch.complex128


class ClassifierError(Exception):
    pass


class NumericError(ClassifierError):
    """NaN/Inf appeared in activations; carries the layer index."""


@dataclass(frozen=True)
class S4dConfig:
    d_input: int
    d_hidden: int = 64
    d_state: int = 32
    n_layers: int = 3
    n_classes: int = 3
    dropout: float = 0.2
    bidirectional: bool = True
    dt_min: float = 1e-3
    dt_max: float = 1e-1

    def __post_init__(self):
        if self.n_layers < 1 or self.d_hidden < 1 or self.d_state < 1:
            raise ClassifierError("layer/width/state sizes must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ClassifierError("dropout must lie in [0, 1)")
        if not 0 < self.dt_min < self.dt_max:
            raise ClassifierError("need 0 < dt_min < dt_max")
        if self.d_input < 1 or self.n_classes < 2:
            raise ClassifierError("invalid input width or class count")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "d_input", "d_hidden", "d_state", "n_layers", "n_classes",
            "dropout", "bidirectional", "dt_min", "dt_max")}

    @classmethod
    def from_dict(cls, d: dict) -> "S4dConfig":
        return cls(**d)


def _dropout(x: torch.Tensor, p: float, generator: torch.Generator | None):
    """Inverted dropout with an explicit generator (reproducible MC draws)."""
    if p <= 0.0 or generator is None:
        return x
    mask = (torch.rand(x.shape, generator=generator, dtype=x.dtype) >= p)
    return x * mask / (1.0 - p)


class S4dLayer(nn.Module):
    """One diagonal SSM over H independent hidden channels."""

    def __init__(self, d_hidden: int, d_state: int):
        super().__init__()
        H, N = d_hidden, d_state
        self.d_hidden, self.d_state = H, N
        self.a_re_free = nn.Parameter(torch.empty(H, N, dtype=DTYPE))
        self.a_im = nn.Parameter(torch.empty(H, N, dtype=DTYPE))
        self.b_re = nn.Parameter(torch.empty(H, N, dtype=DTYPE))
        self.b_im = nn.Parameter(torch.empty(H, N, dtype=DTYPE))
        self.c_re = nn.Parameter(torch.empty(H, N, dtype=DTYPE))
        self.c_im = nn.Parameter(torch.empty(H, N, dtype=DTYPE))
        self.skip = nn.Parameter(torch.empty(H, dtype=DTYPE))
        self.log_dt = nn.Parameter(torch.empty(H, dtype=DTYPE))
        self._kernel_cache: dict = {}

    def init_parameters(self, generator: torch.Generator,
                        dt_min: float, dt_max: float) -> None:
        H, N = self.d_hidden, self.d_state
        with torch.no_grad():
            # Re(A) = -softplus(free) = -1/2, Im(A_n) = pi*n (linear family).
            self.a_re_free.fill_(math.log(math.expm1(0.5)))
            self.a_im.copy_(torch.arange(N, dtype=DTYPE).repeat(H, 1) * math.pi)
            self.b_re.fill_(1.0)
            self.b_im.zero_()
            self.c_re.copy_(torch.randn(H, N, generator=generator, dtype=DTYPE)
                            * math.sqrt(0.5))
            self.c_im.copy_(torch.randn(H, N, generator=generator, dtype=DTYPE)
                            * math.sqrt(0.5))
            self.skip.fill_(1.0)
            log_lo, log_hi = math.log(dt_min), math.log(dt_max)
            self.log_dt.copy_(torch.rand(H, generator=generator, dtype=DTYPE)
                              * (log_hi - log_lo) + log_lo)

    def state_matrix(self) -> torch.Tensor:
        """A with Re(A) < 0 by construction."""
        return torch.complex(-nn.functional.softplus(self.a_re_free), self.a_im)

    def discretize(self):
        a = self.state_matrix()
        dt = torch.exp(self.log_dt)[:, None]
        dta = dt * a
        a_bar = torch.exp(dta)
        b = torch.complex(self.b_re, self.b_im)
        b_bar = (a_bar - 1.0) / a * b
        return a_bar, b_bar, dta

    def kernel(self, length: int) -> torch.Tensor:
        """Causal convolution kernel [H x length]."""
        _, b_bar, dta = self.discretize()
        c = torch.complex(self.c_re, self.c_im)
        steps = torch.arange(length, dtype=DTYPE)
        powers = torch.exp(dta.unsqueeze(-1) * steps)          # [H,N,L]
        return torch.einsum("hn,hnl->hl", c * b_bar, powers).real

    def _cached_kernel(self, length: int) -> torch.Tensor:
        """Kernel reuse for frozen-parameter inference; in-place optimizer
        updates bump the parameter versions and invalidate the cache."""
        version = sum(p._version for p in self.parameters())
        key = (length, version)
        kernel = self._kernel_cache.get(key)
        if kernel is None:
            self._kernel_cache.clear()
            kernel = self.kernel(length)
            self._kernel_cache[key] = kernel
        return kernel

    def forward_conv(self, u: torch.Tensor) -> torch.Tensor:
        """u: [B,H,T] -> causal convolution output [B,H,T]."""
        T = u.shape[-1]
        k = self.kernel(T) if torch.is_grad_enabled() else self._cached_kernel(T)
        n_fft = 2 * T
        y = torch.fft.irfft(torch.fft.rfft(u, n=n_fft)
                            * torch.fft.rfft(k, n=n_fft), n=n_fft)[..., :T]
        return y + self.skip[None, :, None] * u

    def forward_scan(self, u: torch.Tensor) -> torch.Tensor:
        """Same map as forward_conv, via the stepped linear recurrence."""
        a_bar, b_bar, _ = self.discretize()
        c = torch.complex(self.c_re, self.c_im)
        batch, H, T = u.shape
        x = torch.zeros(batch, H, self.d_state, dtype=CDTYPE)
        outputs = []
        for t in range(T):
            u_t = u[:, :, t]
            x = a_bar[None] * x + b_bar[None] * u_t.unsqueeze(-1).to(CDTYPE)
            outputs.append(torch.einsum("hn,bhn->bh", c, x).real
                           + self.skip[None, :] * u_t)
        return torch.stack(outputs, dim=-1)


class S4dBlock(nn.Module):
    """Pre-norm residual block: LN -> (bi)S4D -> GELU -> mix -> dropout -> +x."""

    def __init__(self, d_hidden: int, d_state: int, bidirectional: bool,
                 dropout: float):
        super().__init__()
        self.norm = nn.LayerNorm(d_hidden, dtype=DTYPE)
        self.ssm = S4dLayer(d_hidden, d_state)
        width = 2 * d_hidden if bidirectional else d_hidden
        self.mix = nn.Linear(width, d_hidden, dtype=DTYPE)
        self.bidirectional = bidirectional
        self.dropout = dropout

    def forward(self, x: torch.Tensor, mode: str,
                generator: torch.Generator | None) -> torch.Tensor:
        """x: [B,T,H]."""
        ssm_in = self.norm(x).transpose(1, 2)  # [B,H,T]
        run = self.ssm.forward_conv if mode == "conv" else self.ssm.forward_scan
        out = run(ssm_in)
        if self.bidirectional:
            backwards = run(ssm_in.flip(-1)).flip(-1)
            out = torch.cat([out, backwards], dim=1)
        out = self.mix(nn.functional.gelu(out).transpose(1, 2))
        out = _dropout(out, self.dropout, generator)
        return x + out


class S4dClassifier(nn.Module):
    """Encoder -> stacked bidirectional S4D blocks -> mean pool -> head."""

    def __init__(self, config: S4dConfig):
        super().__init__()
        self.config = config
        self.encoder = nn.Linear(config.d_input, config.d_hidden, dtype=DTYPE)
        self.blocks = nn.ModuleList([
            S4dBlock(config.d_hidden, config.d_state, config.bidirectional,
                     config.dropout)
            for _ in range(config.n_layers)
        ])
        self.head = nn.Linear(config.d_hidden, config.n_classes, dtype=DTYPE)

    def init_parameters(self, generator: torch.Generator) -> None:
        cfg = self.config
        with torch.no_grad():
            for linear in [self.encoder, self.head] + [b.mix for b in self.blocks]:
                bound = 1.0 / math.sqrt(linear.in_features)
                linear.weight.copy_(
                    (torch.rand(linear.weight.shape, generator=generator,
                                dtype=DTYPE) * 2 - 1) * bound)
                linear.bias.zero_()
            for block in self.blocks:
                block.ssm.init_parameters(generator, cfg.dt_min, cfg.dt_max)
                block.norm.weight.fill_(1.0)
                block.norm.bias.zero_()

    def forward(self, features: torch.Tensor, mode: str = "conv",
                dropout_generator: torch.Generator | None = None) -> torch.Tensor:
        """features: [B, d_input, T] -> logits [B, n_classes].

        ``dropout_generator`` activates dropout (training / MC passes);
        None runs deterministically.
        """
        if features.shape[1] != self.config.d_input:
            raise ClassifierError(
                f"model expects {self.config.d_input} feature channels, "
                f"got {features.shape[1]}")
        if mode not in ("conv", "scan"):
            raise ClassifierError(f"unknown forward mode {mode!r}")
        x = self.encoder(features.transpose(1, 2))  # [B,T,H]
        for index, block in enumerate(self.blocks):
            x = block(x, mode, dropout_generator)
            if not torch.isfinite(x).all():
                raise NumericError(f"non-finite activations after layer {index}")
        return self.head(x.mean(dim=1))

    def probabilities(self, features: torch.Tensor, mode: str = "conv",
                      dropout_generator=None) -> torch.Tensor:
        return torch.softmax(self.forward(features, mode, dropout_generator),
                             dim=-1)

    def stability_report(self) -> dict:
        """Max Re(A) and max |Abar| over all layers (must be < 0 and < 1)."""
        max_re, max_mag = -np.inf, 0.0
        with torch.no_grad():
            for block in self.blocks:
                a = block.ssm.state_matrix()
                a_bar, _, _ = block.ssm.discretize()
                max_re = max(max_re, float(a.real.max()))
                max_mag = max(max_mag, float(a_bar.abs().max()))
        return {"max_re_a": max_re, "max_abs_a_bar": max_mag}


def s4d_init(config: S4dConfig, seed: int) -> S4dClassifier:
    """Deterministically initialized classifier (same seed, same weights)."""
    generator = torch.Generator().manual_seed(seed)
    model = S4dClassifier(config)
    model.init_parameters(generator)
    return model


@dataclass
class StreamState:
    """Per-stream rolling window for online classification.

    The forward direction is a true recurrence; the backward direction of a
    bidirectional model needs the whole window, so pushes fill a bounded
    buffer and logits are computed over it with the scan path.
    """

    window_steps: int
    buffer: deque = field(default_factory=deque)

    def __post_init__(self):
        self.buffer = deque(maxlen=self.window_steps)

    def push(self, step: np.ndarray) -> None:
        self.buffer.append(np.asarray(step, dtype=np.float64))

    @property
    def full(self) -> bool:
        return len(self.buffer) == self.window_steps

    def reset(self) -> None:
        self.buffer.clear()

    def logits(self, model: S4dClassifier) -> np.ndarray:
        if not self.buffer:
            raise ClassifierError("stream buffer is empty")
        window = np.stack(self.buffer, axis=1)[None]  # [1, C, T]
        if window.shape[1] != model.config.d_input:
            raise ClassifierError("stream state does not match model input width")
        with torch.no_grad():
            out = model(torch.from_numpy(window), mode="scan")
        return out.numpy()[0]


@dataclass
class PredictionWithConfidence:
    """Mean class probabilities, their spread over MC passes, and the argmax."""

    mean_probs: np.ndarray
    std_probs: np.ndarray
    label: int

    def __post_init__(self):
        total = float(self.mean_probs.sum())
        if abs(total - 1.0) > 1e-6:
            raise ClassifierError("mean probabilities must lie on the simplex")


def mc_dropout_predict(model: S4dClassifier, features, n_passes: int = 20,
                       seed: int = 0) -> PredictionWithConfidence:
    """Stochastic forward passes with dropout enabled at inference.

    With dropout_rate = 0 the passes collapse to the deterministic forward
    (std exactly 0).
    """
    if n_passes < 2:
        raise ClassifierError("n_passes must be >= 2")
    x = torch.as_tensor(np.asarray(features, dtype=np.float64))
    if x.ndim == 2:
        x = x[None]
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        if model.config.dropout == 0.0:
            probs = model.probabilities(x).repeat(n_passes, 1)
        else:
            probs = torch.stack([
                model.probabilities(x, dropout_generator=generator)[0]
                for _ in range(n_passes)
            ])
    mean = probs.mean(dim=0).numpy()
    std = probs.std(dim=0, unbiased=False).numpy()
    mean = mean / mean.sum()
    return PredictionWithConfidence(mean_probs=mean, std_probs=std,
                                    label=int(np.argmax(mean)))
