"""Information transfer rate (Wolpaw's formula) in bits per minute."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..signal_core.types import ParameterError


@dataclass(frozen=True)
class ItrParams:
    """N-class selection at accuracy P, one selection every T seconds."""

    n_classes: int
    accuracy: float
    seconds_per_selection: float

    def __post_init__(self):
        if self.n_classes < 2:
            raise ParameterError("ITR needs at least 2 classes")
        if self.seconds_per_selection <= 0:
            raise ParameterError("selection time must be positive")
        chance = 1.0 / self.n_classes
        if not chance <= self.accuracy <= 1.0:
            raise ParameterError(
                f"accuracy must lie in [{chance:.4f}, 1] for N={self.n_classes}")


def compute_itr(params: ItrParams) -> float:
    """bits/selection * selections/minute.

    bits = log2 N + P log2 P + (1-P) log2((1-P)/(N-1)); the P=1 and P=1/N
    endpoints are the continuous limits (log2 N and 0 respectively).
    """
    n, p = params.n_classes, params.accuracy
    bits = math.log2(n)
    if p > 0.0:
        bits += p * math.log2(p)
    if p < 1.0:
        bits += (1.0 - p) * math.log2((1.0 - p) / (n - 1))
    return bits * 60.0 / params.seconds_per_selection
