"""Per-configuration loss weighting used when distilling the codec."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass
class LossReport:
    mse_losses: list[float]
    task_losses: list[float] | None = field(default=None)

    def __post_init__(self) -> None:
        if not self.mse_losses:
            raise ValueError("loss report needs at least one configuration")
        for name, vals in (("mse", self.mse_losses), ("task", self.task_losses or [])):
            arr = np.asarray(vals, dtype=np.float64)
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ValueError(f"{name} losses must be finite and non-negative")
        if self.task_losses is not None and len(self.task_losses) != len(self.mse_losses):
            raise ValueError("task and mse loss lists differ in length")

    @property
    def n(self) -> int:
        return len(self.mse_losses)


def distill_weights(report: LossReport | Sequence[float]) -> np.ndarray:
    """w_i = sum_j L_j / L_i, so every w_i * L_i equals the same total."""
    losses = report.mse_losses if isinstance(report, LossReport) else report
    arr = np.asarray(losses, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("no losses given")
    if np.any(arr <= 0):
        raise ValueError("every reconstruction loss must be strictly positive")
    return arr.sum() / arr


def kd_loss(weights: Sequence[float], task_losses: Sequence[float]) -> float:
    w = np.asarray(weights, dtype=np.float64)
    t = np.asarray(task_losses, dtype=np.float64)
    if w.shape != t.shape:
        raise ValueError(f"{w.size} weights for {t.size} task losses")
    return float(np.dot(w, t))
