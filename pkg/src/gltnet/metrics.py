"""Error metrics used by the experiment harness."""

from __future__ import annotations

import numpy as np

__all__ = ["rmae"]


def rmae(truth, estimate) -> float:
    """Relative mean absolute error, ||y - yhat||_1 / ||y||_1."""
    y = np.asarray(truth, dtype=float)
    yhat = np.asarray(estimate, dtype=float)
    if y.shape != yhat.shape:
        raise ValueError(f"shape mismatch: {y.shape} vs {yhat.shape}")
    denom = np.abs(y).sum()
    if denom <= 0:
        raise ValueError("truth vector has zero l1 norm")
    return float(np.abs(y - yhat).sum() / denom)
