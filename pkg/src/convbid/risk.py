"""Sample expected shortfall / windfall and the tail-count bookkeeping."""
from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateQuantileError


def k_of(alpha: float, T: int) -> int:
    """Number of tail samples ``floor(alpha * T)``; zero is an error."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if T < 1:
        raise ValueError("T must be positive")
    # guard against 0.05 * 365 style products landing a hair below an integer
    k = math.floor(alpha * T + 1e-9)
    if k < 1:
        raise DegenerateQuantileError(f"floor({alpha} * {T}) = 0 tail samples")
    return k


def _samples(r) -> np.ndarray:
    r = np.asarray(r, dtype=float).ravel()
    if r.size == 0:
        raise ValueError("empty revenue sample")
    if not np.all(np.isfinite(r)):
        raise ValueError("revenue samples must be finite")
    return r


def expected_shortfall(r, alpha: float) -> float:
    """Negated mean of the K smallest samples (lower is better)."""
    r = _samples(r)
    k = k_of(alpha, r.size)
    tail = np.sort(r, kind="stable")[:k]
    return float(-tail.mean())


def expected_windfall(r, alpha: float) -> float:
    """Mean of the K largest samples (higher is better)."""
    r = _samples(r)
    k = k_of(alpha, r.size)
    tail = np.sort(r, kind="stable")[r.size - k:]
    return float(tail.mean())


def es_objective(r, alpha: float, tau: float) -> float:
    """``-tau + (1/K) sum max(tau - r_t, 0)``; minimized over ``tau`` it equals the ES."""
    r = _samples(r)
    k = k_of(alpha, r.size)
    return float(-tau + np.maximum(tau - r, 0.0).sum() / k)
