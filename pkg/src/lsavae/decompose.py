"""Classical additive seasonal-trend decomposition.

Trend is a centred moving average over one period (2xT for even periods),
seasonal is the re-centred per-phase mean of the detrended interior and the
residual is whatever is left. All three are linear in the input, which the
latent stationarizer relies on for exact backprop (see :func:`seasonal_operator`).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

DEFAULT_PERIOD_CANDIDATES = (5, 21, 63, 252)


@dataclass(frozen=True)
class DecompositionResult:
    trend: np.ndarray
    seasonal: np.ndarray
    residual: np.ndarray
    period: int

    @property
    def profile(self) -> np.ndarray:
        return self.seasonal[: self.period]


def _ma_weights(period: int) -> np.ndarray:
    if period % 2:
        return np.full(period, 1.0 / period)
    w = np.full(period + 1, 1.0 / period)
    w[0] = w[-1] = 0.5 / period
    return w


def _check(n: int, period: int):
    if period < 2:
        raise ValueError(f"period must be >= 2, got {period}")
    if n < 2 * period:
        raise ValueError(f"series of length {n} is shorter than two periods ({2 * period})")


def centered_moving_average(x, period: int) -> np.ndarray:
    """Centred MA along axis 0 with linearly extrapolated edges."""
    x = np.asarray(x, dtype=np.float64)
    w = _ma_weights(period)
    h = len(w) // 2
    n = x.shape[0]
    # sliding window sum; rows are window positions
    win = np.lib.stride_tricks.sliding_window_view(x, len(w), axis=0)
    trend = np.empty_like(x)
    trend[h:n - h] = np.tensordot(win, w, axes=([-1], [0]))
    left_slope = trend[h + 1] - trend[h]
    right_slope = trend[n - h - 1] - trend[n - h - 2]
    for i in range(1, h + 1):
        trend[h - i] = trend[h] - i * left_slope
        trend[n - h - 1 + i] = trend[n - h - 1] + i * right_slope
    return trend


def decompose_additive(s, period: int) -> DecompositionResult:
    """Split ``s`` into trend + seasonal + residual with seasonal period ``period``.

    Works column-wise on 2-D input. Raises ``ValueError`` if ``period < 2`` or
    the series is shorter than two periods.
    """
    x = np.asarray(s, dtype=np.float64)
    n = x.shape[0]
    _check(n, period)
    trend = centered_moving_average(x, period)
    h = len(_ma_weights(period)) // 2

    detrended = x[h:n - h] - trend[h:n - h]
    phases = np.arange(h, n - h) % period
    profile = np.zeros((period,) + x.shape[1:])
    counts = np.bincount(phases, minlength=period)
    np.add.at(profile, phases, detrended)
    profile /= counts.reshape((period,) + (1,) * (x.ndim - 1))
    profile -= profile.mean(axis=0)

    seasonal = profile[np.arange(n) % period]
    residual = x - trend - seasonal
    return DecompositionResult(trend, seasonal, residual, period)


def seasonal_profile(seasonal, period: int) -> np.ndarray:
    """Per-phase mean of a seasonal component: one period of ``period`` values."""
    x = np.asarray(seasonal, dtype=np.float64)
    if period < 1 or x.shape[0] < period:
        raise ValueError(f"need at least one full period ({period}) of values, got {x.shape[0]}")
    phases = np.arange(x.shape[0]) % period
    prof = np.zeros((period,) + x.shape[1:])
    np.add.at(prof, phases, x)
    counts = np.bincount(phases, minlength=period)
    return prof / counts.reshape((period,) + (1,) * (x.ndim - 1))


@lru_cache(maxsize=32)
def _seasonal_operator(n: int, period: int) -> np.ndarray:
    op = decompose_additive(np.eye(n), period).seasonal
    op.setflags(write=False)
    return op


def seasonal_operator(n: int, period: int) -> np.ndarray:
    """Matrix ``S`` with ``decompose_additive(x, period).seasonal == S @ x`` for length-``n`` input."""
    return _seasonal_operator(int(n), int(period))


def autocorrelation(x, lag: int) -> float:
    x = np.asarray(x, dtype=np.float64)
    xc = x - x.mean()
    denom = float(np.dot(xc, xc))
    if denom == 0.0:
        return 0.0
    return float(np.dot(xc[:-lag], xc[lag:]) / denom)


def estimate_period(s, candidates=DEFAULT_PERIOD_CANDIDATES, min_score: float = 0.1) -> int:
    """Pick the candidate period with the highest mean autocorrelation at lags T and 2T.

    When no candidate scores at least ``min_score`` the series shows no usable
    periodicity and the smallest candidate is returned. Exact ties go to the
    smallest candidate too.
    """
    x = np.asarray(s, dtype=np.float64)
    cands = sorted(int(c) for c in candidates)
    if not cands:
        raise ValueError("candidate set is empty")
    for c in cands:
        if c < 2 or c > x.size / 2:
            raise ValueError(f"candidate period {c} outside [2, {x.size // 2}]")
    best, best_score = cands[0], -np.inf
    for c in cands:
        lags = [lag for lag in (c, 2 * c) if lag < x.size]
        score = float(np.mean([autocorrelation(x, lag) for lag in lags]))
        if score > best_score:
            best, best_score = c, score
    if best_score < min_score:
        return cands[0]
    return best
