"""Seeded synthetic series used as stand-ins for the market datasets."""
from __future__ import annotations

import numpy as np

from .series import Frame


def business_days(n: int, start: str = "2000-01-03") -> np.ndarray:
    first = np.busday_offset(np.datetime64(start, "D"), 0, roll="forward")
    return np.busday_offset(first, np.arange(n), roll="forward")


def random_walk(n: int, seed: int, scale: float = 1.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.cumsum(rng.normal(scale=scale, size=n))


def seasonal_pattern(n: int, period: int, phase: float = 0.0, harmonics: int = 2) -> np.ndarray:
    t = np.arange(n)
    out = np.zeros(n)
    for h in range(1, harmonics + 1):
        out += np.sin(2 * np.pi * h * t / period + h * phase) / h
    return out


def surrogate_frame(n: int = 3000, d: int = 6, period: int = 12, seed: int = 0,
                    noise: float = 0.3, seasonal_amplitude: float = 2.0) -> Frame:
    """Unit-root trend + period-``period`` seasonality + noise in ``d`` correlated columns.

    Every column loads on one shared random walk (so each is non-stationary)
    plus a column-specific walk, a phase-shifted seasonal pattern and white
    noise.
    """
    rng = np.random.default_rng([seed, 7])
    shared = np.cumsum(rng.normal(size=n))
    cols = {}
    for j in range(d):
        own = np.cumsum(rng.normal(scale=0.3, size=n))
        season = seasonal_amplitude * seasonal_pattern(n, period, phase=2 * np.pi * j / d)
        cols[f"x{j + 1}"] = 100.0 + (1.0 + 0.2 * j) * shared + own + season + rng.normal(scale=noise, size=n)
    return Frame(business_days(n), cols)


def latent_trend_seasonal(n: int = 1000, k: int = 4, period: int = 12, seed: int = 0, noise: float = 0.05):
    """Latent-like series whose next-step target carries trend and seasonal signal.

    Returns ``(z, target, parts)``. Each latent column is a slow trend (one
    long sinusoid, so the held-out tail stays inside the training range) plus
    a seasonal pattern plus noise; the target at ``t`` is the column-0 trend
    level plus the column-1 seasonal value.
    """
    rng = np.random.default_rng([seed, 11])
    t = np.arange(n)
    trend = np.column_stack([1.5 * np.sin(2 * np.pi * t / (0.9 * n) + rng.uniform(0, 2 * np.pi))
                             for _ in range(k)])
    season = np.column_stack([seasonal_pattern(n, period, phase=rng.uniform(0, 2 * np.pi)) for _ in range(k)])
    z = trend + season + rng.normal(scale=noise, size=(n, k))
    target = trend[:, 0] + season[:, 1]
    return z, target, {"trend": trend, "seasonal": season}
