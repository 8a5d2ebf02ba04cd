"""Core sequence containers, differencing, windowing and scaling.

Everything here works on float64 numpy arrays along axis 0 (time), so the same
functions serve single series and ``N x k`` latent matrices alike.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np


@dataclass(frozen=True)
class Series:
    """A named, finite, read-only 1-D series."""

    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 1:
            raise ValueError(f"series {self.name!r} must be 1-D and non-empty, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError(f"series {self.name!r} contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


@dataclass(frozen=True)
class Frame:
    """Multivariate chronological table: ordered named columns on a date index."""

    index: np.ndarray
    columns: Mapping[str, np.ndarray]

    def __post_init__(self):
        index = np.asarray(self.index).astype("datetime64[D]")
        if index.ndim != 1:
            raise ValueError("index must be 1-D")
        if index.size > 1:
            steps = np.diff(index).astype(np.int64)
            if np.any(steps <= 0):
                bad = int(np.argmax(steps <= 0)) + 1
                raise ValueError(f"index not strictly increasing at position {bad} ({index[bad]})")
        cols = {}
        for name, values in self.columns.items():
            v = Series(values, name).values
            if v.size != index.size:
                raise ValueError(f"column {name!r} has length {v.size}, index has {index.size}")
            cols[name] = v
        index.setflags(write=False)
        object.__setattr__(self, "index", index)
        object.__setattr__(self, "columns", dict(cols))

    @classmethod
    def from_matrix(cls, index, matrix, names: Iterable[str]) -> "Frame":
        matrix = np.asarray(matrix, dtype=np.float64)
        names = list(names)
        if matrix.ndim != 2 or matrix.shape[1] != len(names):
            raise ValueError(f"matrix shape {matrix.shape} does not match {len(names)} names")
        return cls(index, {n: matrix[:, j] for j, n in enumerate(names)})

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    @property
    def values(self) -> np.ndarray:
        """``N x d`` float64 matrix in column order."""
        if not self.columns:
            return np.empty((len(self), 0))
        return np.column_stack([self.columns[n] for n in self.columns])

    def __len__(self):
        return int(self.index.size)

    def __getitem__(self, name: str) -> Series:
        try:
            return Series(self.columns[name], name)
        except KeyError:
            raise KeyError(f"no column {name!r}; available: {', '.join(self.columns)}") from None

    def select(self, names: Iterable[str]) -> "Frame":
        return Frame(self.index, {n: self[n].values for n in names})

    def rows(self, sl: slice) -> "Frame":
        return Frame(self.index[sl], {n: v[sl] for n, v in self.columns.items()})


def difference(x, order: int = 1) -> np.ndarray:
    """Length-preserving differencing along axis 0.

    Each pass replaces ``x[t]`` by ``x[t] - x[t-1]`` for ``t > 0`` and pins
    ``x[0]`` to zero, so the output keeps the time alignment of the input.

    >>> difference([5.0, 7.0, 4.0])
    array([ 0.,  2., -3.])
    """
    out = np.array(x, dtype=np.float64)
    if order < 1:
        raise ValueError(f"order must be a positive integer, got {order}")
    if order >= out.shape[0]:
        raise ValueError(f"order {order} must be smaller than the series length {out.shape[0]}")
    for _ in range(order):
        d = np.empty_like(out)
        d[0] = 0.0
        np.subtract(out[1:], out[:-1], out=d[1:])
        out = d
    return out


def difference_adjoint(g, order: int = 1) -> np.ndarray:
    """Transpose of the linear map :func:`difference` (used for backprop)."""
    g = np.array(g, dtype=np.float64)
    for _ in range(order):
        out = np.zeros_like(g)
        out[1:] += g[1:]
        out[:-1] -= g[1:]
        g = out
    return g


def inverse_difference(d, initial, order: int = 1) -> np.ndarray:
    """Undo :func:`difference`.

    ``initial`` is the first value of the original series for ``order == 1``;
    for higher orders pass a sequence with the first value of every
    intermediate series, outermost first (``initial[0]`` is ``s[0]``).
    """
    out = np.array(d, dtype=np.float64)
    inits = [initial] if order == 1 else list(initial)
    if len(inits) != order:
        raise ValueError(f"need {order} initial values, got {len(inits)}")
    if out.shape[0] < 1:
        raise ValueError("empty input")
    for init in reversed(inits):
        step = out.copy()
        step[0] = init
        out = np.cumsum(step, axis=0)
    return out


def difference_initials(x, order: int = 1) -> list:
    """Initial values needed by :func:`inverse_difference` to invert ``difference(x, order)``."""
    cur = np.asarray(x, dtype=np.float64)
    inits = []
    for _ in range(order):
        inits.append(cur[0].copy() if cur.ndim > 1 else float(cur[0]))
        cur = difference(cur, 1)
    return inits


def make_windows(features, target, lookback: int, index=None):
    """Sliding windows for one-step-ahead forecasting.

    Pair ``j`` holds feature rows ``[t - lookback, t)`` and the target at
    ``t = lookback + j``. ``features`` may be a :class:`Frame` (its index is
    checked for monotonicity) or an ``N x d`` array.

    Returns ``(windows, targets, target_index)`` with windows shaped
    ``(N - lookback, lookback, d)``.
    """
    if isinstance(features, Frame):
        if index is not None and not np.array_equal(np.asarray(index, dtype="datetime64[D]"), features.index):
            raise ValueError("features and target are not aligned on the same index")
        X = features.values
    else:
        X = np.asarray(features, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if index is not None:
            steps = np.diff(np.asarray(index).astype("datetime64[D]")).astype(np.int64)
            if np.any(steps <= 0):
                raise ValueError("index must be strictly increasing")
    y = np.asarray(target, dtype=np.float64)
    n = X.shape[0]
    if y.shape[0] != n:
        raise ValueError(f"features have {n} rows but target has {y.shape[0]}")
    if lookback < 1 or lookback >= n:
        raise ValueError(f"lookback must be in [1, {n - 1}], got {lookback}")
    starts = np.arange(n - lookback)
    windows = X[starts[:, None] + np.arange(lookback)[None, :]]
    tidx = starts + lookback
    return windows, y[tidx], tidx


@dataclass(frozen=True)
class ScalerParams:
    kind: str
    names: tuple
    loc: np.ndarray = field(repr=False)
    scale: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "names": list(self.names),
                "loc": [float(v) for v in self.loc], "scale": [float(v) for v in self.scale]}

    @classmethod
    def from_dict(cls, d) -> "ScalerParams":
        return cls(d["kind"], tuple(d["names"]), np.asarray(d["loc"], float), np.asarray(d["scale"], float))


def fit_scale(data, kind: str = "zscore", names=None) -> ScalerParams:
    """Fit per-column scaling statistics on a training slice.

    ``minmax`` maps min to 0 and max to 1; ``zscore`` maps mean to 0 and
    (population) std to 1. Constant columns raise ``ValueError`` naming the
    column.
    """
    if isinstance(data, Frame):
        names = data.names
        X = data.values
    else:
        X = np.asarray(data, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        names = list(names) if names is not None else [f"c{j}" for j in range(X.shape[1])]
    if kind == "minmax":
        loc = X.min(axis=0)
        scale = X.max(axis=0) - loc
    elif kind == "zscore":
        loc = X.mean(axis=0)
        scale = X.std(axis=0)
    else:
        raise ValueError(f"unknown scaler kind {kind!r}; expected 'minmax' or 'zscore'")
    for j, s in enumerate(scale):
        if not s > 0:
            raise ValueError(f"column {names[j]!r} is constant on the fitting slice; cannot {kind}-scale it")
    return ScalerParams(kind, tuple(names), loc, scale)


def apply_scale(data, params: ScalerParams):
    """Apply fitted scaling; values outside the fitted range are allowed."""
    if isinstance(data, Frame):
        cols = {n: (data.columns[n] - params.loc[j]) / params.scale[j] for j, n in enumerate(params.names)}
        return Frame(data.index, cols)
    X = np.asarray(data, dtype=np.float64)
    return (X - params.loc) / params.scale if X.ndim > 1 else (X - params.loc[0]) / params.scale[0]


def invert_scale(data, params: ScalerParams):
    if isinstance(data, Frame):
        cols = {n: data.columns[n] * params.scale[j] + params.loc[j] for j, n in enumerate(params.names)}
        return Frame(data.index, cols)
    X = np.asarray(data, dtype=np.float64)
    return X * params.scale + params.loc if X.ndim > 1 else X * params.scale[0] + params.loc[0]
