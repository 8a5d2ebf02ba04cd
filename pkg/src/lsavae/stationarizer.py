"""Latent-space stationarization with seasonal/trend preservation.

Phase 1 stores one period of encoded seasonal structure as a fixed bank of
latent vectors. Phase 2 splits an encoded series ``z`` into a snapped
seasonal part ``z_sn``, a differenced stationary part ``z_stnry`` and the
trend left over, then recombines them with weights ``phi`` and ``gamma``::

    z_tr  = z - (z_stnry + z_sn)
    z_str = z_stnry + phi * z_sn + gamma * z_tr
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .decompose import decompose_additive, seasonal_operator, seasonal_profile
from .neural.checkpoint import load_container, save_container
from .series import Frame, difference, difference_adjoint


@dataclass(frozen=True)
class SeasonalStore:
    """Non-learnable ``T x k`` bank of seasonal latent vectors."""

    embeddings: np.ndarray
    period: int
    fingerprint: str = ""

    def __post_init__(self):
        emb = np.array(self.embeddings, dtype=np.float64)
        if emb.ndim != 2 or emb.shape[0] != self.period or emb.shape[0] < 1:
            raise ValueError(f"store must hold exactly period={self.period} rows, got shape {emb.shape}")
        emb.setflags(write=False)
        object.__setattr__(self, "embeddings", emb)

    @property
    def latent_dim(self) -> int:
        return int(self.embeddings.shape[1])

    def save(self, path):
        meta = {"period": self.period, "latent_dim": self.latent_dim, "fingerprint": self.fingerprint}
        return save_container(path, "store", {"embeddings": self.embeddings}, meta)

    @classmethod
    def load(cls, path) -> "SeasonalStore":
        header, arrays = load_container(path, "store")
        meta = header["meta"]
        return cls(arrays["embeddings"], int(meta["period"]), meta.get("fingerprint", ""))


@dataclass(frozen=True)
class LSAConfig:
    phi: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        for name in ("phi", "gamma"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class LatentDecomposition:
    z: np.ndarray
    z_s: np.ndarray
    z_sn: np.ndarray
    z_rtr: np.ndarray
    z_stnry: np.ndarray
    z_tr: np.ndarray
    assignments: np.ndarray
    period: int
    diff_order: int

    def columns(self) -> dict:
        """All latent intermediates as ``name -> N x k`` arrays."""
        return {"z": self.z, "z_s": self.z_s, "z_sn": self.z_sn, "z_rtr": self.z_rtr,
                "z_stnry": self.z_stnry, "z_tr": self.z_tr}


def array_fingerprint(arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return h.hexdigest()[:16]


def build_seasonal_store(encoder, seasonal_data, period: int, fingerprint: str | None = None) -> SeasonalStore:
    """Encode seasonal rows and keep the per-phase mean latent vector.

    ``encoder`` is either a model with ``encode``/``fingerprint`` methods or a
    plain callable mapping ``N x d`` rows to ``N x k`` latents.
    """
    rows = seasonal_data.values if isinstance(seasonal_data, Frame) else np.asarray(seasonal_data, dtype=np.float64)
    if period < 1:
        raise ValueError(f"period must be positive, got {period}")
    if rows.shape[0] < period:
        raise ValueError(f"need at least one period ({period}) of rows, got {rows.shape[0]}")
    encode = encoder.encode if hasattr(encoder, "encode") else encoder
    if fingerprint is None:
        fingerprint = encoder.fingerprint() if hasattr(encoder, "fingerprint") else ""
    latents = np.asarray(encode(rows), dtype=np.float64)
    if latents.ndim != 2 or latents.shape[0] != rows.shape[0]:
        raise ValueError(f"encoder returned shape {latents.shape} for {rows.shape[0]} rows")
    return SeasonalStore(seasonal_profile(latents, period), period, fingerprint)


def snap_indices(z_s, store: SeasonalStore) -> np.ndarray:
    z_s = np.asarray(z_s, dtype=np.float64)
    emb = store.embeddings
    if emb.shape[0] == 0:
        raise ValueError("seasonal store is empty")
    if z_s.ndim != 2 or z_s.shape[1] != emb.shape[1]:
        raise ValueError(f"latent dim mismatch: queries {z_s.shape}, store {emb.shape}")
    dist = ((z_s[:, None, :] - emb[None, :, :]) ** 2).sum(axis=2)
    return np.argmin(dist, axis=1)


def snap_seasonal(z_s, store: SeasonalStore) -> np.ndarray:
    """Replace each row by its nearest store row (squared Euclidean; ties to lowest index)."""
    return store.embeddings[snap_indices(z_s, store)].copy()


def stationarize(z, store: SeasonalStore, period: int | None = None, diff_order: int = 1,
                 until_stationary: bool = False, alpha: float = 0.05) -> LatentDecomposition:
    """Split latent series ``z`` (``N x k``) into seasonal, stationary and trend parts.

    With ``until_stationary`` a second differencing pass is applied when any
    column of the first-order result still fails the ADF test at ``alpha``.
    """
    z = np.array(z, dtype=np.float64)
    period = store.period if period is None else int(period)
    if period != store.period:
        raise ValueError(f"period {period} does not match the store period {store.period}")
    if z.ndim != 2 or z.shape[1] != store.latent_dim:
        raise ValueError(f"expected N x {store.latent_dim} latents, got shape {z.shape}")
    if z.shape[0] < 2 * period:
        raise ValueError(f"need at least 2 * period = {2 * period} rows, got {z.shape[0]}")

    z_s = decompose_additive(z, period).seasonal if period >= 2 else np.zeros_like(z)
    idx = snap_indices(z_s, store)
    z_sn = store.embeddings[idx]
    z_rtr = z - z_sn
    z_stnry = difference(z_rtr, diff_order)
    if until_stationary and diff_order == 1:
        from .unitroot import adf_test

        if any(adf_test(z_stnry[:, j]).p_value >= alpha for j in range(z.shape[1])):
            diff_order = 2
            z_stnry = difference(z_rtr, 2)
    z_tr = z - (z_stnry + z_sn)
    return LatentDecomposition(z, z_s, z_sn, z_rtr, z_stnry, z_tr, idx, period, diff_order)


def recombine(decomp: LatentDecomposition, lsa: LSAConfig) -> np.ndarray:
    """``z_stnry + phi * z_sn + gamma * z_tr``.

    Evaluated as ``gamma * z + (1 - gamma) * z_stnry + (phi - gamma) * z_sn``,
    the same quantity once ``z_tr`` is substituted, so that full preservation
    returns ``z`` and zero preservation returns ``z_stnry`` bit for bit.
    """
    phi, gamma = lsa.phi, lsa.gamma
    return gamma * decomp.z + (1.0 - gamma) * decomp.z_stnry + (phi - gamma) * decomp.z_sn


def recombine_backward(grad, period: int, diff_order: int, lsa: LSAConfig) -> np.ndarray:
    """Gradient of :func:`recombine` o :func:`stationarize` w.r.t. ``z``.

    Decomposition and differencing are linear and differentiated exactly; the
    nearest-embedding snap passes gradients straight through (``dz_sn/dz_s = I``).
    """
    g = np.asarray(grad, dtype=np.float64)
    phi, gamma = lsa.phi, lsa.gamma
    out = gamma * g
    if gamma != 1.0 or phi != gamma:
        S = seasonal_operator(g.shape[0], period) if period >= 2 else np.zeros((g.shape[0],) * 2)
        if gamma != 1.0:
            gd = difference_adjoint((1.0 - gamma) * g, diff_order)
            out = out + gd - S.T @ gd
        if phi != gamma:
            out = out + S.T @ ((phi - gamma) * g)
    return out


def stationarization_loss(z, z_stnry) -> float:
    """Mean squared difference between raw and stationary latents."""
    z = np.asarray(z, dtype=np.float64)
    zs = np.asarray(z_stnry, dtype=np.float64)
    if z.shape != zs.shape:
        raise ValueError(f"shape mismatch: {z.shape} vs {zs.shape}")
    return float(np.mean((z - zs) ** 2))
