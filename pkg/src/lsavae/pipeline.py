"""End-to-end wiring: scale, decompose, phase 1, seasonal store, phase 2, stationarize."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .decompose import DEFAULT_PERIOD_CANDIDATES, decompose_additive, estimate_period
from .series import Frame, ScalerParams, apply_scale, difference, fit_scale
from .stationarizer import LatentDecomposition, LSAConfig, SeasonalStore, build_seasonal_store, stationarize
from .vae import TrainHistory, Vae, VaeConfig, chronological_split, train_phase1, train_phase2

STAGES = ("phase1", "phase2")


def stage_seeds(master_seed: int) -> dict:
    """Fan one master seed out to independent per-stage seeds.

    Stage ``i`` of :data:`STAGES` gets the first 32-bit word of
    ``SeedSequence(master_seed, spawn_key=(i,))``.
    """
    return {name: int(np.random.SeedSequence(master_seed, spawn_key=(i,)).generate_state(1)[0])
            for i, name in enumerate(STAGES)}


@dataclass
class RunConfig:
    """Everything a CLI run needs; serialised next to every output."""

    input: str = ""
    schema: str = "generic"
    symbol: str | None = None
    columns: list | None = None
    target: str | None = None
    period: int | str = "auto"
    period_candidates: list = field(default_factory=lambda: list(DEFAULT_PERIOD_CANDIDATES))
    diff_order: int = 1
    master_seed: int = 0
    vae: dict = field(default_factory=dict)
    phi: float = 1.0
    gamma: float = 1.0
    predictor: dict = field(default_factory=dict)
    phi_grid: list = field(default_factory=lambda: [0.0, 0.5, 1.0])
    gamma_grid: list = field(default_factory=lambda: [0.0, 0.5, 1.0])
    kinds: list = field(default_factory=lambda: ["DNN", "LSTM", "BLSTM", "GRU"])
    seeds: list = field(default_factory=lambda: [0])
    jobs: int = 1
    output_dir: str = "out"

    def __post_init__(self):
        if self.period != "auto":
            self.period = int(self.period)
            if self.period < 1:
                raise ValueError(f"period must be a positive integer or 'auto', got {self.period}")
        if self.diff_order not in (1, 2):
            raise ValueError(f"diff_order must be 1 or 2, got {self.diff_order}")
        LSAConfig(self.phi, self.gamma)
        for g in list(self.phi_grid) + list(self.gamma_grid):
            LSAConfig(float(g), 1.0)
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")
        unknown = (set(self.vae) - set(VaeConfig.__dataclass_fields__)) | ({"input_dim"} & set(self.vae))
        if unknown:
            raise ValueError(f"unknown or reserved vae option(s): {', '.join(sorted(unknown))}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return Path(path)

    def vae_config(self, input_dim: int, seed: int) -> VaeConfig:
        return VaeConfig(input_dim=input_dim, **{**self.vae, "seed": seed})


def resolve_period(values: np.ndarray, period, candidates=DEFAULT_PERIOD_CANDIDATES) -> int:
    """An explicit period passes through; ``"auto"`` scores the first column's increments.

    Increments are used because the autocorrelation of a unit-root level
    series is close to one at every lag and says nothing about periodicity.
    """
    if period != "auto":
        return int(period)
    x = difference(np.asarray(values, dtype=np.float64)[:, 0])[1:]
    usable = [c for c in candidates if 2 <= c <= x.size / 2]
    if not usable:
        raise ValueError(f"no candidate period fits a series of length {x.size}")
    return estimate_period(x, usable)


def seasonal_frame(frame: Frame, period: int) -> Frame:
    """Per-column seasonal component (the phase-1 training data)."""
    seasonal = decompose_additive(frame.values, period).seasonal
    return Frame.from_matrix(frame.index, seasonal, frame.names)


@dataclass
class FittedPipeline:
    phase1: Vae
    phase2: Vae
    store: SeasonalStore
    scaler: ScalerParams
    period: int
    history1: TrainHistory
    history2: TrainHistory
    seeds: dict


def fit_pipeline(frame: Frame, config: RunConfig) -> FittedPipeline:
    """Z-score on the training slice, phase 1 on seasonal parts, build the store, phase 2 on all data."""
    seeds = stage_seeds(config.master_seed)
    x = frame.values
    vcfg1 = config.vae_config(x.shape[1], seeds["phase1"])
    n_train = chronological_split(x.shape[0], vcfg1.validation_split)
    scaler = fit_scale(x[:n_train], "zscore", frame.names)
    scaled = Frame.from_matrix(frame.index, apply_scale(x, scaler), frame.names)
    period = resolve_period(scaled.values, config.period, config.period_candidates)
    seasonal = seasonal_frame(scaled, period) if period >= 2 else scaled
    model1, hist1 = train_phase1(vcfg1, seasonal)
    store = build_seasonal_store(model1, seasonal, period)
    model2, hist2 = train_phase2(config.vae_config(x.shape[1], seeds["phase2"]), scaled, store,
                                 LSAConfig(config.phi, config.gamma), config.diff_order)
    return FittedPipeline(model1, model2, store, scaler, period, hist1, hist2, seeds)


def encode_frame(model: Vae, frame: Frame, scaler: ScalerParams | None = None) -> np.ndarray:
    if scaler is not None and list(scaler.names) != frame.names:
        raise ValueError(f"scaler columns {scaler.names} do not match frame columns {frame.names}")
    x = frame.values if scaler is None else apply_scale(frame.values, scaler)
    return model.encode(x)


def latent_frame(frame: Frame, z: np.ndarray, prefix: str = "l_var") -> Frame:
    return Frame.from_matrix(frame.index, z, [f"{prefix}{j + 1}" for j in range(z.shape[1])])


def stationarize_frame(fitted: FittedPipeline, frame: Frame, diff_order: int = 1) -> LatentDecomposition:
    z = encode_frame(fitted.phase2, frame, fitted.scaler)
    return stationarize(z, fitted.store, fitted.period, diff_order)
