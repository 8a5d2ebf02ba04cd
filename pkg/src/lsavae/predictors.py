"""Downstream forecasters (DNN, LSTM, BLSTM, GRU) and the phi/gamma sweep."""
from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .neural import BLSTM, GRU, LSTM, AdamState, Dense, Flatten, ReLU, Sequential, Sigmoid, Tanh, adam_step
from .series import apply_scale, fit_scale, make_windows
from .stationarizer import LatentDecomposition, LSAConfig, recombine

KINDS = ("DNN", "LSTM", "BLSTM", "GRU")
CSV_COLUMNS = ("dataset", "target", "model", "phi", "gamma", "seed", "rmse_scaled", "rmse_zscored")


@dataclass
class PredictorConfig:
    kind: str = "DNN"
    hidden: tuple = (64, 32, 16, 8)
    lookback: int = 30
    epochs: int = 100
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0
    test_size: int = 252

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown predictor kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        self.hidden = tuple(int(h) for h in self.hidden)
        if len(self.hidden) != 4:
            raise ValueError(f"need exactly four hidden sizes, got {self.hidden}")

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


def build_predictor(config: PredictorConfig, n_features: int) -> Sequential:
    """Four hidden layers then a sigmoid unit.

    The first hidden layer is Dense+ReLU over the flattened window for
    ``DNN``, or the recurrent layer's last hidden state followed by ReLU for
    the sequence models; the other three are Dense+tanh.
    """
    rng = np.random.default_rng([config.seed, KINDS.index(config.kind)])
    h1, h2, h3, h4 = config.hidden
    if config.kind == "DNN":
        first = [Flatten(), Dense(config.lookback * n_features, h1, rng)]
        width = h1
    elif config.kind == "LSTM":
        first, width = [LSTM(n_features, h1, rng)], h1
    elif config.kind == "BLSTM":
        first, width = [BLSTM(n_features, h1, rng)], 2 * h1
    else:
        first, width = [GRU(n_features, h1, rng)], h1
    layers = first + [ReLU(),
                      Dense(width, h2, rng), Tanh(),
                      Dense(h2, h3, rng), Tanh(),
                      Dense(h3, h4, rng), Tanh(),
                      Dense(h4, 1, rng), Sigmoid()]
    return Sequential(layers)


def train_predictor(model: Sequential, windows, targets, config: PredictorConfig):
    """Mini-batch MSE training with Adam; returns ``(model, per-epoch loss list)``."""
    X = np.asarray(windows, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64).reshape(-1, 1)
    if X.shape[0] != y.shape[0] or X.shape[0] == 0:
        raise ValueError(f"windows ({X.shape[0]}) and targets ({y.shape[0]}) must be non-empty and aligned")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("windows or targets contain non-finite values")
    opt = AdamState(lr=config.learning_rate)
    rng = np.random.default_rng([config.seed, 101])
    params = model.parameters()
    history = []
    for _ in range(config.epochs):
        order = rng.permutation(X.shape[0])
        total = 0.0
        for start in range(0, X.shape[0], config.batch_size):
            idx = order[start:start + config.batch_size]
            pred = model.forward(X[idx], True)
            diff = pred - y[idx]
            loss = float(np.mean(diff * diff))
            if not np.isfinite(loss):
                raise FloatingPointError(f"non-finite loss while training {config.kind}")
            model.backward(2.0 * diff / diff.size)
            try:
                adam_step(params, model.gradients(), opt)
            except FloatingPointError as exc:
                raise FloatingPointError(f"{exc} while training {config.kind}") from exc
            total += loss * idx.size
        history.append(total / X.shape[0])
    return model, history


def predict(model: Sequential, windows, batch_size: int = 512) -> np.ndarray:
    X = np.asarray(windows, dtype=np.float64)
    return np.concatenate([model.forward(X[i:i + batch_size], False)[:, 0]
                           for i in range(0, X.shape[0], batch_size)])


def rmse(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=np.float64).ravel()
    t = np.asarray(targets, dtype=np.float64).ravel()
    if p.size == 0:
        raise ValueError("empty evaluation set")
    if p.shape != t.shape:
        raise ValueError(f"prediction/target shape mismatch {p.shape} vs {t.shape}")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def evaluate_rmse(model: Sequential, test_windows, test_targets) -> float:
    if len(test_windows) == 0:
        raise ValueError("empty test set")
    return rmse(predict(model, test_windows), test_targets)


@dataclass
class CellData:
    """Windows and targets for one (phi, gamma) cell, already split and scaled."""

    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray
    train_index: np.ndarray
    test_index: np.ndarray
    target_range_over_std: float


def prepare_cell(features, target, lookback: int, test_size: int) -> CellData:
    """Chronological split: targets in the last ``test_size`` rows are held out.

    Features are z-scored and targets min-max scaled with statistics from the
    training rows only.
    """
    features = np.asarray(features, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    n = features.shape[0]
    split = n - test_size
    if split <= lookback + 1 or test_size < 1:
        raise ValueError(f"{n} rows cannot hold lookback {lookback} plus a {test_size}-row test slice")
    fscale = fit_scale(features[:split], "zscore")
    tscale = fit_scale(target[:split], "minmax")
    X, y, tidx = make_windows(apply_scale(features, fscale), apply_scale(target, tscale), lookback)
    train = tidx < split
    ratio = float(tscale.scale[0] / np.std(target[:split]))
    return CellData(X[train], y[train], X[~train], y[~train], tidx[train], tidx[~train], ratio)


def sweep_cells(phi_grid, gamma_grid) -> list:
    """Trend sweep (phi = 1, gamma varies) followed by seasonal sweep (gamma = 1, phi varies)."""
    cells = [(1.0, float(g)) for g in gamma_grid] + [(float(p), 1.0) for p in phi_grid]
    out = []
    for c in cells:
        if c not in out:
            out.append(c)
    return out


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)

    def cell(self, model, phi, gamma, column="rmse_scaled") -> np.ndarray:
        return np.array([r[column] for r in self.rows
                         if r["model"] == model and r["phi"] == phi and r["gamma"] == gamma])

    def mean(self, model, phi, gamma, column="rmse_scaled") -> float:
        return float(np.mean(self.cell(model, phi, gamma, column)))

    def stderr(self, model, phi, gamma, column="rmse_scaled") -> float:
        v = self.cell(model, phi, gamma, column)
        return float(np.std(v, ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0

    def to_csv(self, path):
        write_sweep_csv(path, self.rows)

    def to_markdown(self, column="rmse_scaled") -> str:
        """Two tables: trend impact (phi = 1, gamma varies) and seasonal impact (gamma = 1, phi varies)."""
        models = [k for k in KINDS if any(r["model"] == k for r in self.rows)]
        gammas = sorted({r["gamma"] for r in self.rows if r["phi"] == 1.0})
        phis = sorted({r["phi"] for r in self.rows if r["gamma"] == 1.0})
        out = []
        for title, key, levels in (("Impact of trend (phi = 1.0)", "gamma", gammas),
                                   ("Impact of seasonal (gamma = 1.0)", "phi", phis)):
            out.append(f"### {title}, RMSE ({column})\n")
            out.append("| Model | " + " | ".join(f"{key} = {v:.1f}" for v in levels) + " |")
            out.append("|---|" + "---|" * len(levels))
            for m in models:
                vals = []
                for v in levels:
                    phi, gamma = (1.0, v) if key == "gamma" else (v, 1.0)
                    vals.append(f"{self.mean(m, phi, gamma, column):.4f}")
                out.append(f"| {m} | " + " | ".join(vals) + " |")
            out.append("")
        return "\n".join(out)


def write_sweep_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(r[k]) if isinstance(r[k], float) else r[k] for k in CSV_COLUMNS})


def read_sweep_csv(path) -> list:
    rows = []
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            rows.append({"dataset": r["dataset"], "target": r["target"], "model": r["model"],
                         "phi": float(r["phi"]), "gamma": float(r["gamma"]), "seed": int(r["seed"]),
                         "rmse_scaled": float(r["rmse_scaled"]), "rmse_zscored": float(r["rmse_zscored"])})
    return rows


def _run_cell(args):
    decomp, target, phi, gamma, kind, seed, base, labels = args
    cfg = PredictorConfig(**{**base, "kind": kind, "seed": seed})
    z_str = recombine(decomp, LSAConfig(phi, gamma))
    data = prepare_cell(z_str, target, cfg.lookback, cfg.test_size)
    model = build_predictor(cfg, z_str.shape[1])
    try:
        train_predictor(model, data.train_x, data.train_y, cfg)
    except FloatingPointError as exc:
        raise FloatingPointError(f"cell model={kind} phi={phi} gamma={gamma} seed={seed}: {exc}") from exc
    score = evaluate_rmse(model, data.test_x, data.test_y)
    return {**labels, "model": kind, "phi": phi, "gamma": gamma, "seed": int(seed),
            "rmse_scaled": score, "rmse_zscored": score * data.target_range_over_std}


def run_sweep(decomp: LatentDecomposition, target, phi_grid=(0.0, 0.5, 1.0), gamma_grid=(0.0, 0.5, 1.0),
              kinds=KINDS, seeds=(0,), config: PredictorConfig | None = None, dataset: str = "",
              target_name: str = "", csv_path=None, jobs: int = 1) -> SweepResult:
    """Train every model kind on ``z_str(phi, gamma)`` for each sweep cell and seed.

    With ``csv_path`` completed cells already present in the file are reused
    and new ones appended as they finish, so an interrupted sweep resumes
    where it stopped. Rows come back in a fixed (cell, model, seed) order
    regardless of ``jobs``.
    """
    config = config or PredictorConfig()
    base = {k: v for k, v in config.to_dict().items() if k not in ("kind", "seed")}
    labels = {"dataset": dataset, "target": target_name}
    target = np.asarray(target, dtype=np.float64)
    if target.shape[0] != decomp.z.shape[0]:
        raise ValueError(f"target length {target.shape[0]} != latent length {decomp.z.shape[0]}")

    keys = [(phi, gamma, kind, int(seed)) for phi, gamma in sweep_cells(phi_grid, gamma_grid)
            for kind in kinds for seed in seeds]
    done = {}
    if csv_path is not None and Path(csv_path).exists():
        for r in read_sweep_csv(csv_path):
            done[(r["phi"], r["gamma"], r["model"], r["seed"])] = r
    todo = [k for k in keys if k not in done]
    tasks = [(decomp, target, phi, gamma, kind, seed, base, labels) for phi, gamma, kind, seed in todo]

    def record(row):
        done[(row["phi"], row["gamma"], row["model"], row["seed"])] = row
        if csv_path is not None:
            write_sweep_csv(csv_path, [done[k] for k in keys if k in done])

    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, os.cpu_count() or 1)) as pool:
            for row in pool.map(_run_cell, tasks):
                record(row)
    else:
        for task in tasks:
            record(_run_cell(task))
    return SweepResult([done[k] for k in keys])
