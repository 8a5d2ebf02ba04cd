"""Acceptance suite: one test (or pair of tests) per numbered criterion.

Run ``pytest tests/test_acceptance.py`` to get a PASS/FAIL/SKIP line per
criterion in the terminal summary. Set ``LSAVAE_DJIA_CSV`` to a DJIA export
to enable criterion 4, and ``LSAVAE_FULL_ACCEPTANCE=1`` to run criterion 5's
100-seed property at desk scale (N=3000, 30 epochs) instead of the reduced
scale (N=1000, 10 epochs).
"""
import os
import time
from pathlib import Path

import numpy as np
import pytest

from gradcases import LAYER_CASES, MODEL_CASES
from lsavae.cli import main
from lsavae.decompose import decompose_additive
from lsavae.ingest import load_csv, write_csv
from lsavae.neural import check_configurations
from lsavae.pipeline import RunConfig, fit_pipeline, stationarize_frame
from lsavae.predictors import KINDS, PredictorConfig, run_sweep
from lsavae.stationarizer import LSAConfig, SeasonalStore, build_seasonal_store, recombine, stationarize
from lsavae.synthetic import latent_trend_seasonal, surrogate_frame
from lsavae.unitroot import adf_pvalue, adf_statistic, adf_test, critical_values
from lsavae.series import difference
from lsavae.vae import load_checkpoint, save_checkpoint


def elapsed_since(start):
    return time.perf_counter() - start


@pytest.mark.criterion(1, "recombine(stationarize(z), 1, 1) == z; (0, 0) gives z_stnry")
def test_master_identity():
    start = time.perf_counter()
    worst = 0.0
    for seed in range(1000):
        rng = np.random.default_rng([seed, 1])
        n, period = int(rng.integers(50, 501)), (5, 12)[seed % 2]
        z = rng.normal(size=(n, 4)).cumsum(axis=0) * rng.uniform(0.1, 10)
        store = SeasonalStore(rng.normal(size=(period, 4)), period)
        dec = stationarize(z, store)
        worst = max(worst, float(np.max(np.abs(recombine(dec, LSAConfig(1.0, 1.0)) - z))))
        assert np.array_equal(recombine(dec, LSAConfig(0.0, 0.0)), dec.z_stnry), seed
    assert worst < 1e-9
    assert elapsed_since(start) < 10


@pytest.mark.criterion(2, "trend + seasonal + residual identity, periodicity, sine fixture")
def test_decomposition_identity():
    start = time.perf_counter()
    for seed in range(1000):
        rng = np.random.default_rng([seed, 2])
        n, period = int(rng.integers(30, 400)), int(rng.integers(2, 13))
        if n < 2 * period:
            n = 2 * period
        x = rng.normal(size=n).cumsum() * rng.uniform(0.01, 1e3) + rng.uniform(-1e4, 1e4)
        r = decompose_additive(x, period)
        scale = max(float(np.max(np.abs(x))), 1e-300)
        assert np.max(np.abs(r.trend + r.seasonal + r.residual - x)) / scale < 1e-12, seed
        assert np.array_equal(r.seasonal[period:], r.seasonal[:-period]), seed
    t = np.arange(240)
    sine = np.sin(2 * np.pi * t / 12)
    r = decompose_additive(sine, 12)
    assert np.max(np.abs(r.seasonal[12:-12] - sine[12:-12])) < 0.02
    assert elapsed_since(start) < 5


@pytest.mark.criterion(3, "ADF scale invariance, Monte-Carlo outcomes, MacKinnon consistency")
def test_adf_correctness():
    start = time.perf_counter()
    base = np.random.default_rng(0).normal(size=500).cumsum()
    for a, b in [(1e-3, 5.0), (7.5, -300.0), (1e3, 1e4)]:
        assert abs(adf_statistic(a * base + b)[0] - adf_statistic(base)[0]) < 1e-8

    walk_keep = noise_reject = diff_reject = 0
    for seed in range(100):
        rng = np.random.default_rng([seed, 3])
        walk = rng.normal(size=1000).cumsum()
        walk_keep += adf_test(walk).p_value >= 0.05
        noise_reject += adf_test(rng.normal(size=1000)).p_value < 0.05
        diff_reject += adf_test(difference(walk)).p_value < 0.05
    assert walk_keep >= 90 and noise_reject >= 99 and diff_reject >= 99

    cv1 = critical_values(5700)["1%"]
    assert abs(cv1 - (-3.433)) <= 0.01
    assert abs(adf_pvalue(cv1, 5700) - 0.01) <= 0.002
    assert elapsed_since(start) < 60


def _djia_path():
    env = os.environ.get("LSAVAE_DJIA_CSV")
    candidates = [Path(env)] if env else []
    root = Path(__file__).resolve().parents[1]
    candidates += [root / "data" / "djia.csv", root / "data" / "Dow Jones Industrial Average Historical Data.csv"]
    return next((p for p in candidates if p.is_file()), None)


@pytest.mark.criterion(4, "DJIA Price ADF statistic -1.32 +/- 0.15, p 0.618 +/- 0.05")
def test_djia_price_adf():
    path = _djia_path()
    if path is None:
        pytest.skip("no DJIA export available (set LSAVAE_DJIA_CSV); the public file is not bundled")
    frame = load_csv(path, "djia")
    keep = (frame.index >= np.datetime64("2000-01-01")) & (frame.index <= np.datetime64("2022-12-31"))
    price = frame["Price"].values[keep]
    if price.size < 5000:
        pytest.skip(f"{path} covers only {price.size} trading days of 2000-2022; snapshot differs")
    res = adf_test(price)
    assert abs(res.statistic - (-1.32)) <= 0.15
    assert abs(res.p_value - 0.618) <= 0.05


def _latent_columns_stationary(seed, n, epochs):
    frame = surrogate_frame(n=n, d=6, period=12, seed=seed)
    cfg = RunConfig(period=12, master_seed=seed, vae={"epochs": epochs})
    dec = stationarize_frame(fit_pipeline(frame, cfg), frame)
    return all(adf_test(dec.z_stnry[:, j]).p_value < 0.05 for j in range(dec.z.shape[1]))


@pytest.mark.criterion(5, "z_stnry rejects the unit root in every latent column, >= 95/100 seeds")
def test_stationarity_property_over_100_seeds():
    full = os.environ.get("LSAVAE_FULL_ACCEPTANCE") == "1"
    n, epochs = (3000, 30) if full else (1000, 10)
    hits = sum(_latent_columns_stationary(seed, n, epochs) for seed in range(100))
    print(f"stationary in {hits}/100 seeds at N={n}, {epochs} epochs")
    assert hits >= 95


@pytest.mark.criterion(5, "z_stnry rejects the unit root in every latent column, >= 95/100 seeds")
def test_stationarity_desk_scale_cli(tmp_path):
    start = time.perf_counter()
    data = write_csv(surrogate_frame(n=3000, d=6, period=12, seed=0), tmp_path / "surrogate.csv")
    assert main(["train-vae", str(data), "--period", "12", "--out", str(tmp_path)]) == 0
    assert main(["stationarize", str(data), "--checkpoint", str(tmp_path / "phase2.ckpt"),
                 "--store", str(tmp_path / "store.bin"), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "adf_stnry.csv").read_text().splitlines()[1:]
    assert len(lines) == 4 and all(line.endswith(",True") for line in lines)
    assert elapsed_since(start) < 600


@pytest.mark.criterion(6, "finite-difference gradient checks, 10 configurations per kind")
def test_gradient_integrity():
    start = time.perf_counter()
    failures = {}
    for name, factory in {**LAYER_CASES, **MODEL_CASES}.items():
        reports = check_configurations(factory, count=10, tolerance=1e-4)
        assert len(reports) == 10
        worst = max(r.max_error for r in reports)
        if worst >= 1e-4:
            failures[name] = worst
    assert not failures
    assert elapsed_since(start) < 120


SWEEP_CONFIG = PredictorConfig(hidden=(16, 16, 8, 8), lookback=12, epochs=30, batch_size=32, learning_rate=3e-3,
                               test_size=200)


@pytest.mark.criterion(7, "RMSE(gamma=1) < RMSE(gamma=0) and RMSE(phi=1) < RMSE(phi=0) by > 1 SE, all kinds")
def test_directional_rmse():
    start = time.perf_counter()
    z, target, _ = latent_trend_seasonal(n=1000, seed=0)
    seasonal = decompose_additive(z, 12).seasonal
    store = build_seasonal_store(lambda rows: rows, seasonal, 12)
    result = run_sweep(stationarize(z, store), target, phi_grid=(0.0, 1.0), gamma_grid=(0.0, 1.0), kinds=KINDS,
                       seeds=range(5), config=SWEEP_CONFIG)
    for kind in KINDS:
        full = result.mean(kind, 1.0, 1.0)
        for drop in [(1.0, 0.0), (0.0, 1.0)]:
            se = np.hypot(result.stderr(kind, 1.0, 1.0), result.stderr(kind, *drop))
            margin = result.mean(kind, *drop) - full
            print(f"{kind} phi,gamma={drop}: margin {margin:.4f}, se {se:.4f}")
            assert margin > se, (kind, drop)
    assert elapsed_since(start) < 900


@pytest.mark.criterion(8, "bit-identical checkpoints, stores and sweep CSVs; exact round trips")
def test_determinism_and_serialization(tmp_path):
    data = write_csv(surrogate_frame(n=400, seed=1), tmp_path / "s.csv")
    runs = [tmp_path / "a", tmp_path / "b"]
    for out in runs:
        assert main(["train-vae", str(data), "--period", "12", "--seed", "9", "--epochs", "3",
                     "--out", str(out)]) == 0
        assert main(["sweep", str(data), "--checkpoint", str(out / "phase2.ckpt"), "--store",
                     str(out / "store.bin"), "--target", "x1", "--kinds", "DNN", "LSTM", "--seeds", "0", "1",
                     "--pred-epochs", "2", "--lookback", "5", "--test-size", "50", "--out", str(out)]) == 0
    for name in ("phase1.ckpt", "store.bin", "phase2.ckpt", "sweep.csv"):
        assert (runs[0] / name).read_bytes() == (runs[1] / name).read_bytes(), name

    model, meta = load_checkpoint(runs[0] / "phase2.ckpt")
    meta = {k: v for k, v in meta.items() if k not in ("config", "layers", "padded_length", "seed")}
    resaved = save_checkpoint(model, tmp_path / "again.ckpt", meta)
    assert resaved.read_bytes() == (runs[0] / "phase2.ckpt").read_bytes()
    store = SeasonalStore.load(runs[0] / "store.bin")
    assert store.save(tmp_path / "again.bin").read_bytes() == (runs[0] / "store.bin").read_bytes()
