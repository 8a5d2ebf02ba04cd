"""Command-line entry point: ``lsavae {adf,decompose,train-vae,stationarize,sweep,report}``.

Every command writes its effective configuration as JSON next to its
outputs. Failures print one JSON object (``{"error": ..., "message": ...}``)
on stderr and exit nonzero.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .decompose import decompose_additive
from .ingest import SchemaError, load_csv
from .pipeline import STAGES, RunConfig, fit_pipeline, latent_frame, resolve_period
from .predictors import PredictorConfig, SweepResult, read_sweep_csv, run_sweep
from .series import Frame, ScalerParams, apply_scale
from .stationarizer import LSAConfig, SeasonalStore, array_fingerprint, recombine, stationarize
from .unitroot import adf_test
from .vae import TrainHistory, load_checkpoint, save_checkpoint

ALPHA = 0.05


class UsageError(ValueError):
    pass


# -- helpers -------------------------------------------------------------------
def _load_frame(cfg: RunConfig) -> Frame:
    if not cfg.input:
        raise UsageError("no input file given")
    if not Path(cfg.input).is_file():
        raise UsageError(f"input file not found: {cfg.input}")
    if not Path(cfg.input).read_text(encoding="utf-8-sig", errors="replace").strip():
        raise UsageError(f"input file is empty: {cfg.input}")
    if cfg.schema == "nifty50" and cfg.symbol is None:
        raise UsageError("schema nifty50 needs --symbol (the file holds many stocks)")
    frame = load_csv(cfg.input, None if cfg.schema == "generic" else cfg.schema, cfg.symbol)
    if cfg.columns:
        missing = [c for c in cfg.columns if c not in frame.names]
        if missing:
            raise UsageError(f"unknown column(s) {missing}; available: {', '.join(frame.names)}")
        frame = frame.select(cfg.columns)
    return frame


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_config(out: Path, command: str, cfg: RunConfig, extra: dict | None = None) -> Path:
    payload = {"command": command, "config": cfg.to_dict(), **(extra or {})}
    path = out / f"{command}.config.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def _write_rows(path: Path, header, rows, footer=()):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
        for line in footer:
            fh.write(f"# {line}\n")
    return path


def _sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _adf_rows(frame: Frame):
    rows = []
    for name in frame.names:
        r = adf_test(frame[name].values)
        cv = r.critical_values
        rows.append([name, r.statistic, r.p_value, cv["1%"], cv["5%"], cv["10%"], r.used_lag, r.nobs])
    return rows


ADF_HEADER = ["variable", "statistic", "p_value", "cv_1%", "cv_5%", "cv_10%", "used_lag", "nobs"]


def _adf_markdown(rows, flag: bool = False) -> str:
    head = "| Variable | ADF statistic | p-value | 1% | 5% | 10% | lag |" + (" p < 0.05 |" if flag else "")
    lines = [head, "|---" * (8 if flag else 7) + "|"]
    for name, stat, p, c1, c5, c10, lag, _ in rows:
        line = f"| {name} | {stat:.3f} | {p:.3f} | {c1:.3f} | {c5:.3f} | {c10:.3f} | {lag} |"
        if flag:
            line += " yes |" if p < ALPHA else " NO |"
        lines.append(line)
    return "\n".join(lines)


def _load_model_and_store(checkpoint, store_path):
    model, meta = load_checkpoint(checkpoint)
    store = SeasonalStore.load(store_path)
    recorded = meta.get("store_fingerprint")
    actual = array_fingerprint([store.embeddings])
    if recorded is None:
        raise UsageError(f"{checkpoint} is not a phase-2 checkpoint (no store fingerprint recorded)")
    if recorded != actual or meta.get("phase1_fingerprint", store.fingerprint) != store.fingerprint:
        raise UsageError(f"store {store_path} (fingerprint {actual}) does not belong to checkpoint "
                         f"{checkpoint} (expects {recorded})")
    return model, store, meta


def _encode(model, meta, frame: Frame) -> np.ndarray:
    scaler = ScalerParams.from_dict(meta["scaler"]) if "scaler" in meta else None
    if scaler is not None:
        missing = [c for c in scaler.names if c not in frame.names]
        if missing:
            raise UsageError(f"input lacks column(s) {missing} used to train the checkpoint")
        frame = frame.select(scaler.names)
        return model.encode(apply_scale(frame.values, scaler))
    return model.encode(frame.values)


# -- commands --------------------------------------------------------------------
def cmd_adf(args, cfg: RunConfig) -> int:
    frame = _load_frame(cfg)
    if args.latent:
        model, meta = load_checkpoint(args.latent)
        frame = latent_frame(frame, _encode(model, meta, frame))
    out = _out_dir(cfg)
    rows = _adf_rows(frame)
    _write_rows(out / "adf.csv", ADF_HEADER, rows)
    _write_config(out, "adf", cfg, {"latent": args.latent})
    print(_adf_markdown(rows))
    return 0


def cmd_decompose(args, cfg: RunConfig) -> int:
    frame = _load_frame(cfg)
    if args.column not in frame.names:
        raise UsageError(f"unknown column {args.column!r}; available: {', '.join(frame.names)}")
    x = frame[args.column].values
    period = resolve_period(x[:, None], cfg.period, cfg.period_candidates)
    res = decompose_additive(x, period)
    gap = float(np.max(np.abs(x - (res.trend + res.seasonal + res.residual))))
    out = _out_dir(cfg)
    rows = [[str(d), a, b, c, e] for d, a, b, c, e in zip(frame.index, x, res.trend, res.seasonal, res.residual)]
    _write_rows(out / "decompose.csv", ["Date", "observed", "trend", "seasonal", "residual"], rows,
                footer=[f"period={period}", f"max_abs_identity_error={gap!r}"])
    _write_rows(out / "profile.csv", ["phase", "seasonal"], [[p, v] for p, v in enumerate(res.profile)])
    _write_config(out, "decompose", cfg, {"column": args.column, "resolved_period": period})
    print(f"column={args.column} period={period} max_abs_identity_error={gap:.3e}")
    return 0


def _history_rows(h: TrainHistory):
    return [[r[k] for k in HISTORY_HEADER] for r in h.rows()]


HISTORY_HEADER = ["epoch", "train_loss", "val_loss", "recon", "stnry", "kl"]


def cmd_train_vae(args, cfg: RunConfig) -> int:
    frame = _load_frame(cfg)
    out = _out_dir(cfg)
    fitted = fit_pipeline(frame, cfg)
    store_fp = array_fingerprint([fitted.store.embeddings])
    common = {"columns": frame.names, "scaler": fitted.scaler.to_dict(), "period": fitted.period,
              "diff_order": cfg.diff_order, "master_seed": cfg.master_seed}
    save_checkpoint(fitted.phase1, out / "phase1.ckpt", {**common, "stage": "phase1"})
    fitted.store.save(out / "store.bin")
    save_checkpoint(fitted.phase2, out / "phase2.ckpt",
                    {**common, "stage": "phase2", "store_fingerprint": store_fp,
                     "phase1_fingerprint": fitted.store.fingerprint, "phi": cfg.phi, "gamma": cfg.gamma})
    _write_rows(out / "history.csv", HISTORY_HEADER, _history_rows(fitted.history2))
    _write_rows(out / "history_phase1.csv", HISTORY_HEADER, _history_rows(fitted.history1))
    files = ["phase1.ckpt", "store.bin", "phase2.ckpt", "history.csv", "history_phase1.csv"]
    manifest = {"master_seed": cfg.master_seed, "stage_seeds": fitted.seeds,
                "seed_rule": f"SeedSequence(master_seed, spawn_key=(i,)) word 0 for stages {list(STAGES)}",
                "period": fitted.period, "files": {f: _sha256(out / f) for f in files}}
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    _write_config(out, "train-vae", cfg, {"resolved_period": fitted.period})
    h = fitted.history2
    print(f"period={fitted.period} phase2_loss_first={h.train_loss[0]:.6f} phase2_loss_last={h.train_loss[-1]:.6f}")
    return 0


def _decomposition(args, cfg: RunConfig):
    frame = _load_frame(cfg)
    model, store, meta = _load_model_and_store(args.checkpoint, args.store)
    z = _encode(model, meta, frame)
    return frame, stationarize(z, store, store.period, int(meta.get("diff_order", cfg.diff_order)))


def cmd_stationarize(args, cfg: RunConfig) -> int:
    frame, dec = _decomposition(args, cfg)
    z_str = recombine(dec, LSAConfig(cfg.phi, cfg.gamma))
    cols = {**dec.columns(), "z_str": z_str}
    k = dec.z.shape[1]
    header = ["Date"] + [f"{name}_{j + 1}" for name in cols for j in range(k)]
    rows = [[str(d)] + [float(cols[name][i, j]) for name in cols for j in range(k)]
            for i, d in enumerate(frame.index)]
    out = _out_dir(cfg)
    _write_rows(out / "latent.csv", header, rows)
    stn = latent_frame(frame, dec.z_stnry, "z_stnry_")
    adf_rows = _adf_rows(stn)
    _write_rows(out / "adf_stnry.csv", ADF_HEADER + ["stationary_at_0.05"],
                [r + [bool(r[2] < ALPHA)] for r in adf_rows])
    _write_config(out, "stationarize", cfg, {"checkpoint": args.checkpoint, "store": args.store})
    print(_adf_markdown(adf_rows, flag=True))
    return 0


def cmd_sweep(args, cfg: RunConfig) -> int:
    frame, dec = _decomposition(args, cfg)
    if cfg.target is None:
        raise UsageError("sweep needs --target")
    raw = load_csv(cfg.input, None if cfg.schema == "generic" else cfg.schema, cfg.symbol)
    if cfg.target not in raw.names:
        raise UsageError(f"unknown target {cfg.target!r}; available: {', '.join(raw.names)}")
    pcfg = PredictorConfig(**cfg.predictor)
    seeds = [int(s) for s in cfg.seeds]
    out = _out_dir(cfg)
    result = run_sweep(dec, raw[cfg.target].values, cfg.phi_grid, cfg.gamma_grid, tuple(cfg.kinds), seeds,
                       pcfg, dataset=Path(cfg.input).stem, target_name=cfg.target,
                       csv_path=out / "sweep.csv", jobs=cfg.jobs)
    md = result.to_markdown("rmse_scaled") + "\n" + result.to_markdown("rmse_zscored")
    (out / "sweep.md").write_text(md)
    _write_config(out, "sweep", cfg, {"checkpoint": args.checkpoint, "store": args.store,
                                      "predictor_effective": pcfg.to_dict()})
    print(md)
    return 0


def cmd_report(args, cfg: RunConfig) -> int:
    path = Path(args.sweep_csv)
    if not path.is_file():
        raise UsageError(f"sweep CSV not found: {path}")
    result = SweepResult(read_sweep_csv(path))
    if not result.rows:
        raise UsageError(f"{path} holds no sweep rows")
    md = result.to_markdown(args.column)
    out = Path(cfg.output_dir) if args.output_dir else path.parent
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.md").write_text(md)
    cfg.output_dir = str(out)
    _write_config(out, "report", cfg, {"sweep_csv": str(path), "column": args.column})
    print(md)
    return 0


# -- argument parsing ------------------------------------------------------------
class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p, needs_input=True):
    if needs_input:
        p.add_argument("input", nargs="?", help="CSV file (may instead come from --config)")
    p.add_argument("--config", help="JSON run configuration; explicit flags override it")
    p.add_argument("--schema", help="djia, nifty50 or generic (canonical CSV; the default)")
    p.add_argument("--symbol", help="stock symbol to keep (required for nifty50)")
    p.add_argument("--columns", nargs="+", help="subset of numeric columns to use")
    p.add_argument("--period", help="seasonal period T or 'auto'")
    p.add_argument("--seed", dest="master_seed", type=int, help="master seed")
    p.add_argument("--out", dest="output_dir", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lsavae", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("adf", help="ADF table per column (or per latent column with --latent)")
    _common(p)
    p.add_argument("--latent", help="checkpoint whose encoder maps rows to latents first")

    p = sub.add_parser("decompose", help="additive decomposition of one column")
    _common(p)
    p.add_argument("--column", required=True)

    p = sub.add_parser("train-vae", help="phase 1, seasonal store, phase 2")
    _common(p)
    p.add_argument("--epochs", type=int, help="VAE epochs per phase")
    p.add_argument("--latent-dim", type=int)
    p.add_argument("--diff-order", type=int)
    p.add_argument("--phi", type=float)
    p.add_argument("--gamma", type=float)

    for name, helptext in (("stationarize", "latent decomposition and ADF on z_stnry"),
                           ("sweep", "phi/gamma sweep over the four predictors")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--checkpoint", required=True, help="phase-2 checkpoint")
        p.add_argument("--store", required=True, help="seasonal store file")
        p.add_argument("--phi", type=float)
        p.add_argument("--gamma", type=float)
    p.add_argument("--target", help="column of the input to forecast")
    p.add_argument("--phi-grid", type=float, nargs="+")
    p.add_argument("--gamma-grid", type=float, nargs="+")
    p.add_argument("--kinds", nargs="+")
    p.add_argument("--seeds", type=int, nargs="+")
    p.add_argument("--jobs", type=int)
    p.add_argument("--pred-epochs", type=int)
    p.add_argument("--lookback", type=int)
    p.add_argument("--test-size", type=int)

    p = sub.add_parser("report", help="markdown tables from a sweep CSV")
    p.add_argument("sweep_csv")
    p.add_argument("--column", default="rmse_scaled", choices=["rmse_scaled", "rmse_zscored"])
    p.add_argument("--out", dest="output_dir")
    return parser


_RUN_KEYS = ("input", "schema", "symbol", "columns", "target", "period", "master_seed", "output_dir",
             "diff_order", "phi", "gamma", "phi_grid", "gamma_grid", "kinds", "seeds", "jobs")


def config_from_args(args) -> RunConfig:
    base = RunConfig.load(args.config).to_dict() if getattr(args, "config", None) else RunConfig().to_dict()
    for key in _RUN_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            base[key] = value
    vae = dict(base["vae"])
    if getattr(args, "epochs", None) is not None:
        vae["epochs"] = args.epochs
    if getattr(args, "latent_dim", None) is not None:
        vae["latent_dim"] = args.latent_dim
    base["vae"] = vae
    pred = dict(base["predictor"])
    for flag, key in (("pred_epochs", "epochs"), ("lookback", "lookback"), ("test_size", "test_size")):
        if getattr(args, flag, None) is not None:
            pred[key] = getattr(args, flag)
    base["predictor"] = pred
    return RunConfig.from_dict(base)


COMMANDS = {"adf": cmd_adf, "decompose": cmd_decompose, "train-vae": cmd_train_vae,
            "stationarize": cmd_stationarize, "sweep": cmd_sweep, "report": cmd_report}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = config_from_args(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        code, kind = 2, "usage"
        message = str(exc)
    except (SchemaError, ValueError, OSError, FloatingPointError, np.linalg.LinAlgError) as exc:
        code, kind = 1, type(exc).__name__
        message = str(exc)
    print(json.dumps({"error": kind, "message": " ".join(message.split())}), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
