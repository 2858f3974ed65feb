"""Command line experiment runner.

    lrlandscape run <config.toml>
    lrlandscape sweep <config.toml>
    lrlandscape statics <p> <delta2> <deltap>
    lrlandscape fit <csv> --offset <v> --window <a>:<b> [--column loss]
    lrlandscape spectrum <config.toml>

Exit status: 0 success, 2 invalid config or arguments, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from . import __version__, analysis, landscapes, statics
from .config import ExperimentConfig, load_config, tomllib, with_parameter
from .experiments import DETERMINISTIC, execute, exponent_of
from .trajectory import Trajectory

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
WORKERS_ENV = "LRLANDSCAPE_WORKERS"


class ConfigError(Exception):
    pass


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1")
    return n


def _map(tasks: List[tuple], workers: int) -> List[dict]:
    if workers <= 1 or len(tasks) <= 1:
        return [execute(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(execute, tasks))


def _tag_value(x: float) -> str:
    return f"{x:g}"


def _seeds_for(cfg: ExperimentConfig) -> List[int]:
    return cfg.seeds[:1] if cfg.run_kind in DETERMINISTIC else list(cfg.seeds)


def _run_tag(cfg: ExperimentConfig, params) -> str:
    sched = getattr(params, "schedule", None)
    if cfg.run_kind in ("sk", "sk-planted") and sched is not None:
        return f"_beta{_tag_value(sched.beta)}"
    return ""


def _write_outputs(outdir: Path, cfg: ExperimentConfig, summary: dict, files: List[str]) -> None:
    analysis.write_json(outdir / "summary.json", summary)
    listed = sorted(set(files) | {"summary.json", "manifest.json"})
    manifest = {"config": cfg.model_dump(mode="json", exclude_none=True), "seeds": _seeds_for(cfg),
                "code_version": __version__, "files": listed}
    analysis.write_json(outdir / "manifest.json", manifest)


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> int:
    if cfg.kind == "sweep":
        return run_sweep(cfg, workers)
    outdir = Path(cfg.output)
    outdir.mkdir(parents=True, exist_ok=True)
    params = cfg.params
    tag = _run_tag(cfg, params)
    tasks = [(cfg.run_kind, params.model_dump(), s, str(outdir), tag, None) for s in _seeds_for(cfg)]
    recs = sorted(_map(tasks, workers), key=lambda r: r["seed"])
    files = [f for r in recs for f in r["files"]]
    summary = {"kind": cfg.kind, "runs": recs}
    fits = [r["fit"] for r in recs if "exponent" in (r.get("fit") or {})]
    if fits:
        ex = np.array([f["exponent"] for f in fits])
        summary["exponent_mean"] = float(ex.mean())
        summary["exponent_table"] = [{"seed": r["seed"], "exponent": exponent_of(r)} for r in recs]
    _write_outputs(outdir, cfg, summary, files)
    failed = [r for r in recs if r["status"] != "ok"]
    for r in failed:
        print(f"seed {r['seed']}: {r['error']}", file=sys.stderr)
    return EXIT_NUMERICAL if failed else EXIT_OK


def _theory(cfg: ExperimentConfig, params, value: float) -> float:
    name = cfg.sweep.parameter
    beta = value if name == "beta" else params.schedule.beta
    if cfg.run_kind == "sk":
        return analysis.theory_exponent_sk(beta)
    if cfg.run_kind == "chsck-pspin":
        return analysis.theory_exponent_pspin(beta, params.gamma)
    return math.nan


def run_sweep(cfg: ExperimentConfig, workers: int = 1) -> int:
    if cfg.kind != "sweep":
        raise ConfigError("the sweep subcommand needs kind = 'sweep'")
    outdir = Path(cfg.output)
    outdir.mkdir(parents=True, exist_ok=True)
    name = cfg.sweep.parameter
    tasks, point_params = [], {}
    for value in cfg.sweep.values:
        try:
            params = with_parameter(cfg.params, name, value)
        except ValidationError as exc:
            raise ConfigError(f"sweep value {name}={value}: {exc}") from exc
        point_params[value] = params
        tag = f"_{name}{_tag_value(value)}"
        for s in _seeds_for(cfg):
            tasks.append((cfg.run_kind, params.model_dump(), s, str(outdir), tag, value))
    recs = sorted(_map(tasks, workers), key=lambda r: (r["point"], r["seed"]))
    rows = []
    for value in sorted(point_params):
        group = [r for r in recs if r["point"] == value]
        ok = [r for r in group if r["status"] == "ok"]
        ex = np.array([exponent_of(r) for r in ok])
        ex = ex[np.isfinite(ex)]
        if ex.size > 1:
            mean, err = float(ex.mean()), float(ex.std(ddof=1) / math.sqrt(ex.size))
        elif ex.size == 1:
            mean, err = float(ex[0]), float(ok[0]["fit"]["stderr"])
        else:
            mean, err = math.nan, math.nan
        status = "ok" if len(ok) == len(group) else "failed"
        rows.append({name: value, "exponent": mean, "stderr": err,
                     "theory": _theory(cfg, point_params[value], value),
                     "n_seeds": len(ok), "status": status})
    with open(outdir / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([name, "exponent", "stderr", "theory", "n_seeds", "status"])
        for r in rows:
            w.writerow([repr(float(r[name])), "%.17e" % r["exponent"], "%.17e" % r["stderr"],
                        "%.17e" % r["theory"], r["n_seeds"], r["status"]])
    finite = [r for r in rows if math.isfinite(r["exponent"])]
    summary = {"kind": "sweep", "base": cfg.run_kind, "parameter": name, "points": rows,
               "best": max(finite, key=lambda r: r["exponent"])[name] if finite else None,
               "runs": recs}
    files = [f for r in recs for f in r["files"]] + ["sweep.csv"]
    _write_outputs(outdir, cfg, summary, files)
    failed = [r for r in recs if r["status"] != "ok"]
    for r in failed:
        print(f"{name}={r['point']} seed {r['seed']}: {r['error']}", file=sys.stderr)
    return EXIT_NUMERICAL if failed else EXIT_OK


def run_spectrum(cfg: ExperimentConfig) -> int:
    if cfg.run_kind not in ("sk", "sk-planted"):
        raise ConfigError("spectrum needs an sk or sk-planted config")
    outdir = Path(cfg.output) / "spectrum"
    outdir.mkdir(parents=True, exist_ok=True)
    p = cfg.params
    delta = getattr(p, "delta", None)
    recs, files = [], []
    for s in cfg.seeds:
        eig = landscapes.instance_spectrum(cfg.run_kind, p.n, s, delta)
        name = f"spectrum_seed{s}.csv"
        landscapes.write_spectrum_csv(outdir / name, eig.eigenvalues)
        files.append(name)
        mu = eig.eigenvalues
        rec = {"seed": s, "top": float(mu[-1]), "second": float(mu[-2]),
               "ground_state_loss": landscapes.ground_state_loss(eig)}
        if delta is None:
            rec["ks_semicircle"] = landscapes.spectral_ks_distance(mu)
        else:
            rec["ks_semicircle_bulk"] = landscapes.spectral_ks_distance(mu[:-1] / delta)
            rec["bbp_prediction"] = landscapes.bbp_top_eigenvalue(delta)
            rec["bulk_edge"] = 2.0 * delta
        recs.append(rec)
    summary = {"kind": "spectrum", "instance": cfg.run_kind, "n": p.n,
               "finite_size_gap": landscapes.finite_size_gap(p.n), "runs": recs}
    _write_outputs(outdir, cfg, summary, files)
    return EXIT_OK


def cmd_statics(p: int, d2: float, dp: float) -> int:
    try:
        rows = statics.summary_table(p, d2, dp)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print("quantity,value")
    for q, v in rows:
        print(f"{q},{v!r}")
    return EXIT_OK


def _parse_window(text: Optional[str]):
    if text is None:
        return None
    try:
        a, b = (float(x) for x in text.split(":"))
    except ValueError:
        raise ConfigError(f"window must look like a:b, got {text!r}") from None
    return a, b


def cmd_fit(path: str, offset: float, window: Optional[str], column: str) -> int:
    tr = Trajectory.from_csv(path)
    if column not in tr:
        raise ConfigError(f"column {column!r} not in {tr.columns}")
    t, v = tr.t, tr[column]
    keep = t > 0
    try:
        fit = analysis.fit_power_law(t[keep], v[keep], offset, _parse_window(window))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    print(json.dumps(fit.to_dict(), sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lrlandscape", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("run", "sweep", "spectrum"):
        sp = sub.add_parser(name)
        sp.add_argument("config")
    sp = sub.add_parser("statics")
    sp.add_argument("p", type=int)
    sp.add_argument("delta2", type=float)
    sp.add_argument("deltap", type=float)
    sp = sub.add_parser("fit")
    sp.add_argument("csv")
    sp.add_argument("--offset", type=float, default=0.0)
    sp.add_argument("--window", default=None, help="a:b in time units (default: last decade)")
    sp.add_argument("--column", default="loss")
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if args.command == "statics":
            return cmd_statics(args.p, args.delta2, args.deltap)
        if args.command == "fit":
            return cmd_fit(args.csv, args.offset, args.window, args.column)
        cfg = load_config(args.config)
        if args.command == "spectrum":
            return run_spectrum(cfg)
        if args.command == "sweep":
            return run_sweep(cfg, worker_count())
        return run_experiment(cfg, worker_count())
    except ValidationError as exc:
        for err in exc.errors():
            loc = ".".join(str(x) for x in err["loc"]) or "<root>"
            print(f"config error at {loc}: {err['msg']}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, tomllib.TOMLDecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
