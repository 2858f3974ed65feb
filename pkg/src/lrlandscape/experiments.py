"""One function per experiment kind.  Each runs a single (parameters, seed)
point, writes its trajectory into ``outdir`` and returns a JSON-ready record."""
from __future__ import annotations

import math
import warnings
from pathlib import Path

import numpy as np

from . import analysis, chsck, landscapes, langevin, statics, teacher_student
from .config import (BLOCKS, ConvexParams, PlantedParams, PspinParams, SKParams, SMTParams,
                     StaticsParams, TSParams)
from .schedules import Schedule

NUMERICAL_ERRORS = (langevin.DivergenceError, chsck.IntegrationError,
                    teacher_student.TrainingDivergence, statics.ConvergenceError,
                    FloatingPointError, np.linalg.LinAlgError)
PARAM_MODELS = {"convex": ConvexParams, "sk": SKParams, "sk-planted": PlantedParams,
                "chsck-pspin": PspinParams, "chsck-smt": SMTParams, "statics": StaticsParams,
                "teacher-student": TSParams}
DETERMINISTIC = ("chsck-pspin", "chsck-smt", "statics")
JUMP_LEVEL = 0.3


def _safe_fit(times, values, offset, window):
    try:
        return analysis.fit_power_law(times, values, offset, window).to_dict()
    except ValueError as exc:
        return {"error": str(exc)}


def _decay_theory(s: Schedule, kappa: float) -> float:
    if s.kind == "constant" or s.beta == 0:
        return 0.0
    if s.beta == 1.0:
        return min(1.0, 2.0 * s.eta0 * kappa)
    return s.beta


def run_convex(p: ConvexParams, seed: int, outdir: Path, tag: str) -> dict:
    s = p.schedule.build()
    tr = langevin.convex_reference_run(p.kappa, p.T, s, p.dt, p.t_max, seed=seed, x0=p.x0,
                                       n_paths=p.n_paths, record_stride=p.record_stride)
    name = f"traj{tag}_seed{seed}.csv"
    tr.to_csv(outdir / name)
    t, loss = tr.t[1:], tr["loss"][1:]
    return {"files": [name], "final_loss": tr.last("loss"),
            "fit": _safe_fit(t, loss, 0.0, p.fit_window),
            "theory_exponent": _decay_theory(s, p.kappa)}


def _sk_common(p: SKParams, inst, seed: int, outdir: Path, tag: str):
    s = p.schedule.build()
    land = langevin.Landscape.from_instance(inst)
    cfg = langevin.SKRunConfig(inst, T=p.T, schedule=s, dt=p.dt, t_max=p.t_max,
                               record_stride=p.record_stride, seed=seed, landscape=land)
    tr = langevin.run(cfg)
    name = f"traj{tag}_seed{seed}.csv"
    tr.to_csv(outdir / name)
    gs = land.ground_state
    z_end = tr.last("z")
    rec = {"files": [name], "loss_gs": gs, "final_loss": tr.last("loss"), "final_z": z_end,
           "final_m_top": tr.last("m_top"), "mu_max": float(land.mu[-1]),
           "hessian_left_edge": float(z_end - land.mu[-1]),
           "fit": _safe_fit(tr.t[1:], tr["loss"][1:], gs, p.fit_window)}
    if s.kind == "power" and 0 < s.beta and p.t_max > 1:
        rec["theory_excess_at_t_max"] = float(langevin.theoretical_sk_decay(p.t_max, s.beta, s.eta0, p.T))
    return rec, tr, land


def run_sk(p: SKParams, seed: int, outdir: Path, tag: str) -> dict:
    rec, _, _ = _sk_common(p, landscapes.sample_sk(p.n, seed), seed, outdir, tag)
    s = p.schedule.build()
    rec["theory_exponent"] = analysis.theory_exponent_sk(s.beta)
    return rec


def run_planted(p: PlantedParams, seed: int, outdir: Path, tag: str) -> dict:
    inst = landscapes.sample_spiked(p.n, p.delta, seed)
    rec, tr, land = _sk_common(p, inst, seed, outdir, tag)
    s = p.schedule.build()
    gap = float(land.mu[-1] - land.mu[-2])
    kappa_nominal = 1.0 - 2.0 * p.delta
    rec.update({
        "final_m_signal": tr.last("m_signal"),
        "spectral_gap": gap,
        "plateau_time": analysis.detect_plateau(tr.t, tr["loss"], p.plateau_rel_tol, p.plateau_window),
    })
    beta = s.beta if s.kind == "power" else 0.0
    if beta < 1:
        if kappa_nominal > 0:
            rec["t_cross_nominal"] = langevin.crossover_time(p.n, s.eta0, kappa_nominal, beta)
        rec["t_cross_gap"] = langevin.crossover_time(p.n, s.eta0, gap, beta)
    return rec


def _write_chsck(grid, tr, outdir: Path, tag: str, dump: bool) -> list:
    files = [f"traj{tag}.csv"]
    tr.to_csv(outdir / files[0])
    if dump:
        files.append(f"grid{tag}.bin")
        grid.write(outdir / files[1])
    return files


def run_pspin(p: PspinParams, seed: int, outdir: Path, tag: str) -> dict:
    s = p.schedule.build()
    cfg = chsck.ChsckConfig(chsck.Potential.pure(p.p), T=p.T, schedule=s, dt=p.dt, n_steps=p.n_steps,
                            record_stride=p.record_stride,
                            memory_budget=int(p.memory_budget_mb * 2 ** 20))
    grid, tr = chsck.integrate(cfg)
    files = _write_chsck(grid, tr, outdir, tag, p.dump_grid)
    lth = chsck.threshold_loss(p.p)
    rec = {"files": files, "final_loss": tr.last("loss"), "threshold_loss": lth,
           "threshold_loss_at_T": chsck.threshold_loss_at_temperature(p.p, p.T),
           "fit": _safe_fit(tr.t[1:], tr["loss"][1:], lth, p.fit_window),
           "theory_exponent": analysis.theory_exponent_pspin(s.beta, p.gamma),
           "optimal_beta": chsck.optimal_beta(p.gamma)}
    return rec


def run_smt(p: SMTParams, seed: int, outdir: Path, tag: str) -> dict:
    s = p.schedule.build()
    pot = chsck.Potential.spiked(p.p, p.delta2, p.deltap)
    cfg = chsck.ChsckConfig(pot, T=p.T, schedule=s, dt=p.dt, n_steps=p.n_steps, m0=p.m0,
                            record_stride=p.record_stride,
                            memory_budget=int(p.memory_budget_mb * 2 ** 20))
    grid, tr = chsck.integrate(cfg)
    files = _write_chsck(grid, tr, outdir, tag, p.dump_grid)
    above = np.flatnonzero(tr["m"] > JUMP_LEVEL)
    return {"files": files, "final_loss": tr.last("loss"), "final_m": tr.last("m"),
            "jump_time": float(tr.t[above[0]]) if above.size else None,
            "nishimori_m": statics.nishimori_solution(pot).m}


def run_statics(p: StaticsParams, seed: int, outdir: Path, tag: str) -> dict:
    rows = statics.summary_table(p.p, p.delta2, p.deltap)
    name = "statics.csv"
    with open(outdir / name, "w") as fh:
        fh.write("quantity,value\n")
        for q, v in rows:
            fh.write(f"{q},{v!r}\n")
    return {"files": [name], **{q: v for q, v in rows}}


def run_teacher_student(p: TSParams, seed: int, outdir: Path, tag: str) -> dict:
    cfg = teacher_student.TSConfig(N=p.N, P=p.P, M=p.M, K=p.K, B=p.B, schedule=p.schedule.build(),
                                   steps=p.steps, seed=seed, eval_stride=p.eval_stride,
                                   act=p.activation, init_scale=p.init_scale)
    tr = teacher_student.train(cfg)
    name = f"train{tag}_seed{seed}.csv"
    tr.to_csv(outdir / name)
    return {"files": [name], "final_mse": tr.last("mse_train"),
            "plateau_step": analysis.detect_plateau(tr.t, tr["mse_train"], p.plateau_rel_tol,
                                                    p.plateau_window)}


RUNNERS = {"convex": run_convex, "sk": run_sk, "sk-planted": run_planted, "chsck-pspin": run_pspin,
           "chsck-smt": run_smt, "statics": run_statics, "teacher-student": run_teacher_student}


def execute(task: tuple) -> dict:
    """Worker entry point: ``task = (kind, params_dict, seed, outdir, tag, point)``."""
    kind, pdict, seed, outdir, tag, point = task
    params = PARAM_MODELS[kind].model_validate(pdict, strict=False)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            rec = RUNNERS[kind](params, seed, Path(outdir), tag)
            rec["status"] = "ok"
        except NUMERICAL_ERRORS as exc:
            rec = {"files": [], "status": "failed", "error": f"{type(exc).__name__}: {exc}"}
    rec.update({"seed": seed, "point": point})
    return rec


def block_name(kind: str) -> str:
    return BLOCKS[kind]


def exponent_of(rec: dict) -> float:
    fit = rec.get("fit") or {}
    return float(fit.get("exponent", math.nan))
