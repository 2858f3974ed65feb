"""Replica-symmetric saddle points of the spiked matrix-tensor model.

Two temperature regimes are solved: the Bayes-optimal point T = 1, where the
replica overlap equals the signal overlap, and the T -> 0 limit with
``q = 1 - chi T``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .chsck import Potential

RESIDUAL_TOL = 1e-10
MAX_ITER = 100_000
DAMPING = 0.5
SCAN_STEP = 1e-4
STALL_CHECK = 100


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class RSSolution:
    m: float
    q: float
    chi: float
    loss_gs: float
    regime: str  # "T1" or "T0"
    residual: float

    def to_dict(self) -> dict:
        return {"m": self.m, "q": self.q, "chi": self.chi, "loss_gs": self.loss_gs,
                "regime": self.regime, "residual": self.residual}


@dataclass(frozen=True)
class Boundary:
    delta2_star: float
    in_unit_interval: bool


def _damped_iteration(update: Callable[[float], float], x0: float) -> Optional[float]:
    """Damped fixed-point iteration; ``None`` if it leaves [0, 1] or stops contracting."""
    x = x0
    ref = math.inf
    for k in range(MAX_ITER):
        new = (1.0 - DAMPING) * x + DAMPING * update(x)
        if not math.isfinite(new) or not 0.0 <= new <= 1.0:
            return None
        move = abs(new - x)
        if move < 1e-14:
            return new
        if k % STALL_CHECK == 0:
            # a contracting map shrinks the step many times over in STALL_CHECK iterations
            if move > 0.5 * ref:
                return None
            ref = move
        x = new
    return None


def _largest_root(g: Callable[[float], float], lo: float = 0.0, hi: float = 1.0) -> Optional[float]:
    """Largest root of ``g`` in (lo, hi] located by a uniform scan, refined by brentq."""
    grid = np.linspace(lo, hi, int(round((hi - lo) / SCAN_STEP)) + 1)[1:]
    vals = np.asarray(g(grid), dtype=float)
    exact = np.flatnonzero(vals == 0.0)
    change = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)
    cands = []
    if change.size:
        k = change[-1]
        cands.append(brentq(g, grid[k], grid[k + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
    if exact.size:
        cands.append(float(grid[exact[-1]]))
    return max(cands) if cands else None


def nishimori_solution(potential: Potential) -> RSSolution:
    """Fixed point of ``m = (1 - m) Q'(m)`` and the loss ``-Q(1)``."""
    dq = potential.dq
    g = lambda m: m - (1.0 - m) * dq(m)
    m = _damped_iteration(lambda x: (1.0 - x) * float(dq(x)), 0.5)
    if m is None or m < SCAN_STEP or abs(g(m)) > RESIDUAL_TOL:
        # the iteration often oscillates around the informative root
        m = _largest_root(g)
    if m is None:
        m = 0.0
    res = abs(float(g(m)))
    if res > RESIDUAL_TOL:
        raise ConvergenceError(f"Nishimori fixed point residual {res:.3e}")
    return RSSolution(m=m, q=m, chi=math.nan, loss_gs=-float(potential.q(1.0)),
                      regime="T1", residual=res)


def _chi(potential: Potential, m: float) -> float:
    rad = (1.0 - m * m) / float(potential.dq(1.0))
    if rad < 0:
        raise ValueError(f"negative radicand for m={m}")
    return math.sqrt(rad)


def zero_temperature_solution(potential: Potential) -> RSSolution:
    """Solve ``chi = sqrt((1-m^2)/Q'(1))``, ``m = chi Q'(m)``; loss ``-Q(m) - chi Q'(1)``."""
    dq1 = float(potential.dq(1.0))
    if not dq1 > 0:
        raise ValueError("Q'(1) must be > 0")
    h = lambda m: m - np.sqrt(np.maximum(1.0 - m * m, 0.0) / dq1) * potential.dq(m)
    m = _damped_iteration(lambda x: min(1.0, _chi(potential, x) * float(potential.dq(x))), 0.5)
    if m is None or m < SCAN_STEP or abs(h(m)) > RESIDUAL_TOL:
        m = _largest_root(h, 0.0, 1.0 - 1e-12)
    if m is None:
        m = 0.0
    chi = _chi(potential, m)
    res = abs(float(h(m)))
    if res > RESIDUAL_TOL:
        raise ConvergenceError(f"zero-temperature fixed point residual {res:.3e}")
    loss = -float(potential.q(m)) - chi * dq1
    return RSSolution(m=m, q=1.0, chi=chi, loss_gs=loss, regime="T0", residual=res)


def langevin_easy_boundary(deltap: float, p: int) -> Boundary:
    """Critical matrix noise below which Langevin dynamics recovers the signal."""
    if not deltap > 0:
        raise ValueError("deltap must be > 0")
    if p < 3:
        raise ValueError("p must be >= 3")
    if p == 3:
        val = math.sqrt(deltap / 2.0)
        inside = 0.0 < val < 1.0
        if not inside:
            warnings.warn(f"boundary {val:.4g} lies outside (0, 1)", RuntimeWarning)
        return Boundary(val, inside)
    f = lambda d: d - math.sqrt(deltap / ((p - 1) * (1.0 - d) ** (p - 3)))
    grid = np.linspace(0.0, 1.0, 10_001)[:-1]
    vals = np.array([f(d) for d in grid])
    change = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)
    if change.size == 0:
        warnings.warn(f"no root in (0, 1) for p={p}, deltap={deltap}", RuntimeWarning)
        return Boundary(math.nan, False)
    k = change[0]
    return Boundary(brentq(f, grid[k], grid[k + 1], xtol=1e-15), True)


def loss_rs(m: float, q: float, beta: float, potential: Potential) -> float:
    """Replica-symmetric loss ``-beta (Q(1) - Q(q)) - Q(m)`` (negative at solutions)."""
    if not (0.0 <= q <= 1.0 and 0.0 <= m <= 1.0):
        raise ValueError("m and q must lie in [0, 1]")
    return -beta * float(potential.q(1.0) - potential.q(q)) - float(potential.q(m))


def summary_table(p: int, delta2: float, deltap: float) -> list:
    """Rows ``(quantity, value)`` for the statics subcommand."""
    pot = Potential.spiked(p, delta2, deltap)
    t1 = nishimori_solution(pot)
    t0 = zero_temperature_solution(pot)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        b = langevin_easy_boundary(deltap, p)
    return [
        ("m_T1", t1.m), ("loss_gs_T1", t1.loss_gs),
        ("m_T0", t0.m), ("chi_T0", t0.chi), ("loss_gs_T0", t0.loss_gs),
        ("delta2_star", b.delta2_star), ("delta2_star_in_unit_interval", float(b.in_unit_interval)),
        ("langevin_easy", float(delta2 < b.delta2_star) if math.isfinite(b.delta2_star) else math.nan),
    ]
