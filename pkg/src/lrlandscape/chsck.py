"""Two-time integrator for the mean-field dynamics of spherical p-spin models.

Solves the closed equations for the correlation ``C(t, t')``, the response
``R(t, t')``, the overlap ``m(t)`` and the spherical multiplier ``z(t)`` of
Langevin dynamics run with a learning-rate schedule, for the potential

    Q(x) = x**p / (p * deltap) + x**2 / (2 * delta2)

(pure p-spin: ``deltap = 1``, no matrix channel).  The grid is uniform,
``t_i = i * dt``; the outer loop advances ``t1`` by forward Euler and every
memory integral is a trapezoidal sum over the causal range.

Response normalisation: ``R(t+, t) = 1``.  Together with the ``eta(t'')``
factor inside every memory integral this makes a constant-rate run at
``(eta, T)`` identical to a unit-rate run at temperature ``eta * T`` on the
clock ``eta * t``.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from .schedules import Schedule, eta_at
from .trajectory import Trajectory

CHSCK_COLUMNS = ("t", "eta", "loss", "loss2", "lossp", "m", "z")
GRID_MAGIC = b"CHSCKGRD"
INSTABILITY_BOUND = 1.5
IDENTITY_TOL = 1e-6


class IntegrationError(RuntimeError):
    def __init__(self, msg: str, index: int):
        super().__init__(f"{msg} at grid index {index}")
        self.index = index


@dataclass(frozen=True)
class Potential:
    p: int = 3
    delta2: float = math.inf
    deltap: float = 1.0

    def __post_init__(self):
        if self.p < 3:
            raise ValueError(f"p must be >= 3, got {self.p}")
        if not self.delta2 > 0 or not self.deltap > 0:
            raise ValueError("noise variances must be > 0")

    @classmethod
    def pure(cls, p: int) -> "Potential":
        return cls(p=p)

    @classmethod
    def spiked(cls, p: int, delta2: float, deltap: float) -> "Potential":
        return cls(p=p, delta2=delta2, deltap=deltap)

    @property
    def is_pure(self) -> bool:
        return math.isinf(self.delta2) and self.deltap == 1.0

    @property
    def has_matrix(self) -> bool:
        return not math.isinf(self.delta2)

    # channel k in {2, p}
    def _coef(self, k: int) -> float:
        if k == 2:
            return 0.0 if math.isinf(self.delta2) else 1.0 / self.delta2
        if k == self.p:
            return 1.0 / self.deltap
        raise ValueError(f"no channel of order {k}")

    def q_k(self, k, x):
        return self._coef(k) * np.asarray(x) ** k / k

    def dq_k(self, k, x):
        return self._coef(k) * np.asarray(x) ** (k - 1)

    def d2q_k(self, k, x):
        return self._coef(k) * (k - 1) * np.asarray(x) ** (k - 2)

    def q(self, x):
        return self.q_k(2, x) + self.q_k(self.p, x)

    def dq(self, x):
        return self.dq_k(2, x) + self.dq_k(self.p, x)

    def d2q(self, x):
        return self.d2q_k(2, x) + self.d2q_k(self.p, x)

    def to_dict(self) -> dict:
        return {"p": self.p, "delta2": self.delta2, "deltap": self.deltap}


@dataclass
class ChsckConfig:
    potential: Potential
    T: float = 1.0
    schedule: Schedule = field(default_factory=lambda: Schedule.constant(1.0))
    dt: float = 1e-2
    n_steps: int = 1000
    m0: Optional[float] = None
    record_stride: int = 10
    memory_budget: int = 1 << 30  # bytes for the two square grids

    def __post_init__(self):
        if self.m0 is None:
            self.m0 = 0.0 if self.potential.is_pure else 1e-10
        if self.m0 < 0:
            raise ValueError(f"m0 must be >= 0, got {self.m0}")
        if self.T < 0:
            raise ValueError(f"temperature must be >= 0, got {self.T}")
        if not self.dt > 0 or self.n_steps < 1 or self.record_stride < 1:
            raise ValueError("need dt > 0, n_steps >= 1, record_stride >= 1")
        need = 2 * 8 * (self.n_steps + 1) ** 2
        if need > self.memory_budget:
            raise ValueError(f"grid needs {need / 2**20:.0f} MiB, budget is "
                             f"{self.memory_budget / 2**20:.0f} MiB")


@dataclass
class TwoTimeGrid:
    """``C`` is stored as a full symmetric array, ``R`` as lower-triangular
    (``R[i, j] = 0`` for ``j > i``, ``R[i, i] = 1`` by the equal-time limit)."""

    dt: float
    C: np.ndarray
    R: np.ndarray
    m: np.ndarray
    z: np.ndarray

    @property
    def n(self) -> int:
        return self.m.size

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n)

    def write(self, path) -> None:
        """Binary dump: 32-byte header then the lower triangles of C and R,
        row-major, little-endian float64."""
        idx = np.tril_indices(self.n)
        with open(path, "wb") as fh:
            fh.write(struct.pack("<8sQdQ", GRID_MAGIC, self.n, self.dt, 2))
            fh.write(self.C[idx].astype("<f8").tobytes())
            fh.write(self.R[idx].astype("<f8").tobytes())

    @staticmethod
    def read(path) -> Tuple[float, np.ndarray, np.ndarray]:
        """Return ``(dt, C, R)`` with the full square arrays rebuilt."""
        with open(path, "rb") as fh:
            magic, n, dt, _ = struct.unpack("<8sQdQ", fh.read(32))
            if magic != GRID_MAGIC:
                raise ValueError("not a two-time grid file")
            size = n * (n + 1) // 2
            lower_c = np.frombuffer(fh.read(8 * size), dtype="<f8")
            lower_r = np.frombuffer(fh.read(8 * size), dtype="<f8")
        idx = np.tril_indices(n)
        c = np.zeros((n, n))
        r = np.zeros((n, n))
        c[idx] = lower_c
        c.T[idx] = lower_c
        r[idx] = lower_r
        return dt, c, r


def _trapezoid_weights(i: int, dt: float) -> np.ndarray:
    w = np.full(i + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    if i == 0:
        w[0] = 0.0
    return w


def _channel_integral(pot: Potential, k: int, m: float, c_row, w_eta_r) -> float:
    """``S_k = Q_k'(m) m + int eta R [Q_k'(C) + Q_k''(C) C]``."""
    return float(pot.dq_k(k, m) * m + w_eta_r @ (pot.dq_k(k, c_row) + pot.d2q_k(k, c_row) * c_row))


def loss_from_z(z: float, eta: float, T: float, potential: Potential,
                channel_integrals: Optional[Tuple[float, float]] = None):
    """Split the loss from the multiplier.

    Pure model: ``loss = -(z - T eta) / p`` and ``loss2`` is NaN.  With a
    matrix channel, ``channel_integrals = (S_2, S_p)`` gives
    ``loss_k = -S_k / k`` and ``z - T eta = S_2 + S_p`` is checked.
    """
    p = potential.p
    if channel_integrals is None:
        if potential.has_matrix:
            raise ValueError("spiked potential needs channel integrals")
        return -(z - T * eta) / p, math.nan, -(z - T * eta) / p
    s2, sp = channel_integrals
    resid = z - T * eta - s2 - sp
    if abs(resid) > IDENTITY_TOL * max(1.0, abs(z)):
        raise IntegrationError(f"multiplier identity violated by {resid:.3e}", -1)
    l2 = -s2 / 2.0
    lp = -sp / p
    return l2 + lp, l2, lp


def integrate(cfg: ChsckConfig) -> Tuple[TwoTimeGrid, Trajectory]:
    pot = cfg.potential
    n = cfg.n_steps + 1
    dt = cfg.dt
    T = cfg.T
    eta = np.asarray(eta_at(cfg.schedule, dt * np.arange(n)), dtype=float)
    C = np.zeros((n, n))
    R = np.zeros((n, n))
    m = np.zeros(n)
    z = np.zeros(n)
    C[0, 0] = 1.0
    R[0, 0] = 1.0
    m[0] = cfg.m0
    spiked = pot.has_matrix or cfg.m0 > 0
    traj = Trajectory(CHSCK_COLUMNS)

    for i in range(n):
        c_row = C[i, : i + 1]
        r_row = R[i, : i + 1]
        e = eta[: i + 1]
        w = _trapezoid_weights(i, dt)
        w_eta_r = w * e * r_row
        s2 = _channel_integral(pot, 2, m[i], c_row, w_eta_r)
        sp = _channel_integral(pot, pot.p, m[i], c_row, w_eta_r)
        z[i] = T * eta[i] + s2 + sp

        if i % cfg.record_stride == 0 or i == n - 1:
            if spiked:
                loss, l2, lp = loss_from_z(z[i], eta[i], T, pot, (s2, sp))
            else:
                loss, l2, lp = loss_from_z(z[i], eta[i], T, pot)
            traj.append(i * dt, eta[i], loss, l2, lp, m[i], z[i])
        if i == n - 1:
            break

        # self-energy kernel eta(s) R(t_i, s) Q''(C(t_i, s))
        a = e * r_row * pot.d2q(c_row)
        b = e * pot.dq(c_row)
        c_block = C[: i + 1, : i + 1]
        r_block = R[: i + 1, : i + 1]
        diag_r = np.diagonal(r_block)
        i1 = (w * a) @ c_block
        i3 = dt * (a @ r_block) - 0.5 * dt * (a * diag_r + a[i] * r_row)
        v = dt * (r_block @ b)
        i2 = v - 0.5 * dt * (r_block[:, 0] * b[0] + diag_r * b)
        i4 = float((w * a) @ m[: i + 1])

        step = dt * eta[i]
        dqm = float(pot.dq(m[i]))
        new_c = c_row + step * (-z[i] * c_row + dqm * m[: i + 1] + i1 + i2)
        new_r = r_row + step * (-z[i] * r_row + i3)
        new_m = m[i] + step * (-z[i] * m[i] + dqm + i4)
        if not (np.all(np.isfinite(new_c)) and np.all(np.isfinite(new_r)) and math.isfinite(new_m)):
            raise IntegrationError("non-finite value", i + 1)
        if np.abs(new_c).max() > INSTABILITY_BOUND:
            raise IntegrationError(f"|C| exceeded {INSTABILITY_BOUND}", i + 1)
        C[i + 1, : i + 1] = new_c
        C[: i + 1, i + 1] = new_c
        C[i + 1, i + 1] = 1.0
        R[i + 1, : i + 1] = new_r
        R[i + 1, i + 1] = 1.0
        m[i + 1] = new_m

    return TwoTimeGrid(dt=dt, C=C, R=R, m=m, z=z), traj


def threshold_loss(p: int) -> float:
    """Zero-temperature threshold loss ``-sqrt(4 (p-1)) / p``."""
    return -math.sqrt(4.0 * (p - 1)) / p


def threshold_loss_at_temperature(p: int, T: float) -> float:
    """Low-temperature expansion ``threshold_loss(p) + (p-2) T / p``."""
    return threshold_loss(p) + (p - 2) * T / p


def dynamical_temperature(p: int) -> float:
    """Temperature above which the pure model relaxes to the paramagnet,
    ``max_q sqrt(q^(p-2) (1-q))`` (for ``Q = x^p / p``)."""
    q = (p - 2) / (p - 1)
    return math.sqrt(q ** (p - 2) * (1.0 - q))


def threshold_overlap(p: int, T: float) -> float:
    """Root ``q >= (p-2)/(p-1)`` of the marginality condition ``(p-1) q^(p-2) (1-q)^2 = T^2``.

    Raises above the dynamical temperature, where no threshold exists.
    """
    if T == 0:
        return 1.0
    if T > dynamical_temperature(p) * (1 + 1e-12):
        raise ValueError(f"T={T} is above the dynamical temperature of p={p}")
    f = lambda q: (p - 1) * q ** (p - 2) * (1.0 - q) ** 2 - T ** 2
    q_d = (p - 2) / (p - 1)
    if f(q_d) <= 0:
        return q_d
    return brentq(f, q_d, 1.0, xtol=1e-15)


def paramagnetic_loss(p: int, T: float) -> float:
    """Equilibrium loss ``-1 / (p T)`` of the pure model above the dynamical temperature."""
    if not T > 0:
        raise ValueError("T must be > 0")
    return -1.0 / (p * T)


def channel_threshold_loss(k: int, delta_k: float, q: float, T: float) -> float:
    """Per-channel threshold loss at unit rate,
    ``(T - sqrt(Q_k''(q)) - (Q_k'(1) - Q_k'(q)) / T) / k`` with ``Q_k = x^k/(k delta_k)``."""
    d2 = (k - 1) * q ** (k - 2) / delta_k
    d1 = (1.0 - q ** (k - 1)) / delta_k
    return (T - math.sqrt(d2) - d1 / T) / k


def threshold_loss_exact(p: int, T: float) -> float:
    """Threshold loss of the pure model at unit rate and temperature ``T``."""
    if T == 0:
        return threshold_loss(p)
    return channel_threshold_loss(p, 1.0, threshold_overlap(p, T), T)


def optimal_beta(gamma: float) -> float:
    """Decay exponent balancing ``t^-beta`` against ``t^-gamma(1-beta)``."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")
    return gamma / (1.0 + gamma)
