"""Langevin dynamics on the sphere for the (planted) spherical SK model.

The state is kept in the eigenbasis of the coupling operator, where the drift
is diagonal.  One Euler-Maruyama step is followed by an exact projection back
onto ``|c|^2 = n``; that projection plays the role of the Lagrange multiplier
``z(t)``, which is then reported through the Ito identity
``z = eta T - 2 loss``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .landscapes import EigenSystem, SKInstance, SpikedInstance, eigendecompose
from .schedules import Schedule, eta_at
from .trajectory import Trajectory

SK_COLUMNS = ("t", "eta", "loss", "m_top", "m_signal", "z")
STABILITY_BOUND = 0.5
NOISE_BLOCK = 256


class DivergenceError(RuntimeError):
    """Raised when a trajectory produces non-finite values."""


@dataclass
class Landscape:
    """Eigen-data of an instance needed by the dynamics (computed once)."""

    mu: np.ndarray
    vectors: np.ndarray
    signal_coords: Optional[np.ndarray] = None

    @classmethod
    def from_instance(cls, instance: Union[SKInstance, SpikedInstance],
                      eig: Optional[EigenSystem] = None) -> "Landscape":
        if eig is None:
            eig = eigendecompose(instance.matrix)
        signal = None
        if isinstance(instance, SpikedInstance):
            signal = eig.eigenvectors.T @ instance.signal
        return cls(mu=eig.eigenvalues, vectors=eig.eigenvectors, signal_coords=signal)

    @property
    def n(self) -> int:
        return self.mu.size

    @property
    def ground_state(self) -> float:
        return -float(self.mu[-1]) / 2.0


@dataclass
class SKRunConfig:
    instance: Union[SKInstance, SpikedInstance, None]
    T: float = 1.0
    schedule: Schedule = field(default_factory=lambda: Schedule.constant(0.1))
    dt: float = 1e-2
    t_max: float = 100.0
    record_stride: int = 100
    seed: int = 0
    # optional time-dependent temperature T(t); overrides T when given
    temperature: Optional[Callable[[np.ndarray], np.ndarray]] = None
    landscape: Optional[Landscape] = None

    def __post_init__(self):
        if self.T < 0:
            raise ValueError(f"temperature must be >= 0, got {self.T}")
        if not self.dt > 0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.t_max > 0:
            raise ValueError(f"t_max must be > 0, got {self.t_max}")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if self.landscape is None:
            if self.instance is None:
                raise ValueError("need an instance or a precomputed landscape")
            self.landscape = Landscape.from_instance(self.instance)
        eta_max = float(eta_at(self.schedule, 0.0))
        stiff = self.dt * eta_max * float(np.abs(self.landscape.mu).max())
        if stiff >= STABILITY_BOUND:
            raise ValueError(f"unstable step: dt*eta*max|mu| = {stiff:.3g} >= {STABILITY_BOUND}")

    @property
    def n(self) -> int:
        return self.landscape.n

    @property
    def n_steps(self) -> int:
        return int(round(self.t_max / self.dt))


@dataclass
class SpinState:
    coeffs: np.ndarray
    t: float
    rng: np.random.Generator


def _noise_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(7,)))


def init_random(cfg: SKRunConfig) -> SpinState:
    rng = _noise_rng(cfg.seed)
    c = rng.standard_normal(cfg.n)
    c *= math.sqrt(cfg.n) / np.linalg.norm(c)
    return SpinState(coeffs=c, t=0.0, rng=rng)


def _temperature_at(cfg: SKRunConfig, t):
    return cfg.temperature(t) if cfg.temperature is not None else cfg.T


def step(state: SpinState, cfg: SKRunConfig, noise: Optional[np.ndarray] = None) -> SpinState:
    """One Euler-Maruyama step followed by projection onto the sphere."""
    c = state.coeffs
    n = c.size
    eta = eta_at(cfg.schedule, state.t)
    temp = _temperature_at(cfg, state.t)
    if noise is None:
        noise = state.rng.standard_normal(n)
    new = c + cfg.dt * eta * cfg.landscape.mu * c + eta * math.sqrt(2.0 * temp * cfg.dt) * noise
    norm2 = new @ new
    if not np.isfinite(norm2) or norm2 == 0.0:
        raise DivergenceError(f"non-finite state at t={state.t:.6g}")
    new *= math.sqrt(n / norm2)
    return SpinState(coeffs=new, t=state.t + cfg.dt, rng=state.rng)


def observables(c: np.ndarray, land: Landscape, eta: float, temp: float):
    """Return (loss, m_top, m_signal, z) for eigenbasis coefficients ``c``."""
    n = c.shape[-1]
    loss = -float(land.mu @ (c * c)) / (2.0 * n)
    m_top = float(c[-1]) / math.sqrt(n)
    m_sig = float(c @ land.signal_coords) / n if land.signal_coords is not None else math.nan
    z = eta * temp - 2.0 * loss
    return loss, m_top, m_sig, z


def run(cfg: SKRunConfig, state: Optional[SpinState] = None) -> Trajectory:
    """Integrate to ``cfg.t_max``, recording every ``record_stride`` steps."""
    if state is None:
        state = init_random(cfg)
    land = cfg.landscape
    n = land.n
    mu = land.mu
    c = state.coeffs.copy()
    rng = state.rng
    n_steps = cfg.n_steps
    times = state.t + cfg.dt * np.arange(n_steps + 1)
    etas = np.asarray(eta_at(cfg.schedule, times), dtype=float)
    temps = np.broadcast_to(np.asarray(_temperature_at(cfg, times), dtype=float), times.shape)
    drift = cfg.dt * etas
    kicks = etas * np.sqrt(2.0 * temps * cfg.dt)
    sqrt_n = math.sqrt(n)

    traj = Trajectory(SK_COLUMNS)
    traj.append(times[0], etas[0], *observables(c, land, etas[0], temps[0]))
    block = np.empty((0, n))
    for k in range(n_steps):
        j = k % NOISE_BLOCK
        if j == 0:
            block = rng.standard_normal((min(NOISE_BLOCK, n_steps - k), n))
        c += drift[k] * mu * c
        if kicks[k] != 0.0:
            c += kicks[k] * block[j]
        norm = math.sqrt(c @ c)
        if not math.isfinite(norm) or norm == 0.0:
            raise DivergenceError(f"non-finite state at step {k} (t={times[k]:.6g})")
        c *= sqrt_n / norm
        if (k + 1) % cfg.record_stride == 0:
            traj.append(times[k + 1], etas[k + 1], *observables(c, land, etas[k + 1], temps[k + 1]))
    state.coeffs = c
    state.t = float(times[-1])
    return traj


def run_direct(cfg: SKRunConfig, x0: np.ndarray, matrix: np.ndarray, noise_seed: int = 0) -> np.ndarray:
    """Same dynamics in the site basis (for cross-checks at small n).

    Returns the final configuration ``x``; intended for ``n <= 200``.
    """
    x = np.array(x0, dtype=float)
    n = x.size
    rng = np.random.default_rng(noise_seed)
    t = 0.0
    for _ in range(cfg.n_steps):
        eta = eta_at(cfg.schedule, t)
        temp = _temperature_at(cfg, t)
        x = x + cfg.dt * eta * (matrix @ x)
        if temp > 0:
            x += eta * math.sqrt(2.0 * temp * cfg.dt) * rng.standard_normal(n)
        x *= math.sqrt(n / (x @ x))
        t += cfg.dt
    return x


def crossover_time(n: int, eta0: float, kappa: float, beta: float) -> float:
    """Time at which the signal mode takes over: ``(log n / (2 eta0 kappa))**(1/(1-beta))``."""
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"need 0 <= beta < 1, got {beta}")
    if not kappa > 0 or not eta0 > 0:
        raise ValueError("kappa and eta0 must be > 0")
    return (math.log(n) / (2.0 * eta0 * kappa)) ** (1.0 / (1.0 - beta))


def theoretical_sk_decay(t, beta: float, eta0: float, T: float):
    """Large-n excess loss ``loss - loss_GS`` for ``eta = eta0 / t**beta``."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 1.0):
        raise ValueError("formula holds for t > 1")
    noise = eta0 * T / (2.0 * t ** beta)
    if beta < 1.0:
        out = noise + 3.0 * (1.0 - beta) / (8.0 * eta0 * t ** (1.0 - beta))
    else:
        out = noise + 3.0 / (8.0 * eta0 * np.log(t))
    return float(out) if out.ndim == 0 else out


def convex_reference_run(kappa: float, T: float, schedule: Schedule, dt: float, t_max: float,
                         seed: int = 0, x0: float = 1.0, n_paths: int = 2000,
                         record_stride: int = 10) -> Trajectory:
    """Ensemble of 1-D Euler-Maruyama paths in ``L = kappa x^2 / 2``.

    Records the ensemble-mean loss; columns ``t, eta, loss``.
    """
    if not kappa > 0:
        raise ValueError(f"kappa must be > 0, got {kappa}")
    rng = np.random.default_rng(seed)
    n_steps = int(round(t_max / dt))
    times = dt * np.arange(n_steps + 1)
    etas = np.asarray(eta_at(schedule, times), dtype=float)
    x = np.full(n_paths, float(x0))
    traj = Trajectory(("t", "eta", "loss"))
    traj.append(0.0, etas[0], 0.5 * kappa * float(np.mean(x * x)))
    amp = math.sqrt(2.0 * T * dt)
    for k in range(n_steps):
        x -= dt * etas[k] * kappa * x
        if T > 0:
            x += etas[k] * amp * rng.standard_normal(n_paths)
        if (k + 1) % record_stride == 0:
            traj.append(times[k + 1], etas[k + 1], 0.5 * kappa * float(np.mean(x * x)))
    return traj


def run_many(cfgs: Sequence[SKRunConfig]) -> list:
    """Run independent configurations sequentially (order-preserving)."""
    return [run(c) for c in cfgs]
