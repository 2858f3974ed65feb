"""Two-layer student trained by SGD on data labelled by a two-layer teacher.

Network output ``S(x) = sum_k v_k g(w_k . x / sqrt(N))``.  The batch loss is
``(1/B) sum_b (S(x_b) - y_b)**2``; one SGD step is one unit of schedule time.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Tuple

import numpy as np
from scipy.special import erf

from .schedules import Schedule, eta_at
from .trajectory import Trajectory

TS_COLUMNS = ("step", "eta", "mse_train")
ACTIVATIONS = ("erf", "relu", "linear")
INDEX_BLOCK = 4096


class TrainingDivergence(RuntimeError):
    pass


def activation(name: str):
    """Return ``(g, g')`` for an activation name."""
    if name == "erf":
        c = math.sqrt(2.0 / math.pi)
        return (lambda x: erf(x / math.sqrt(2.0))), (lambda x: c * np.exp(-0.5 * x * x))
    if name == "relu":
        return (lambda x: np.maximum(x, 0.0)), (lambda x: (x > 0).astype(float))
    if name == "linear":
        return (lambda x: x), (lambda x: np.ones_like(x))
    raise ValueError(f"activation must be one of {ACTIVATIONS}, got {name!r}")


@dataclass
class TwoLayerNet:
    w: np.ndarray  # K x N
    v: np.ndarray  # K
    act: str = "erf"

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        if self.w.ndim != 2 or self.v.shape != (self.w.shape[0],):
            raise ValueError(f"shape mismatch: w {self.w.shape}, v {self.v.shape}")
        activation(self.act)

    @property
    def K(self) -> int:
        return self.w.shape[0]

    @property
    def N(self) -> int:
        return self.w.shape[1]

    def preact(self, x: np.ndarray) -> np.ndarray:
        return x @ self.w.T / math.sqrt(self.N)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        g, _ = activation(self.act)
        return g(self.preact(x)) @ self.v

    def copy(self) -> "TwoLayerNet":
        return TwoLayerNet(self.w.copy(), self.v.copy(), self.act)


@dataclass
class TSConfig:
    N: int = 500
    P: int = 10_000
    M: int = 2
    K: int = 2
    B: int = 1
    schedule: Schedule = field(default_factory=lambda: Schedule.constant(0.1))
    steps: int = 100_000
    seed: int = 0
    eval_stride: int = 1000
    act: str = "erf"
    init_scale: float = 1.0

    def __post_init__(self):
        if min(self.N, self.P, self.M, self.K, self.B, self.steps, self.eval_stride) < 1:
            raise ValueError("N, P, M, K, B, steps and eval_stride must be >= 1")
        if self.B > self.P:
            raise ValueError(f"batch size {self.B} exceeds dataset size {self.P}")
        if not self.init_scale > 0:
            raise ValueError("init_scale must be > 0")
        activation(self.act)
        if self.K < self.M:
            warnings.warn(f"student narrower than teacher (K={self.K} < M={self.M})", UserWarning)
        if self.P >= self.K * self.N:
            warnings.warn(f"P={self.P} >= K*N={self.K * self.N}: outside the interpolation regime",
                          UserWarning)


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))


def generate_task(cfg: TSConfig) -> Tuple[TwoLayerNet, np.ndarray, np.ndarray]:
    """Teacher with standard normal first layer and unit second layer, Gaussian inputs."""
    rng = _rng(cfg.seed, 0)
    teacher = TwoLayerNet(rng.standard_normal((cfg.M, cfg.N)), np.ones(cfg.M), cfg.act)
    x = rng.standard_normal((cfg.P, cfg.N))
    return teacher, x, teacher(x)


def init_student(cfg: TSConfig) -> TwoLayerNet:
    rng = _rng(cfg.seed, 1)
    s = cfg.init_scale
    return TwoLayerNet(s * rng.standard_normal((cfg.K, cfg.N)), s * rng.standard_normal(cfg.K), cfg.act)


def mse(net: TwoLayerNet, x: np.ndarray, y: np.ndarray) -> float:
    e = net(x) - y
    return float(e @ e) / e.size


def gradients(net: TwoLayerNet, x: np.ndarray, y: np.ndarray):
    """Exact gradients of ``(1/B) sum (S - y)^2`` w.r.t. ``(w, v)``."""
    g, gp = activation(net.act)
    x = np.atleast_2d(x)
    h = net.preact(x)  # B x K
    e = g(h) @ net.v - np.atleast_1d(y)
    b = x.shape[0]
    grad_v = (2.0 / b) * (e @ g(h))
    grad_w = (2.0 / (b * math.sqrt(net.N))) * ((e[:, None] * gp(h) * net.v).T @ x)
    return grad_w, grad_v


def sgd_step(net: TwoLayerNet, x: np.ndarray, y: np.ndarray, eta: float) -> TwoLayerNet:
    """One SGD update of both layers, in place; returns ``net``."""
    gw, gv = gradients(net, x, y)
    net.w -= eta * gw
    net.v -= eta * gv
    if not (np.all(np.isfinite(net.w)) and np.all(np.isfinite(net.v))):
        raise TrainingDivergence("non-finite weights after SGD step")
    return net


def train(cfg: TSConfig, task=None, student: TwoLayerNet | None = None) -> Trajectory:
    """Run ``cfg.steps`` SGD steps; record the training mse every ``eval_stride`` steps."""
    if task is None:
        task = generate_task(cfg)
    _, x, y = task
    net = init_student(cfg) if student is None else student
    rng = _rng(cfg.seed, 2)
    etas = np.asarray(eta_at(cfg.schedule, np.arange(cfg.steps + 1, dtype=float)), dtype=float)
    traj = Trajectory(TS_COLUMNS)
    traj.append(0, etas[0], mse(net, x, y))
    idx = np.empty(0, dtype=np.int64)
    for k in range(cfg.steps):
        j = k % INDEX_BLOCK
        if j == 0:
            idx = rng.integers(0, cfg.P, size=(INDEX_BLOCK, cfg.B))
        batch = idx[j]
        sgd_step(net, x[batch], y[batch], etas[k])
        if (k + 1) % cfg.eval_stride == 0:
            traj.append(k + 1, etas[k + 1], mse(net, x, y))
    return traj


def with_schedule(cfg: TSConfig, schedule: Schedule, steps: int | None = None) -> TSConfig:
    return replace(cfg, schedule=schedule, steps=cfg.steps if steps is None else steps)
