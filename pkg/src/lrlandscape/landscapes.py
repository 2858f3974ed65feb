"""Random coupling ensembles, rank-one spikes and spectral diagnostics."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class EigenSystem:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # columns

    @property
    def top(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def top_vector(self) -> np.ndarray:
        return self.eigenvectors[:, -1]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


@dataclass(frozen=True)
class SKInstance:
    """GOE couplings ``J`` with N(0,1) off-diagonal and N(0,2) diagonal entries."""

    n: int
    couplings: np.ndarray
    seed: int

    @property
    def matrix(self) -> np.ndarray:
        """The operator ``J / sqrt(n)`` whose spectrum fills [-2, 2]."""
        return self.couplings / math.sqrt(self.n)


@dataclass(frozen=True)
class SpikedInstance:
    """``M = (delta / sqrt(n)) J + x* x*^T / n`` with ``|x*|^2 = n``."""

    base: SKInstance
    delta: float
    signal: np.ndarray
    matrix: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def seed(self) -> int:
        return self.base.seed


def _rng(seed: int, stream: int) -> np.random.Generator:
    # independent streams per purpose, reproducible per (seed, stream)
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))


def sample_sk(n: int, seed: int) -> SKInstance:
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    g = _rng(seed, 0).standard_normal((n, n))
    j = (g + g.T) / math.sqrt(2.0)
    return SKInstance(n=n, couplings=j, seed=seed)


def sample_spiked(n: int, delta: float, seed: int) -> SpikedInstance:
    if not delta > 0:
        raise ValueError(f"delta must be > 0, got {delta}")
    base = sample_sk(n, seed)
    x = _rng(seed, 1).standard_normal(n)
    x *= math.sqrt(n) / np.linalg.norm(x)
    m = (delta / math.sqrt(n)) * base.couplings + np.outer(x, x) / n
    return SpikedInstance(base=base, delta=delta, signal=x, matrix=m)


def eigendecompose(m: np.ndarray) -> EigenSystem:
    """Dense symmetric eigendecomposition, eigenvalues ascending."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = max(np.abs(m).max(), 1.0)
    asym = np.abs(m - m.T).max() if m.size else 0.0
    if asym > SYMMETRY_TOL * scale:
        raise ValueError(f"matrix is not symmetric (max |M - M^T| = {asym:.3e})")
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise RuntimeError(f"symmetric eigensolver did not converge: {exc}") from exc
    return EigenSystem(eigenvalues=w, eigenvectors=v)


def ground_state_loss(eig: EigenSystem) -> float:
    """Per-site minimum of ``-x.Mx / (2n)`` on the sphere ``|x|^2 = n``."""
    return -eig.top / 2.0


def semicircle_density(mu):
    mu = np.asarray(mu, dtype=float)
    inside = np.abs(mu) < 2.0
    out = np.zeros_like(mu)
    out[inside] = np.sqrt(4.0 - mu[inside] ** 2) / (2.0 * math.pi)
    return float(out) if out.ndim == 0 else out


def semicircle_cdf(mu):
    mu = np.clip(np.asarray(mu, dtype=float), -2.0, 2.0)
    out = 0.5 + mu * np.sqrt(4.0 - mu ** 2) / (4.0 * math.pi) + np.arcsin(mu / 2.0) / math.pi
    return float(out) if out.ndim == 0 else out


def spectral_ks_distance(eigs, cdf: Callable = semicircle_cdf) -> float:
    """Kolmogorov-Smirnov distance between the empirical CDF of ``eigs`` and ``cdf``.

    ``eigs`` must already be on the scale of ``cdf`` (e.g. spectrum of J/sqrt(n)).
    """
    x = np.asarray(eigs, dtype=float)
    if x.size == 0:
        raise ValueError("empty spectrum")
    if np.any(np.diff(x) < 0):
        raise ValueError("eigenvalues must be sorted ascending")
    n = x.size
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def effective_hessian_spectrum(eigs, z: float) -> np.ndarray:
    """Spectrum of ``H + z I`` given the spectrum of ``H``.

    For the SK loss ``H = -J/sqrt(n)``, so pass the negated coupling spectrum;
    the left edge is then ``z - mu_max``.
    """
    return np.asarray(eigs, dtype=float) + z


def finite_size_gap(n: int, c: float = 1.0) -> float:
    """Order-of-magnitude estimate ``c * n**(-2/3)`` of the top spectral gap."""
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    return c * n ** (-2.0 / 3.0)


def bbp_top_eigenvalue(delta: float) -> float:
    """Large-n location of the outlier of ``M``: ``1 + delta**2`` above the
    transition (delta < 1), else the bulk edge ``2 delta``."""
    return 1.0 + delta ** 2 if delta < 1.0 else 2.0 * delta


def write_spectrum_csv(path, eigenvalues) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "eigenvalue"])
        for i, v in enumerate(eigenvalues):
            w.writerow([i, repr(float(v))])


def instance_spectrum(kind: str, n: int, seed: int, delta: Optional[float] = None) -> EigenSystem:
    if kind == "sk":
        return eigendecompose(sample_sk(n, seed).matrix)
    if kind == "sk-planted":
        return eigendecompose(sample_spiked(n, float(delta), seed).matrix)
    raise ValueError(f"unknown instance kind {kind!r}")
