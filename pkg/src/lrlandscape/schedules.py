"""Learning-rate schedules, their exact time integrals and the clock map.

A schedule is an immutable value.  Three shapes are supported::

    constant   eta(t) = eta0
    power      eta(t) = eta0 / max(t, t_start)**beta
    switch     eta(t) = eta0                                    t <= t_switch
               eta(t) = eta0 / max(t - t_switch, t_start)**beta  t >  t_switch

The shift ``t_start`` keeps the power law finite at the origin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

ArrayLike = Union[float, np.ndarray]

KINDS = ("constant", "power", "switch")


@dataclass(frozen=True)
class Schedule:
    kind: str = "constant"
    eta0: float = 0.1
    beta: float = 0.0
    t_switch: float = 0.0
    t_start: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"schedule kind must be one of {KINDS}, got {self.kind!r}")
        if not self.eta0 > 0:
            raise ValueError(f"eta0 must be > 0, got {self.eta0}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.kind == "switch" and not 0.0 < self.beta:
            raise ValueError("switch schedule needs beta in (0, 1]")
        if not self.t_switch >= 0:
            raise ValueError(f"t_switch must be >= 0, got {self.t_switch}")
        if not self.t_start > 0:
            raise ValueError(f"t_start must be > 0, got {self.t_start}")
        if self.kind == "switch" and self.t_start < 1.0:
            # otherwise the rate would jump above eta0 right after the switch
            raise ValueError(f"switch schedule needs t_start >= 1, got {self.t_start}")

    @classmethod
    def constant(cls, eta0: float) -> "Schedule":
        return cls("constant", eta0, 0.0)

    @classmethod
    def power(cls, eta0: float, beta: float, t_start: float = 1.0) -> "Schedule":
        return cls("power", eta0, beta, 0.0, t_start)

    @classmethod
    def switch(cls, eta0: float, beta: float, t_switch: float, t_start: float = 1.0) -> "Schedule":
        return cls("switch", eta0, beta, t_switch, t_start)

    @property
    def decay_origin(self) -> float:
        """Time at which the power-law part starts counting."""
        return self.t_switch if self.kind == "switch" else 0.0

    def eta(self, t: ArrayLike) -> ArrayLike:
        return eta_at(self, t)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "eta0": self.eta0, "beta": self.beta,
                "t_switch": self.t_switch, "t_start": self.t_start}


def eta_at(s: Schedule, t: ArrayLike) -> ArrayLike:
    """Learning rate at time ``t`` (scalar or array)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("time must be >= 0")
    if s.kind == "constant" or s.beta == 0.0:
        out = np.full_like(t_arr, s.eta0)
    elif s.kind == "power":
        out = s.eta0 / np.maximum(t_arr, s.t_start) ** s.beta
    else:
        tau = np.maximum(t_arr - s.t_switch, s.t_start)
        out = np.where(t_arr <= s.t_switch, s.eta0, s.eta0 / tau ** s.beta)
    return float(out) if out.ndim == 0 else out


def _power_primitive(eta0: float, beta: float, tau: float) -> float:
    # antiderivative of eta0 * tau**-beta for tau > 0
    if beta == 1.0:
        return eta0 * math.log(tau)
    return eta0 * tau ** (1.0 - beta) / (1.0 - beta)


def _shifted_power_integral(eta0: float, beta: float, t_start: float, a: float, b: float) -> float:
    """Integral over [a, b] (a <= b, both >= 0) of eta0 / max(tau, t_start)**beta."""
    flat = eta0 / t_start ** beta
    total = 0.0
    if a < t_start:
        total += flat * (min(b, t_start) - a)
        a = t_start
    if b > a:
        total += _power_primitive(eta0, beta, b) - _power_primitive(eta0, beta, a)
    return total


def integrated_eta(s: Schedule, t0: float, t1: float) -> float:
    """Exact value of the integral of ``eta_at(s, .)`` over ``[t0, t1]``."""
    if t1 < t0:
        raise ValueError(f"need t0 <= t1, got {t0} > {t1}")
    if t0 < 0:
        raise ValueError(f"integration range must start at t0 >= 0, got {t0}")
    if s.kind == "constant" or s.beta == 0.0:
        return s.eta0 * (t1 - t0)
    if s.kind == "power":
        return _shifted_power_integral(s.eta0, s.beta, s.t_start, t0, t1)
    total = 0.0
    if t0 < s.t_switch:
        total += s.eta0 * (min(t1, s.t_switch) - t0)
        t0 = s.t_switch
    if t1 > t0:
        total += _shifted_power_integral(s.eta0, s.beta, s.t_start, t0 - s.t_switch, t1 - s.t_switch)
    return total


def clock(s: Schedule, t: ArrayLike) -> ArrayLike:
    """Rescaled time ``integral_0^t eta``, vectorised."""
    if np.ndim(t) == 0:
        return integrated_eta(s, 0.0, float(t))
    return np.array([integrated_eta(s, 0.0, float(ti)) for ti in np.ravel(t)]).reshape(np.shape(t))


def _time_of_clock_scalar(s: Schedule, u: float) -> float:
    if u < 0:
        raise ValueError("clock value must be >= 0")
    if s.kind == "constant" or s.beta == 0.0:
        return u / s.eta0
    origin = s.decay_origin
    if u <= s.eta0 * origin:
        return u / s.eta0
    u -= s.eta0 * origin
    flat_rate = s.eta0 / s.t_start ** s.beta
    if u <= flat_rate * s.t_start:
        return origin + u / flat_rate
    # u - flat part = P(tau) - P(t_start) with P the power primitive
    target = u - flat_rate * s.t_start + _power_primitive(s.eta0, s.beta, s.t_start)
    if s.beta == 1.0:
        tau = math.exp(target / s.eta0)
    else:
        tau = (target * (1.0 - s.beta) / s.eta0) ** (1.0 / (1.0 - s.beta))
    return origin + tau


def time_of_clock(s: Schedule, u: ArrayLike) -> ArrayLike:
    """Inverse of :func:`clock` (the clock is strictly increasing)."""
    if np.ndim(u) == 0:
        return _time_of_clock_scalar(s, float(u))
    return np.array([_time_of_clock_scalar(s, float(x)) for x in np.ravel(u)]).reshape(np.shape(u))


def effective_temperature(s: Schedule, T: float, t: ArrayLike) -> ArrayLike:
    """Closed-form annealing law ``(1-beta)**(1/(1-beta)) * T / t**(beta/(1-beta))``.

    Only ``s.beta`` enters.  This is not the same function of time as
    :func:`equivalent_temperature`; the two coincide only for ``beta = 0``.
    """
    if s.beta == 1.0:
        raise ValueError("beta = 1 has a logarithmic clock and no power-law annealing form")
    if T < 0:
        raise ValueError("temperature must be >= 0")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise ValueError("time must be > 0")
    b = s.beta
    out = (1.0 - b) ** (1.0 / (1.0 - b)) * T * t_arr ** (-b / (1.0 - b))
    return float(out) if out.ndim == 0 else out


def equivalent_temperature(s: Schedule, T: float, t: ArrayLike) -> ArrayLike:
    """Temperature of the equivalent constant-rate process at physical time ``t``.

    Running at ``eta(t)`` and temperature ``T`` is, on the clock
    ``integral eta / eta0``, the same stochastic process as running at the
    constant rate ``eta0`` with temperature ``T * eta(t) / eta0``.
    """
    if T < 0:
        raise ValueError("temperature must be >= 0")
    out = T * np.asarray(eta_at(s, t)) / s.eta0
    return float(out) if out.ndim == 0 else out


def annealed_temperature_on_clock(s: Schedule, T: float, u: ArrayLike) -> ArrayLike:
    """:func:`equivalent_temperature` expressed on the clock ``u = integral eta / eta0``."""
    return equivalent_temperature(s, T, time_of_clock(s, s.eta0 * np.asarray(u, dtype=float)))


def annealed_temperature_power_law(T: float, eta0: float, beta: float, rescaled_time: ArrayLike) -> ArrayLike:
    """Closed form ``T * eta0_tilde * rt**(-beta / (1 - beta))`` of the annealing law.

    ``rescaled_time`` is ``eta0 * t**(1 - beta) / (1 - beta)`` for the
    unshifted power law and ``eta0_tilde = (eta0 / (1 - beta))**(beta / (1 - beta))``.
    With that clock it equals ``T * t**-beta``, i.e. :func:`equivalent_temperature`.
    """
    if not 0.0 <= beta < 1.0:
        raise ValueError("need 0 <= beta < 1")
    expo = beta / (1.0 - beta)
    eta0_tilde = (eta0 / (1.0 - beta)) ** expo
    return T * eta0_tilde * np.asarray(rescaled_time, dtype=float) ** (-expo)


def schedule_from_dict(d: dict) -> Schedule:
    """Build a schedule from a config table ``{kind, eta0, beta, t_switch}``."""
    d = dict(d)
    kind = d.pop("kind", "constant")
    allowed = {"eta0", "beta", "t_switch", "t_start"}
    unknown = set(d) - allowed
    if unknown:
        raise ValueError(f"unknown schedule keys: {sorted(unknown)}")
    return Schedule(kind=kind, eta0=float(d.get("eta0", 0.1)), beta=float(d.get("beta", 0.0)),
                    t_switch=float(d.get("t_switch", 0.0)), t_start=float(d.get("t_start", 1.0)))
