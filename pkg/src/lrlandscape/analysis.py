"""Power-law fits, plateau detection and run summaries."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

MIN_FIT_POINTS = 8


@dataclass(frozen=True)
class ExponentFit:
    exponent: float
    intercept: float
    stderr: float
    window: Tuple[float, float]
    n_points: int
    offset: float = 0.0

    def __post_init__(self):
        if self.n_points < MIN_FIT_POINTS:
            raise ValueError(f"need at least {MIN_FIT_POINTS} points, got {self.n_points}")
        if not self.window[0] < self.window[1]:
            raise ValueError(f"empty window {self.window}")

    def predict(self, t):
        """Fitted ``values - offset`` at times ``t``."""
        return math.exp(self.intercept) * np.asarray(t, dtype=float) ** (-self.exponent)

    def to_dict(self) -> dict:
        return {"exponent": self.exponent, "stderr": self.stderr,
                "window": list(self.window), "offset_used": self.offset}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def last_decade(times) -> Tuple[float, float]:
    t_hi = float(np.max(times))
    return t_hi / 10.0, t_hi


def fit_power_law(times, values, offset: float = 0.0,
                  window: Optional[Tuple[float, float]] = None) -> ExponentFit:
    """Least-squares slope of ``log(values - offset)`` against ``log(times)``.

    The window defaults to the last decade of ``times``.  Returns the
    exponent as minus the slope.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.shape != v.shape or t.ndim != 1:
        raise ValueError("times and values must be 1-d arrays of equal length")
    if np.any(np.diff(t) <= 0):
        raise ValueError("times must be strictly increasing")
    lo, hi = last_decade(t) if window is None else window
    sel = np.flatnonzero((t >= lo) & (t <= hi))
    if sel.size < MIN_FIT_POINTS:
        raise ValueError(f"window [{lo}, {hi}] holds {sel.size} points, need {MIN_FIT_POINTS}")
    if np.any(t[sel] <= 0):
        raise ValueError("times in the window must be > 0")
    d = v[sel] - offset
    bad = np.flatnonzero(~(d > 0))
    if bad.size:
        i = int(sel[bad[0]])
        raise ValueError(f"values - offset is not positive at index {i} (t={t[i]:.6g}, diff={d[bad[0]]:.3e})")
    x = np.log(t[sel])
    y = np.log(d)
    xm = x.mean()
    sxx = float(((x - xm) ** 2).sum())
    slope = float(((x - xm) * (y - y.mean())).sum() / sxx)
    icpt = float(y.mean() - slope * xm)
    resid = y - (icpt + slope * x)
    dof = sel.size - 2
    stderr = math.sqrt(float(resid @ resid) / dof / sxx)
    return ExponentFit(exponent=-slope, intercept=icpt, stderr=stderr,
                       window=(float(lo), float(hi)), n_points=int(sel.size), offset=float(offset))


def detect_plateau(times, values, rel_tol: float, window_len: int) -> Optional[float]:
    """Earliest time whose trailing ``window_len`` samples vary by less than
    ``rel_tol * |median|``; ``None`` if the series never settles."""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if window_len < 1:
        raise ValueError("window_len must be >= 1")
    if v.size < window_len:
        raise ValueError(f"series has {v.size} points, window needs {window_len}")
    view = np.lib.stride_tricks.sliding_window_view(v, window_len)
    spread = view.max(axis=1) - view.min(axis=1)
    scale = rel_tol * np.abs(np.median(view, axis=1))
    hit = np.flatnonzero(spread < scale)
    if hit.size == 0:
        return None
    return float(t[hit[0] + window_len - 1])


def theory_exponent_sk(beta: float) -> float:
    return min(beta, 1.0 - beta)


def theory_exponent_pspin(beta: float, gamma: float = 2.0 / 3.0) -> float:
    return min(beta, gamma * (1.0 - beta))


def summarize_fits(fits: Sequence[ExponentFit]) -> dict:
    ex = np.array([f.exponent for f in fits])
    return {"exponent_mean": float(ex.mean()),
            "exponent_sem": float(ex.std(ddof=1) / math.sqrt(ex.size)) if ex.size > 1 else math.nan,
            "fits": [f.to_dict() for f in fits]}


def write_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if hasattr(obj, "to_dict"):
        return obj.to_dict()
    try:
        return asdict(obj)
    except TypeError:
        raise TypeError(f"not JSON serialisable: {type(obj).__name__}") from None
