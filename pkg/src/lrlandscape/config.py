"""Experiment config schema (TOML files validated before any compute)."""
from __future__ import annotations

import math
import sys
from pathlib import Path
from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .schedules import Schedule

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

KINDS = ("convex", "sk", "sk-planted", "chsck-pspin", "chsck-smt", "statics", "teacher-student", "sweep")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", strict=True, frozen=True)


class ScheduleModel(_Strict):
    kind: Literal["constant", "power", "switch"] = "constant"
    eta0: float = Field(0.1, gt=0)
    beta: float = Field(0.0, ge=0, le=1)
    t_switch: float = Field(0.0, ge=0)
    t_start: float = Field(1.0, gt=0)

    @model_validator(mode="after")
    def _switch_needs_decay(self):
        if self.kind == "switch" and self.beta == 0:
            raise ValueError("switch schedule needs beta > 0")
        if self.kind == "switch" and self.t_start < 1:
            raise ValueError("switch schedule needs t_start >= 1")
        return self

    def build(self) -> Schedule:
        return Schedule(self.kind, self.eta0, self.beta, self.t_switch, self.t_start)


Window = Optional[Tuple[float, float]]


class _Dynamics(_Strict):
    T: float = Field(1.0, ge=0)
    schedule: ScheduleModel = ScheduleModel()
    fit_window: Window = None

    @model_validator(mode="after")
    def _window(self):
        if self.fit_window is not None and not 0 < self.fit_window[0] < self.fit_window[1]:
            raise ValueError("fit_window must satisfy 0 < a < b")
        return self


class ConvexParams(_Dynamics):
    kappa: float = Field(1.0, gt=0)
    dt: float = Field(1e-3, gt=0)
    t_max: float = Field(100.0, gt=0)
    x0: float = 1.0
    n_paths: int = Field(2000, ge=1)
    record_stride: int = Field(10, ge=1)


class SKParams(_Dynamics):
    n: int = Field(1000, ge=2)
    dt: float = Field(1e-2, gt=0)
    t_max: float = Field(100.0, gt=0)
    record_stride: int = Field(100, ge=1)


class PlantedParams(SKParams):
    delta: float = Field(0.25, gt=0)
    plateau_rel_tol: float = Field(0.02, gt=0)
    plateau_window: int = Field(10, ge=1)


class PspinParams(_Dynamics):
    p: int = Field(3, ge=3)
    dt: float = Field(1e-2, gt=0)
    n_steps: int = Field(1000, ge=1)
    record_stride: int = Field(10, ge=1)
    memory_budget_mb: float = Field(1024.0, gt=0)
    gamma: float = Field(2.0 / 3.0, ge=0)
    dump_grid: bool = False


class SMTParams(_Dynamics):
    p: int = Field(3, ge=3)
    delta2: float = Field(0.2, gt=0)
    deltap: float = Field(6.0, gt=0)
    dt: float = Field(1e-2, gt=0)
    n_steps: int = Field(1000, ge=1)
    m0: float = Field(1e-10, ge=0)
    record_stride: int = Field(10, ge=1)
    memory_budget_mb: float = Field(1024.0, gt=0)
    dump_grid: bool = False


class StaticsParams(_Strict):
    p: int = Field(3, ge=3)
    delta2: float = Field(0.2, gt=0)
    deltap: float = Field(6.0, gt=0)


class TSParams(_Strict):
    N: int = Field(500, ge=1)
    P: int = Field(10_000, ge=1)
    M: int = Field(2, ge=1)
    K: int = Field(2, ge=1)
    B: int = Field(1, ge=1)
    schedule: ScheduleModel = ScheduleModel()
    steps: int = Field(100_000, ge=1)
    eval_stride: int = Field(1000, ge=1)
    activation: Literal["erf", "relu", "linear"] = "erf"
    init_scale: float = Field(1.0, gt=0)
    plateau_rel_tol: float = Field(0.25, gt=0)
    plateau_window: int = Field(10, ge=1)


SWEEP_BASES = ("convex", "sk", "sk-planted", "chsck-pspin", "chsck-smt", "teacher-student")


class SweepParams(_Strict):
    base: Literal["convex", "sk", "sk-planted", "chsck-pspin", "chsck-smt", "teacher-student"]
    parameter: str = "beta"
    values: List[float] = Field(min_length=1)


BLOCKS = {"convex": "convex", "sk": "sk", "sk-planted": "sk_planted", "chsck-pspin": "chsck_pspin",
          "chsck-smt": "chsck_smt", "statics": "statics", "teacher-student": "teacher_student"}


class ExperimentConfig(_Strict):
    kind: Literal["convex", "sk", "sk-planted", "chsck-pspin", "chsck-smt", "statics",
                  "teacher-student", "sweep"]
    output: str
    seeds: List[int] = Field(default_factory=lambda: [0], min_length=1)
    convex: Optional[ConvexParams] = None
    sk: Optional[SKParams] = None
    sk_planted: Optional[PlantedParams] = None
    chsck_pspin: Optional[PspinParams] = None
    chsck_smt: Optional[SMTParams] = None
    statics: Optional[StaticsParams] = None
    teacher_student: Optional[TSParams] = None
    sweep: Optional[SweepParams] = None

    @model_validator(mode="after")
    def _blocks(self):
        run_kind = self.sweep.base if self.kind == "sweep" else self.kind
        if self.kind == "sweep" and self.sweep is None:
            raise ValueError("kind 'sweep' needs a [sweep] table")
        if self.kind != "sweep" and self.sweep is not None:
            raise ValueError("[sweep] table given but kind is not 'sweep'")
        need = BLOCKS[run_kind]
        if getattr(self, need) is None:
            raise ValueError(f"kind {run_kind!r} needs a [{need}] table")
        extra = [b for b in BLOCKS.values() if b != need and getattr(self, b) is not None]
        if extra:
            raise ValueError(f"tables not used by kind {run_kind!r}: {extra}")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if self.kind == "sweep":
            params = getattr(self, need)
            p = self.sweep.parameter
            in_sched = hasattr(params, "schedule") and p in ScheduleModel.model_fields
            if not in_sched and p not in type(params).model_fields:
                raise ValueError(f"sweep parameter {p!r} is not a field of [{need}] or its schedule")
        return self

    @property
    def run_kind(self) -> str:
        return self.sweep.base if self.kind == "sweep" else self.kind

    @property
    def params(self):
        return getattr(self, BLOCKS[self.run_kind])


def load_config(path) -> ExperimentConfig:
    """Parse and validate; raises ``tomllib.TOMLDecodeError`` or ``pydantic.ValidationError``."""
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return parse_config(data)


def parse_config(data: dict) -> ExperimentConfig:
    data = dict(data)
    # TOML has no tuple type; the strict schema wants tuples for windows
    for block in BLOCKS.values():
        tbl = data.get(block)
        if isinstance(tbl, dict) and isinstance(tbl.get("fit_window"), list):
            tbl = dict(tbl)
            tbl["fit_window"] = tuple(float(x) for x in tbl["fit_window"])
            data[block] = tbl
    return ExperimentConfig.model_validate(data)


def with_parameter(params, name: str, value: float):
    """Copy of a parameter block with ``name`` (own field or schedule field) set to ``value``."""
    if name in type(params).model_fields:
        field_type = type(params).model_fields[name].annotation
        v = int(value) if field_type is int else float(value)
        return type(params).model_validate({**params.model_dump(), name: v}, strict=False)
    sched = params.schedule.model_dump()
    sched[name] = float(value)
    return type(params).model_validate({**params.model_dump(), "schedule": sched}, strict=False)


def output_dir(cfg: ExperimentConfig) -> Path:
    return Path(cfg.output)


def as_float(x) -> float:
    return float(x) if x is not None else math.nan
