from __future__ import annotations

import math
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .halfspace import Halfspace, LearnConfig, MarginalKind, NoiseProfile, NoiseStrategy


def _split_floats(value):
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(",") if p.strip()]
        return [float(p) for p in parts]
    if isinstance(value, (int, float)):
        return [float(value)]
    return value


class ExperimentConfig(BaseModel):
    """Everything a gen/learn/sweep run needs. Built from a KEY=VALUE file, then CLI flags.

    direction: `e<k>` (1-based axis) or a comma list of coordinates, normalized on use.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    d: int = Field(5, ge=2)
    n: int = Field(100_000, ge=1)
    epsilon: float = Field(0.05, gt=0.0, lt=1.0)
    tau: float = Field(0.05, gt=0.0, lt=1.0)
    seed: int = Field(0, ge=0, lt=2**64)
    marginal: MarginalKind = Field(default_factory=MarginalKind)
    direction: str = "e1"
    thresholds: list[float] = Field(default_factory=lambda: [0.0])
    adversary: NoiseStrategy = NoiseStrategy.TAIL_FLIP
    budgets: list[float] = Field(default_factory=lambda: [0.0])
    trials: int = Field(1, ge=1)
    holdout: int = Field(100_000, ge=1)
    boost: bool = False
    record_seconds: bool = False
    out: Optional[str] = None

    @field_validator("marginal", mode="before")
    @classmethod
    def _parse_marginal(cls, value):
        if isinstance(value, str):
            return MarginalKind.parse(value)
        return value

    @field_validator("thresholds", "budgets", mode="before")
    @classmethod
    def _parse_list(cls, value):
        return _split_floats(value)

    @field_validator("thresholds")
    @classmethod
    def _finite_thresholds(cls, value: list[float]) -> list[float]:
        if not value or any(not math.isfinite(t) for t in value):
            raise ValueError("thresholds must be a non-empty list of finite numbers")
        return value

    @field_validator("budgets")
    @classmethod
    def _budget_range(cls, value: list[float]) -> list[float]:
        if not value or any(not 0.0 <= b < 0.5 for b in value):
            raise ValueError("budgets must be a non-empty list of values in [0, 0.5)")
        return value

    @field_validator("direction")
    @classmethod
    def _direction_syntax(cls, value: str) -> str:
        value = value.strip()
        if value.startswith("e"):
            if not value[1:].isdigit() or int(value[1:]) < 1:
                raise ValueError(f"axis direction must look like e1, e2, ...; got {value!r}")
        else:
            _split_floats(value)
        return value

    def direction_vector(self) -> np.ndarray:
        if self.direction.startswith("e"):
            axis = int(self.direction[1:]) - 1
            if axis >= self.d:
                raise ValueError(f"direction {self.direction} is outside dimension d={self.d}")
            v = np.zeros(self.d)
            v[axis] = 1.0
            return v
        coords = np.asarray(_split_floats(self.direction), dtype=np.float64)
        if coords.shape != (self.d,):
            raise ValueError(f"direction has {coords.size} coordinates, expected d={self.d}")
        norm = float(np.linalg.norm(coords))
        if norm < 1e-12:
            raise ValueError("direction must be nonzero")
        return coords / norm

    def truth(self, threshold: float) -> Halfspace:
        return Halfspace(v=self.direction_vector(), t=threshold)

    def noise(self, budget: float) -> NoiseProfile:
        return NoiseProfile(budget=budget, strategy=self.adversary)

    def learn_config(self, seed: Optional[int] = None) -> LearnConfig:
        return LearnConfig(epsilon=self.epsilon, tau=self.tau, seed=self.seed if seed is None else seed)


class SweepRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    budget: float
    t_star: float
    trial: int
    verdict: str
    threshold: Optional[float] = None
    error: Optional[float] = Field(None, ge=0.0, le=1.0)
    seconds: float = 0.0
    diagnostic: str = ""

    @property
    def accepted(self) -> bool:
        return self.verdict == "accept"


class ErrorQuantiles(BaseModel):
    q10: float
    q50: float
    q90: float


class SweepCellSummary(BaseModel):
    budget: float
    t_star: float
    trials: int
    accepted: int
    acceptance_rate: float
    median_error: Optional[float] = None
    error_quantiles: Optional[ErrorQuantiles] = None


class SweepSummary(BaseModel):
    """JSON summary written next to the per-trial CSV."""

    config: ExperimentConfig
    rows: int
    acceptance_rate: float
    error_quantiles: Optional[ErrorQuantiles] = None
    fitted_constant: Optional[float] = Field(
        None, description="median(error / sqrt(opt)) over accepted trials with opt > 0"
    )
    cells: list[SweepCellSummary]
    total_seconds: float
