from __future__ import annotations

import math
from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .halfspace import Halfspace, LabeledDataset, UNIT_TOLERANCE
from .testing import Diagnostic, TesterVerdict, WedgeStatistics


class RejectionParams(BaseModel):
    """Localization state: center offset·direction and scale sigma.

    Sigma = I - (1 - sigma^2) ww^T/|w|^2 is never materialized; it is carried as
    (direction, sigma). offset = 0 gives the origin-centred squeeze used by the
    near-homogeneous learner.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    direction: np.ndarray
    offset: float = Field(0.0, ge=0.0)
    sigma: float = Field(gt=0.0, lt=1.0)

    @field_validator("direction", mode="before")
    @classmethod
    def _as_vector(cls, value):
        arr = np.array(value, dtype=np.float64)
        arr.setflags(write=False)
        if arr.ndim != 1:
            raise ValueError(f"direction must be a vector, got shape {arr.shape}")
        return arr

    @model_validator(mode="after")
    def _unit_direction(self):
        norm = float(np.linalg.norm(self.direction))
        if abs(norm - 1.0) > UNIT_TOLERANCE:
            raise ValueError(f"direction must have unit norm, got {norm!r}")
        return self

    @property
    def d(self) -> int:
        return int(self.direction.shape[0])

    @property
    def center(self) -> np.ndarray:
        return self.offset * self.direction

    @property
    def peak(self) -> float:
        """Projection onto the direction at which the acceptance probability is 1."""
        return self.offset / (1.0 - self.sigma**2)


class ReversionBound(BaseModel):
    model_config = ConfigDict(frozen=True)

    sigma: float = Field(gt=0.0, lt=1.0)
    beta: float = Field(ge=0.0)
    delta: float = Field(ge=0.0, lt=1.0)


class FilterResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    dataset: LabeledDataset
    acceptance_fraction: float


class CandidateSource(str, Enum):
    TAIL_MEAN_PLUS = "tail_mean_plus"
    TAIL_MEAN_MINUS = "tail_mean_minus"
    CHOW_PATH = "chow_path"


class CenterCandidate(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    point: np.ndarray
    source: CandidateSource
    grid_index: int = Field(ge=0)

    @field_validator("point", mode="before")
    @classmethod
    def _as_vector(cls, value):
        arr = np.array(value, dtype=np.float64)
        arr.setflags(write=False)
        return arr

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.point))


class TailStats(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    minority_mass: float = Field(ge=0.0, le=0.5)
    tail_mean: np.ndarray
    tail_label: int
    count: int = Field(ge=1)

    @field_validator("tail_label")
    @classmethod
    def _label(cls, value: int) -> int:
        if value not in (-1, 1):
            raise ValueError(f"tail label must be +1 or -1, got {value}")
        return value


class CenterSearchResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    verdict: TesterVerdict
    candidates: list[CenterCandidate] = Field(default_factory=list)
    tails: list[TailStats] = Field(default_factory=list)
    imbalanced: bool = False

    @classmethod
    def rejected(cls, verdict: TesterVerdict) -> "CenterSearchResult":
        return cls(verdict=verdict)


class IterationState(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    current_direction: np.ndarray
    round: int = Field(ge=0)
    sigma_schedule_value: float = Field(gt=0.0, lt=1.0)
    survivors: int = 0


class NearHomogeneousResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    verdict: TesterVerdict
    direction: Optional[np.ndarray] = None
    rounds: list[IterationState] = Field(default_factory=list)
    # last accepted round's wedge measurements; None when no round ran
    wedge: Optional[WedgeStatistics] = None


class LearnOutcome(BaseModel):
    verdict: TesterVerdict
    chosen: Optional[Halfspace] = None
    test_error: Optional[float] = Field(None, ge=0.0, le=1.0)
    hypotheses_considered: int = 0
    diagnostics: list[Diagnostic] = Field(default_factory=list)
    notes: list[str] = Field(default_factory=list)
    trials_run: int = 1
    trials_rejected: int = 0

    @model_validator(mode="after")
    def _accept_has_hypothesis(self):
        if self.verdict.accepted:
            if self.chosen is None or self.test_error is None:
                raise ValueError("an accepted outcome needs a chosen hypothesis and its measured error")
            if abs(float(np.linalg.norm(self.chosen.v)) - 1.0) > UNIT_TOLERANCE:
                raise ValueError("chosen hypothesis must have a unit direction")
        return self

    @property
    def accepted(self) -> bool:
        return self.verdict.accepted

    @property
    def chosen_threshold(self) -> float:
        return math.nan if self.chosen is None else self.chosen.t
