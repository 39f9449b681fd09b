from __future__ import annotations

import math
from enum import Enum
from typing import Iterator, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

UNIT_TOLERANCE = 1e-9


def _frozen_array(value, dtype) -> np.ndarray:
    arr = np.array(value, dtype=dtype)
    arr.setflags(write=False)
    return arr


class Halfspace(BaseModel):
    """sign(v·x + t) with a unit direction; t = ±inf encodes the constant hypotheses."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    v: np.ndarray
    t: float = 0.0

    @field_validator("v", mode="before")
    @classmethod
    def _as_vector(cls, value):
        arr = _frozen_array(value, np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError(f"direction must be a non-empty vector, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("direction must be finite")
        return arr

    @field_validator("t")
    @classmethod
    def _not_nan(cls, value: float) -> float:
        if math.isnan(value):
            raise ValueError("threshold must not be NaN")
        return float(value)

    @model_validator(mode="after")
    def _unit_direction(self):
        norm = float(np.linalg.norm(self.v))
        if abs(norm - 1.0) > UNIT_TOLERANCE:
            raise ValueError(f"direction must have unit norm, got {norm!r}")
        return self

    @property
    def d(self) -> int:
        return int(self.v.shape[0])

    @property
    def is_constant(self) -> bool:
        return math.isinf(self.t)

    @classmethod
    def constant(cls, label: int, d: int) -> "Halfspace":
        if label not in (-1, 1):
            raise ValueError(f"constant label must be +1 or -1, got {label}")
        axis = np.zeros(d)
        axis[0] = 1.0
        return cls(v=axis, t=math.inf if label > 0 else -math.inf)

    def describe(self) -> str:
        if self.is_constant:
            return f"constant {'+1' if self.t > 0 else '-1'}"
        coords = " ".join(f"{c:.6f}" for c in self.v)
        return f"v=[{coords}] t={self.t:.6f}"


class LabeledPoint(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    x: np.ndarray
    y: int

    @field_validator("x", mode="before")
    @classmethod
    def _as_vector(cls, value):
        return _frozen_array(value, np.float64)

    @field_validator("y")
    @classmethod
    def _label(cls, value: int) -> int:
        if value not in (-1, 1):
            raise ValueError(f"label must be +1 or -1, got {value}")
        return value


class LabeledDataset(BaseModel):
    """Row-major sample: x has shape (n, d), y holds the ±1 labels in the same order."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    x: np.ndarray
    y: np.ndarray

    @field_validator("x", mode="before")
    @classmethod
    def _as_matrix(cls, value):
        arr = _frozen_array(value, np.float64)
        if arr.ndim != 2:
            raise ValueError(f"features must be a 2-d array, got shape {arr.shape}")
        return arr

    @field_validator("y", mode="before")
    @classmethod
    def _as_labels(cls, value):
        arr = _frozen_array(value, np.int8)
        if arr.ndim != 1:
            raise ValueError(f"labels must be a 1-d array, got shape {arr.shape}")
        if arr.size and not np.all((arr == 1) | (arr == -1)):
            raise ValueError("labels must be +1 or -1")
        return arr

    @model_validator(mode="after")
    def _aligned(self):
        if self.x.shape[0] != self.y.shape[0]:
            raise ValueError(f"{self.x.shape[0]} feature rows but {self.y.shape[0]} labels")
        return self

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    @property
    def d(self) -> int:
        return int(self.x.shape[1])

    def __len__(self) -> int:
        return self.n

    def iter_points(self) -> Iterator[LabeledPoint]:
        for row, label in zip(self.x, self.y):
            yield LabeledPoint(x=row, y=int(label))

    @property
    def points(self) -> list[LabeledPoint]:
        return list(self.iter_points())

    def subset(self, index) -> "LabeledDataset":
        return LabeledDataset(x=self.x[index], y=self.y[index])

    def label_mass(self, label: int) -> float:
        if self.n == 0:
            return 0.0
        return float(np.count_nonzero(self.y == label)) / self.n


class NoiseStrategy(str, Enum):
    BOUNDARY_FLIP = "boundary"
    TAIL_FLIP = "tail"
    RANDOM_FLIP = "random"


class NoiseProfile(BaseModel):
    model_config = ConfigDict(frozen=True)

    budget: float = Field(0.0, ge=0.0)
    strategy: NoiseStrategy = NoiseStrategy.TAIL_FLIP


class MarginalFamily(str, Enum):
    STANDARD_GAUSSIAN = "standard_gaussian"
    SCALED_GAUSSIAN = "scaled_gaussian"
    TWO_POINT_MIXTURE = "two_point"
    UNIFORM_CUBE = "uniform_cube"


_DEFAULT_PARAMETER = {
    MarginalFamily.STANDARD_GAUSSIAN: None,
    MarginalFamily.SCALED_GAUSSIAN: math.sqrt(2.0),
    MarginalFamily.TWO_POINT_MIXTURE: 2.0,
    MarginalFamily.UNIFORM_CUBE: math.sqrt(3.0),
}


class MarginalKind(BaseModel):
    """x-marginal family; `parameter` is the scale factor, separation or half-width."""

    model_config = ConfigDict(frozen=True)

    family: MarginalFamily = MarginalFamily.STANDARD_GAUSSIAN
    parameter: Optional[float] = None

    @model_validator(mode="before")
    @classmethod
    def _fill_parameter(cls, data):
        if isinstance(data, dict) and data.get("parameter") is None:
            family = MarginalFamily(data.get("family", MarginalFamily.STANDARD_GAUSSIAN))
            data = {**data, "parameter": _DEFAULT_PARAMETER[family]}
        return data

    @model_validator(mode="after")
    def _check_parameter(self):
        if self.family is MarginalFamily.STANDARD_GAUSSIAN:
            if self.parameter is not None:
                raise ValueError("standard_gaussian takes no parameter")
        elif self.parameter is None or self.parameter <= 0:
            raise ValueError(f"{self.family.value} parameter must be positive, got {self.parameter}")
        return self

    @classmethod
    def parse(cls, text: str) -> "MarginalKind":
        """`family[:parameter]`, e.g. `uniform_cube:1.732`."""
        name, _, param = text.strip().partition(":")
        family = MarginalFamily(name.strip())
        return cls(family=family, parameter=float(param) if param else None)

    def label(self) -> str:
        if self.parameter is None:
            return self.family.value
        return f"{self.family.value}:{self.parameter:g}"


class CorruptionReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    requested_flips: int
    realized_flips: int
    minority_label: int
    strategy: NoiseStrategy

    @property
    def shortfall(self) -> int:
        return self.requested_flips - self.realized_flips


class LearnConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(0.05, gt=0.0, lt=1.0)
    tau: float = Field(0.05, gt=0.0, lt=1.0)
    seed: int = Field(0, ge=0, lt=2**64)
    # sample-size overrides
    select_fraction: float = Field(0.2, gt=0.0, lt=1.0)
    wedge_samples: int = Field(100_000, ge=1)
    min_survivors: int = Field(100, ge=1)
    min_round_samples: int = Field(10_000, ge=1)
    selection_size: Optional[int] = Field(None, ge=1)
    max_trials: int = Field(200, ge=1)
    # total variation below which a grid center repeats its neighbour; None means epsilon/2, 0 keeps every center
    center_resolution: Optional[float] = Field(None, ge=0.0, lt=1.0)
