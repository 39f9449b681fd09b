from __future__ import annotations

from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class TestName(str, Enum):
    __test__ = False  # not a pytest class

    COVARIANCE = "covariance"
    MEAN = "mean"
    KOLMOGOROV = "kolmogorov"
    TRIMMED_STABILITY = "trimmed_stability"
    MOMENTS = "moments"
    WEDGE_MASS = "wedge_mass"
    WEDGE_COVARIANCE = "wedge_covariance"
    LIST_SIZE = "list_size"
    CHOW_SIGNAL = "chow_signal"
    LOCALIZED_MASS = "localized_mass"
    NO_VIABLE_CENTER = "no_viable_center"
    BOOSTING_MAJORITY = "boosting_majority"


class Diagnostic(BaseModel):
    model_config = ConfigDict(frozen=True)

    test: TestName
    statistic: float
    threshold: float
    message: str
    stage: str = ""

    def at(self, stage: str) -> "Diagnostic":
        return self.model_copy(update={"stage": stage})

    def __str__(self) -> str:
        prefix = f"[{self.stage}] " if self.stage else ""
        return f"{prefix}{self.test.value}: {self.message}"


class TesterVerdict(BaseModel):
    """Accept, or Reject naming exactly one failing test with its measured statistic."""

    __test__ = False

    model_config = ConfigDict(frozen=True)

    accepted: bool
    diagnostic: Optional[Diagnostic] = None

    @model_validator(mode="after")
    def _consistent(self):
        if self.accepted and self.diagnostic is not None:
            raise ValueError("an accepting verdict carries no diagnostic")
        if not self.accepted and self.diagnostic is None:
            raise ValueError("a rejecting verdict must name the failing test")
        return self

    @classmethod
    def accept(cls) -> "TesterVerdict":
        return cls(accepted=True)

    @classmethod
    def reject(cls, test: TestName, statistic: float, threshold: float, message: str, stage: str = "") -> "TesterVerdict":
        return cls(
            accepted=False,
            diagnostic=Diagnostic(test=test, statistic=float(statistic), threshold=float(threshold), message=message, stage=stage),
        )

    def at(self, stage: str) -> "TesterVerdict":
        if self.accepted:
            return self
        return TesterVerdict(accepted=False, diagnostic=self.diagnostic.at(stage))

    def __bool__(self) -> bool:
        return self.accepted

    def __str__(self) -> str:
        return "accept" if self.accepted else f"reject {self.diagnostic}"


class TestTolerances(BaseModel):
    __test__ = False

    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(0.05, gt=0.0)
    eta: float = Field(0.1, gt=0.0, lt=0.5)
    k: int = Field(4, ge=2)
    # None: derive from the sample size (ten standard errors of the top-degree monomial)
    moment_tol: Optional[float] = Field(None, gt=0.0)


class WedgeStatistics(BaseModel):
    """Measurements behind one wedge-bound test along a fixed direction."""

    model_config = ConfigDict(frozen=True)

    events: int
    mass_deviation: float
    checked_bands: int
    worst_band_spectral: float = 0.0
    # bound for the band reported in worst_band; sparse bands get a wider one
    worst_band_bound: float = 2.0
    worst_band: Optional[int] = None
