from typing import List, Literal, Optional

import numpy as np
from pydantic import Field, model_validator

from relnet.schemas.base import BaseSchema
from relnet.settings import DEFAULT_SAMPLES, DEFAULT_SEED

KeyRateMode = Literal["mean-visibility", "mean-fraction"]


class ProtocolParams(BaseSchema):
    p_gen: float = Field(0.01, gt=0, le=1, description="Per-step link generation probability")
    t_coh: float = Field(1.0, gt=0, description="Memory coherence time (s)")
    t_ts: float = Field(2e-3 / 3, gt=0, description="Duration of one time step (s)")
    t_cut: int = Field(1500, ge=1, description="Cut-off in time steps")
    samples: int = Field(DEFAULT_SAMPLES, ge=1)
    seed: int = DEFAULT_SEED
    key_rate_mode: KeyRateMode = "mean-visibility"


class WernerState(BaseSchema):
    w: float = Field(ge=0, le=1)

    @property
    def fidelity(self) -> float:
        return (1.0 + 3.0 * self.w) / 4.0


class AttemptOutcome(BaseSchema):
    success: bool
    t: Optional[int] = Field(None, ge=1)
    w: Optional[float] = Field(None, ge=0, le=1)

    @model_validator(mode="after")
    def check_success(self):
        if self.success and (self.t is None or self.w is None):
            raise ValueError("successful attempt requires completion time and visibility")
        return self


class CutoffStatistics(BaseSchema):
    t_cut: int
    p_cut: float
    mean_t_steps: float
    mean_t_seconds: float
    mean_w: float
    mean_r: float
    n_samples: int
    n_success: int

    @property
    def attainable(self) -> bool:
        return self.n_success > 0


class KeyRatePoint(BaseSchema):
    t_cut: int
    p_cut: float
    mean_t_steps: float
    mean_t_seconds: float
    mean_w: float
    r: float
    rate: float = Field(ge=0, description="Secret-key rate (bits/s)")
    n_samples: int


class KeyRateCurve(BaseSchema):
    """Key rate against cut-off; averaged curves carry rates only."""

    label: str
    weighting: Optional[str] = None
    t_cuts: List[int]
    rates: List[float]
    points: Optional[List[KeyRatePoint]] = None

    @model_validator(mode="after")
    def check_lengths(self):
        if len(self.t_cuts) != len(self.rates):
            raise ValueError("t_cuts and rates differ in length")
        return self

    def as_arrays(self):
        return np.asarray(self.t_cuts), np.asarray(self.rates, dtype=float)
