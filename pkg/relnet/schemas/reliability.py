from typing import List, Literal, Optional

import numpy as np
from pydantic import Field, model_validator
from scipy.stats import binom

from relnet.schemas.base import BaseSchema


class ConnectionLaw(BaseSchema):
    k: float = Field(ge=0, description="Constant failure rate (1/time)")


class InitialDistribution(BaseSchema):
    """Distribution q_n of the number of initially working connections."""

    kind: Literal["perfect", "binomial", "explicit"] = "perfect"
    p: Optional[float] = Field(None, ge=0, le=1)
    q: Optional[List[float]] = None

    @model_validator(mode="after")
    def check_parameters(self):
        if self.kind == "binomial" and self.p is None:
            raise ValueError("binomial initial distribution requires p")
        if self.kind == "explicit":
            if not self.q:
                raise ValueError("explicit initial distribution requires q")
            if any(v < 0 or v > 1 for v in self.q):
                raise ValueError("every q_n must lie in [0, 1]")
            total = sum(self.q)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"q_n must sum to 1 (sum is {total:.12g})")
        return self

    def probabilities(self, n: int) -> np.ndarray:
        if self.kind == "perfect":
            q = np.zeros(n + 1)
            q[n] = 1.0
            return q
        if self.kind == "binomial":
            return binom.pmf(np.arange(n + 1), n, self.p)
        if len(self.q) != n + 1:
            raise ValueError(f"explicit q has {len(self.q)} entries, expected {n + 1}")
        return np.asarray(self.q, dtype=float)


class BlockModel(BaseSchema):
    multiplicity: int = Field(ge=1)
    flux: int = Field(1, ge=1)
    law: ConnectionLaw
    init: InitialDistribution = InitialDistribution()

    @model_validator(mode="after")
    def check_flux(self):
        if self.flux > self.multiplicity:
            raise ValueError(f"flux {self.flux} exceeds multiplicity {self.multiplicity}")
        if self.init.kind == "explicit" and len(self.init.q) != self.multiplicity + 1:
            raise ValueError(
                f"explicit q has {len(self.init.q)} entries, expected {self.multiplicity + 1}"
            )
        return self

    @property
    def q(self) -> np.ndarray:
        return self.init.probabilities(self.multiplicity)


class ChainModel(BaseSchema):
    blocks: List[BlockModel] = Field(min_length=1)

    @classmethod
    def iid(cls, block: BlockModel, length: int) -> "ChainModel":
        return cls(blocks=[block] * length)

    @property
    def length(self) -> int:
        return len(self.blocks)
