from typing import Annotated, Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import Field, TypeAdapter, field_validator, model_validator

from relnet.schemas.base import BaseSchema
from relnet.schemas.entsim import ProtocolParams
from relnet.schemas.reliability import BlockModel, ConnectionLaw
from relnet.schemas.repair import RepairSpec
from relnet.schemas.topology import ChainLayout, Topology


class GridSpec(BaseSchema):
    start: float
    stop: float
    num: int = Field(ge=1)
    spacing: Literal["linear", "log"] = "linear"
    integer: bool = False

    @model_validator(mode="after")
    def check_range(self):
        if self.stop < self.start:
            raise ValueError("grid stop lies below start")
        if self.spacing == "log" and self.start <= 0:
            raise ValueError("log grid requires a positive start")
        return self

    def values(self) -> np.ndarray:
        if self.spacing == "log":
            values = np.geomspace(self.start, self.stop, self.num)
        else:
            values = np.linspace(self.start, self.stop, self.num)
        if self.integer:
            # rounding a thinned log grid may collide at the low end
            values = np.unique(np.rint(values).astype(int))
        return values


Grid = Union[List[float], GridSpec]


def expand_grid(grid: Grid) -> np.ndarray:
    if isinstance(grid, GridSpec):
        return grid.values()
    return np.asarray(grid)


def check_grid(grid: Grid) -> Grid:
    if isinstance(grid, list):
        if not grid:
            raise ValueError("grid is empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("grid must be sorted strictly increasing")
    return grid


class ExperimentBase(BaseSchema):
    seed: Optional[int] = None
    output_dir: Optional[str] = None
    samples: Optional[int] = Field(None, ge=1)
    threads: Optional[int] = Field(None, ge=1)
    topologies: Dict[str, Union[ChainLayout, Topology]] = {}

    def check_reference(self, name: str) -> None:
        if name not in self.topologies:
            raise ValueError(f"unknown topology reference {name!r}")


class ReferenceLaws(BaseSchema):
    gompertz_a: float = Field(0.05, ge=0)
    gompertz_b: float = Field(0.05, gt=0)
    gompertz_lam: float = Field(0.5, gt=0)
    weibull_a: float = Field(0.5, gt=0)
    weibull_b: float = Field(1.0, gt=-1)
    fit_to: Optional[str] = Field(None, description="Column prefix '<system>_<model>' to fit")


class ReliabilityCurvesConfig(ExperimentBase):
    experiment: Literal["reliability-curves"]
    systems: List[str] = Field(min_length=1)
    models: Dict[str, BlockModel] = Field(min_length=1)
    time_grid: Grid
    reference: ReferenceLaws = ReferenceLaws()

    @field_validator("time_grid")
    @classmethod
    def check_time_grid(cls, grid):
        return check_grid(grid)

    @model_validator(mode="after")
    def check_systems(self):
        for name in self.systems:
            self.check_reference(name)
        if any(t < 0 for t in expand_grid(self.time_grid)):
            raise ValueError("time grid contains negative times")
        return self


class ReferenceChain(BaseSchema):
    length: int = Field(6, ge=1)
    multiplicity: int = Field(3, ge=1)
    flux: int = Field(1, ge=1)
    law: ConnectionLaw = ConnectionLaw(k=0.5)


class MatchMultiplicityConfig(ExperimentBase):
    experiment: Literal["match-multiplicity"]
    reference: ReferenceChain = ReferenceChain()
    p_grid: Grid
    k_prime_grid: Grid
    p_thres: float = Field(0.9, gt=0, le=1)
    max_multiplicity: int = Field(10_000, ge=1)

    @field_validator("p_grid", "k_prime_grid")
    @classmethod
    def check_grids(cls, grid):
        return check_grid(grid)

    @model_validator(mode="after")
    def check_probabilities(self):
        p = expand_grid(self.p_grid)
        if np.any(p <= 0) or np.any(p > 1):
            raise ValueError("p grid must lie in (0, 1]")
        if np.any(expand_grid(self.k_prime_grid) < 0):
            raise ValueError("k' grid must be nonnegative")
        return self


class MonteCarloCheck(BaseSchema):
    enabled: bool = False
    p_down: List[float] = [0.05, 0.2, 0.5]
    windows: int = Field(1_000_000, ge=1)
    shards: int = Field(16, ge=2)

    @field_validator("p_down")
    @classmethod
    def check_p_down(cls, values):
        if not values or any(p <= 0 or p > 1 for p in values):
            raise ValueError(f"monte_carlo p_down values must lie in (0, 1], got {values}")
        return values


class RepairCorrelationsConfig(ExperimentBase):
    experiment: Literal["repair-correlations"]
    systems: List[str] = Field(min_length=1)
    multiplicity: int = Field(3, ge=1)
    tau: int = Field(7, ge=3)
    p_down_grid: Grid
    monte_carlo: MonteCarloCheck = MonteCarloCheck()

    @field_validator("p_down_grid")
    @classmethod
    def check_p_down_grid(cls, grid):
        return check_grid(grid)

    @model_validator(mode="after")
    def check_systems(self):
        for name in self.systems:
            self.check_reference(name)
        p = expand_grid(self.p_down_grid)
        if np.any(p <= 0) or np.any(p > 1):
            raise ValueError("p_down grid must lie in (0, 1]")
        if self.monte_carlo.enabled and self.seed is None:
            raise ValueError("seed is required when monte_carlo is enabled")
        return self


Weighting = Literal["unconditional", "conditioned-functional", "conditioned-broken"]


class NetworkKeyRates(BaseSchema):
    topology: str
    up_probabilities: List[float] = [0.8, 0.2]

    @field_validator("up_probabilities")
    @classmethod
    def check_probabilities(cls, values):
        if not values or any(q < 0 or q > 1 for q in values):
            raise ValueError("up probabilities must be a nonempty list in [0, 1]")
        return values


class ChainKeyRates(BaseSchema):
    length: int = Field(6, ge=1)
    multiplicity: int = Field(3, ge=1)
    repair: RepairSpec = RepairSpec(p_down=1 / 105, tau=15)
    weightings: List[Weighting] = Field(
        ["unconditional", "conditioned-functional", "conditioned-broken"], min_length=1
    )

    @model_validator(mode="after")
    def check_conditioning(self):
        conditioned = [w for w in self.weightings if w != "unconditional"]
        if conditioned and self.repair.tau < 2:
            raise ValueError(f"weightings {conditioned} need repair.tau >= 2, got {self.repair.tau}")
        return self


class KeyRatesConfig(ExperimentBase):
    experiment: Literal["key-rates"]
    protocol: ProtocolParams = ProtocolParams()
    t_cut_grid: Grid
    network: Optional[NetworkKeyRates] = None
    chain: Optional[ChainKeyRates] = None

    @field_validator("t_cut_grid")
    @classmethod
    def check_t_cut_grid(cls, grid):
        return check_grid(grid)

    @model_validator(mode="after")
    def check_sections(self):
        if self.seed is None:
            raise ValueError("seed is required for key-rates")
        if self.network is None and self.chain is None:
            raise ValueError("key-rates needs a network or chain section")
        if self.network is not None:
            self.check_reference(self.network.topology)
        t_cuts = expand_grid(self.t_cut_grid)
        if np.any(t_cuts < 1) or np.any(t_cuts != np.rint(t_cuts)):
            raise ValueError("t_cut grid must hold positive integers")
        return self


ExperimentConfig = Annotated[
    Union[ReliabilityCurvesConfig, MatchMultiplicityConfig, RepairCorrelationsConfig, KeyRatesConfig],
    Field(discriminator="experiment"),
]

experiment_adapter = TypeAdapter(ExperimentConfig)

EXPERIMENT_KINDS = ("reliability-curves", "match-multiplicity", "repair-correlations", "key-rates")


class RunOptions(BaseSchema):
    """Resolved run settings: CLI flags over config values over defaults."""

    seed: int
    samples: int = Field(ge=1)
    threads: int = Field(ge=1)
    shards: int = Field(ge=1)
