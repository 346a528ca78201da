from typing import Dict, List, Literal, Optional, Tuple

from pydantic import Field, model_validator

from relnet.schemas.base import BaseSchema


class Component(BaseSchema):
    id: str
    kind: Literal["edge", "node"] = "edge"
    endpoints: Optional[Tuple[str, str]] = None


class Topology(BaseSchema):
    """Two-terminal topology with explicitly declared end-to-end paths.

    `symmetries` lists generators of the symmetry group as component
    permutations; identities may be omitted from a generator.
    """

    label: str
    components: List[Component] = Field(min_length=1)
    terminals: Optional[Tuple[str, str]] = None
    paths: List[List[str]] = Field(min_length=1)
    symmetries: List[Dict[str, str]] = []

    @model_validator(mode="after")
    def check_structure(self):
        ids = [c.id for c in self.components]
        if len(set(ids)) != len(ids):
            raise ValueError("component ids must be unique")
        declared = set(ids)
        for index, path in enumerate(self.paths):
            if not path:
                raise ValueError(f"path {index} is empty")
            unknown = [c for c in path if c not in declared]
            if unknown:
                raise ValueError(f"path {index} uses undeclared components {unknown}")
            if len(set(path)) != len(path):
                raise ValueError(f"path {index} visits a component twice")
        kinds = {c.id: c.kind for c in self.components}
        path_sets = {frozenset(p) for p in self.paths}
        for index, generator in enumerate(self.symmetries):
            unknown = [c for c in list(generator) + list(generator.values()) if c not in declared]
            if unknown:
                raise ValueError(f"symmetry {index} uses undeclared components {unknown}")
            if len(set(generator.values())) != len(generator) or set(generator) != set(generator.values()):
                raise ValueError(f"symmetry {index} is not a permutation")
            if any(kinds[a] != kinds[b] for a, b in generator.items()):
                raise ValueError(f"symmetry {index} maps an edge onto a node")
            mapped = {frozenset(generator.get(c, c) for c in p) for p in path_sets}
            if mapped != path_sets:
                raise ValueError(f"symmetry {index} does not preserve the path set")
        return self

    @property
    def component_ids(self) -> List[str]:
        return [c.id for c in self.components]

    @property
    def edge_ids(self) -> List[str]:
        return [c.id for c in self.components if c.kind == "edge"]

    @property
    def node_ids(self) -> List[str]:
        return [c.id for c in self.components if c.kind == "node"]


class ChainLayout(BaseSchema):
    """Shorthand for a serial chain of `chain` edges."""

    chain: int = Field(ge=1)


class Configuration(BaseSchema):
    id: str
    multiplicities: Dict[str, int]
    paths: List[Tuple[str, ...]]
    weight: float = Field(ge=0, le=1)
    count: int = Field(1, ge=1)

    @property
    def total_weight(self) -> float:
        return self.weight * self.count
