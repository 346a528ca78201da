"""Indicator-function algebra for small two-terminal topologies."""
import itertools
import logging
import math
from collections import Counter, defaultdict
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from scipy.stats import binom

from relnet import reliability
from relnet.exceptions import DomainError, NumericalError
from relnet.schemas.reliability import BlockModel
from relnet.schemas.topology import ChainLayout, Component, Configuration, Topology
from relnet.settings import MAX_COMPONENTS, MAX_ENUMERATED_EDGES

logger = logging.getLogger(__name__)

Variable = Tuple[str, Optional[int]]
Monomial = FrozenSet[Variable]
TimeFunction = Callable[[object], object]


def _variable_key(variable: Variable):
    component, step = variable
    return component, -1 if step is None else step


def _monomial_key(monomial: Monomial):
    return len(monomial), sorted(_variable_key(v) for v in monomial)


class IndicatorPolynomial:
    """Signed multilinear polynomial over component indicators.

    Monomials are sets of variables, so x*x = x holds by construction; terms
    with a zero coefficient are dropped. Instances are immutable.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Optional[Mapping[Iterable[Variable], int]] = None):
        canonical: Dict[Monomial, int] = defaultdict(int)
        for monomial, coefficient in (terms or {}).items():
            canonical[frozenset(monomial)] += int(coefficient)
        self._terms = {m: c for m, c in canonical.items() if c != 0}

    @classmethod
    def constant(cls, value: int) -> "IndicatorPolynomial":
        return cls({frozenset(): value})

    @classmethod
    def monomial(cls, variables: Iterable[Variable]) -> "IndicatorPolynomial":
        return cls({frozenset(variables): 1})

    @property
    def terms(self) -> List[Tuple[int, Monomial]]:
        return [(self._terms[m], m) for m in sorted(self._terms, key=_monomial_key)]

    @property
    def variables(self) -> FrozenSet[Variable]:
        return frozenset(itertools.chain.from_iterable(self._terms))

    def __len__(self) -> int:
        return len(self._terms)

    def _coerce(self, other) -> "IndicatorPolynomial":
        if isinstance(other, IndicatorPolynomial):
            return other
        if isinstance(other, int):
            return IndicatorPolynomial.constant(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        merged = Counter(self._terms)
        merged.update(other._terms)
        return IndicatorPolynomial(merged)

    __radd__ = __add__

    def __neg__(self):
        return IndicatorPolynomial({m: -c for m, c in self._terms.items()})

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        product: Dict[Monomial, int] = defaultdict(int)
        for (m1, c1), (m2, c2) in itertools.product(self._terms.items(), other._terms.items()):
            product[m1 | m2] += c1 * c2
        return IndicatorPolynomial(product)

    __rmul__ = __mul__

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self._terms == other._terms

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def __repr__(self):
        if not self._terms:
            return "IndicatorPolynomial(0)"
        parts = []
        for coefficient, monomial in self.terms:
            names = "*".join(
                c if t is None else f"{c}@{t}" for c, t in sorted(monomial, key=_variable_key)
            ) or "1"
            parts.append(f"{coefficient:+d}*{names}")
        return f"IndicatorPolynomial({' '.join(parts)})"

    def partial(self, variable: Variable) -> "IndicatorPolynomial":
        """Derivative with respect to one indicator (exact for multilinear forms)."""
        return IndicatorPolynomial(
            {m - {variable}: c for m, c in self._terms.items() if variable in m}
        )

    def at_time(self, step: int) -> "IndicatorPolynomial":
        return IndicatorPolynomial(
            {frozenset((component, step) for component, _ in m): c for m, c in self._terms.items()}
        )

    def evaluate(self, assign: Mapping[Union[Variable, str], object]):
        return evaluate(self, assign)


def _lookup(assign: Mapping, variable: Variable):
    if variable in assign:
        return assign[variable]
    component, step = variable
    if step is None and component in assign:
        return assign[component]
    raise DomainError(f"variable {component!r} (time {step}) is not assigned")


def evaluate(poly: IndicatorPolynomial, assign: Mapping[Union[Variable, str], object]):
    """Expectation of the indicator under independent component probabilities.

    Values may be floats or equally shaped numpy arrays; plain component ids
    stand for untimed variables.
    """
    values = {v: np.asarray(_lookup(assign, v), dtype=float) for v in poly.variables}
    for variable, value in values.items():
        if np.any(value < 0) or np.any(value > 1):
            raise DomainError(f"probability for {variable[0]!r} outside [0, 1]")
    total = 0.0
    for coefficient, monomial in poly.terms:
        term = float(coefficient)
        for variable in monomial:
            term = term * values[variable]
        total = total + term
    return float(total) if np.ndim(total) == 0 else total


def build_indicator(topology: Topology) -> IndicatorPolynomial:
    """1 - prod_paths (1 - prod_{c in path} x_c), expanded with x^2 = x."""
    if len(topology.components) > MAX_COMPONENTS:
        raise DomainError(
            f"topology {topology.label!r} has {len(topology.components)} components; "
            f"indicator expansion is limited to {MAX_COMPONENTS}"
        )
    failing = IndicatorPolynomial.constant(1)
    for path in topology.paths:
        failing = failing * (1 - IndicatorPolynomial.monomial((c, None) for c in path))
    poly = 1 - failing
    logger.debug("indicator of %s has %d terms", topology.label, len(poly))
    return poly


def brute_force_probability(topology: Topology, probabilities: Mapping[str, float]) -> float:
    """Enumerate all 2^m component states; used as an oracle for `evaluate`."""
    ids = topology.component_ids
    paths = [frozenset(p) for p in topology.paths]
    total = 0.0
    for state in itertools.product((False, True), repeat=len(ids)):
        working = {c for c, up in zip(ids, state) if up}
        if any(p <= working for p in paths):
            weight = 1.0
            for c, up in zip(ids, state):
                weight *= probabilities[c] if up else 1.0 - probabilities[c]
            total += weight
    return total


def block_assignments(
    topology: Topology, edge_block: BlockModel, node_survival: float = 1.0
) -> Tuple[Dict[str, TimeFunction], Dict[str, TimeFunction]]:
    """Survival and failure-rate functions per component: edges are blocks, nodes constant."""
    survivals: Dict[str, TimeFunction] = {}
    rates: Dict[str, TimeFunction] = {}
    for component in topology.components:
        if component.kind == "edge":
            survivals[component.id] = reliability.block_survival_function(edge_block)
            rates[component.id] = reliability.block_failure_rate_function(edge_block)
        else:
            survivals[component.id] = lambda t: np.full(np.shape(t), node_survival) if np.ndim(t) else node_survival
            rates[component.id] = lambda t: np.zeros(np.shape(t)) if np.ndim(t) else 0.0
    return survivals, rates


def _assignment(topology: Topology, functions: Mapping[str, TimeFunction], t) -> Dict[Variable, object]:
    missing = [c for c in topology.component_ids if c not in functions]
    if missing:
        raise DomainError(f"no time function given for components {missing}")
    return {(c, None): functions[c](t) for c in topology.component_ids}


def network_survival(topology: Topology, survivals: Mapping[str, TimeFunction], t):
    return evaluate(build_indicator(topology), _assignment(topology, survivals, t))


def network_failure_rate(
    topology: Topology,
    survivals: Mapping[str, TimeFunction],
    rates: Mapping[str, TimeFunction],
    t,
):
    """-(dS/dt)/S by the chain rule: dx_c/dt = -mu_c x_c for every component."""
    poly = build_indicator(topology)
    assign = _assignment(topology, survivals, t)
    hazards = _assignment(topology, rates, t)
    survival = np.asarray(evaluate(poly, assign))
    if np.any(survival <= 0):
        raise NumericalError(f"survival of {topology.label!r} underflows to 0; failure rate diverges")
    flow = 0.0
    for variable in poly.variables:
        sensitivity = evaluate(poly.partial(variable), assign)
        flow = flow + np.asarray(sensitivity) * np.asarray(hazards[variable]) * np.asarray(assign[variable])
    rate = flow / survival
    return float(rate) if np.ndim(rate) == 0 else rate


def chain_topology(length: int, label: Optional[str] = None) -> Topology:
    edges = [f"e{i + 1}" for i in range(length)]
    return Topology(
        label=label or f"chain-{length}",
        components=[Component(id=e) for e in edges],
        paths=[edges],
    )


def square_topology() -> Topology:
    """Square between Delft and T with diagonal c through the nodes R and S."""
    return Topology(
        label="square",
        components=[
            Component(id="a", endpoints=("Delft", "R")),
            Component(id="b", endpoints=("Delft", "S")),
            Component(id="c", endpoints=("R", "S")),
            Component(id="d", endpoints=("R", "T")),
            Component(id="e", endpoints=("S", "T")),
            Component(id="R", kind="node"),
            Component(id="S", kind="node"),
        ],
        terminals=("Delft", "T"),
        paths=[["a", "R", "d"], ["a", "R", "c", "S", "e"], ["b", "S", "e"], ["b", "S", "c", "R", "d"]],
        symmetries=[{"a": "b", "b": "a", "d": "e", "e": "d", "R": "S", "S": "R"}, {"a": "d", "d": "a", "b": "e", "e": "b"}],
    )


def square_network_topology() -> Topology:
    """Five-node Delft-Groningen abstraction: the square in series with node T and link f."""
    square = square_topology()
    return Topology(
        label="square-network",
        components=square.components
        + [Component(id="T", kind="node"), Component(id="f", endpoints=("T", "Groningen"))],
        terminals=("Delft", "Groningen"),
        paths=[p + ["T", "f"] for p in square.paths],
        symmetries=square.symmetries,
    )


def resolve_topology(layout: Union[Topology, ChainLayout], name: str) -> Topology:
    if isinstance(layout, ChainLayout):
        return chain_topology(layout.chain, label=name)
    return layout


def discover_paths(topology: Topology) -> List[List[str]]:
    """Simple terminal-to-terminal paths over declared edge endpoints.

    Output lists edges interleaved with the declared node components they
    pass through; declared paths stay authoritative.
    """
    if topology.terminals is None:
        raise DomainError(f"topology {topology.label!r} declares no terminals")
    graph = nx.MultiGraph()
    for component in topology.components:
        if component.kind != "edge":
            continue
        if component.endpoints is None:
            raise DomainError(f"edge {component.id!r} declares no endpoints")
        graph.add_edge(*component.endpoints, key=component.id)
    source, target = topology.terminals
    if source not in graph or target not in graph:
        return []
    nodes = set(topology.node_ids)
    paths = []
    for edge_path in nx.all_simple_edge_paths(graph, source, target):
        components: List[str] = []
        position = source
        for u, v, key in edge_path:
            nxt = v if u == position else u
            components.append(key)
            if nxt in nodes:
                components.append(nxt)
            position = nxt
        paths.append(components)
    return paths


def _multinomial(counts: Iterable[int]) -> int:
    counts = list(counts)
    result = math.factorial(sum(counts))
    for c in counts:
        result //= math.factorial(c)
    return result


def enumerate_chain_configurations(
    length: int,
    multiplicity: int,
    up_probability: float,
    block_distribution: Optional[Sequence[float]] = None,
) -> List[Configuration]:
    """Functional multiplicity multisets of an M-edge chain, up to edge permutation.

    `block_distribution[n]` overrides the binomial probability that a block
    has exactly n working connections.
    """
    if block_distribution is None:
        block_distribution = binom.pmf(np.arange(multiplicity + 1), multiplicity, up_probability)
    edges = [f"e{i + 1}" for i in range(length)]
    configurations = []
    for index, combo in enumerate(itertools.combinations_with_replacement(range(1, multiplicity + 1), length)):
        weight = float(np.prod([block_distribution[n] for n in combo]))
        configurations.append(
            Configuration(
                id=str(index + 1),
                multiplicities=dict(zip(edges, combo)),
                paths=[tuple(edges)],
                weight=min(max(weight, 0.0), 1.0),
                count=_multinomial(Counter(combo).values()),
            )
        )
    return configurations


def symmetry_group(topology: Topology) -> List[Dict[str, str]]:
    """Closure of the declared generators as full component permutations."""
    ids = topology.component_ids
    identity = tuple(ids)
    generators = [tuple(g.get(c, c) for c in ids) for g in topology.symmetries]
    index = {c: i for i, c in enumerate(ids)}
    seen = {identity}
    frontier = [identity]
    while frontier:
        current = frontier.pop()
        for generator in generators:
            composed = tuple(generator[index[c]] for c in current)
            if composed not in seen:
                seen.add(composed)
                frontier.append(composed)
    return [dict(zip(ids, image)) for image in sorted(seen)]


def _edge_paths(topology: Topology) -> List[Tuple[str, ...]]:
    edges = set(topology.edge_ids)
    return [tuple(c for c in path if c in edges) for path in topology.paths]


def enumerate_network_configurations(topology: Topology, up_probability: float) -> List[Configuration]:
    """Functional edge configurations up to the declared symmetry.

    Each working edge subset is reduced to the union of the declared paths
    it fully contains; nodes count as working. `weight` is the probability
    of one member of the class and `count` the class size.
    """
    edges = topology.edge_ids
    if len(edges) > MAX_ENUMERATED_EDGES:
        raise DomainError(f"{len(edges)} edges exceed the enumeration limit of {MAX_ENUMERATED_EDGES}")
    order = {e: i for i, e in enumerate(edges)}
    paths = _edge_paths(topology)
    effective: Dict[FrozenSet[str], float] = defaultdict(float)
    for state in itertools.product((False, True), repeat=len(edges)):
        working = {e for e, up in zip(edges, state) if up}
        usable = [p for p in paths if set(p) <= working]
        if not usable:
            continue
        up = len(working)
        effective[frozenset(itertools.chain.from_iterable(usable))] += (
            up_probability ** up * (1.0 - up_probability) ** (len(edges) - up)
        )
    group = symmetry_group(topology)

    def canonical(subset: FrozenSet[str]) -> Tuple[str, ...]:
        images = (tuple(sorted((g[e] for e in subset), key=order.get)) for g in group)
        return min(images, key=lambda image: [order[e] for e in image])

    classes: Dict[Tuple[str, ...], List[FrozenSet[str]]] = defaultdict(list)
    for subset in effective:
        classes[canonical(subset)].append(subset)
    configurations = []
    ranked = sorted(classes, key=lambda rep: (len(rep), [order[e] for e in rep]))
    for index, representative in enumerate(ranked):
        members = classes[representative]
        orbit = {frozenset(g[e] for e in representative) for g in group}
        total = sum(effective[m] for m in members)
        configurations.append(
            Configuration(
                id=str(index + 1),
                multiplicities={e: 1 for e in representative},
                paths=[p for p in paths if set(p) <= set(representative)],
                weight=min(total / len(orbit), 1.0),
                count=len(orbit),
            )
        )
    logger.debug("%s: %d functional configuration classes", topology.label, len(configurations))
    return configurations
