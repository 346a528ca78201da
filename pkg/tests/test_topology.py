import itertools
from collections import defaultdict

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.stats import binom

from relnet import reliability, topology
from relnet.exceptions import DomainError
from relnet.schemas.reliability import BlockModel, ChainModel, ConnectionLaw, InitialDistribution
from relnet.schemas.topology import Component, Topology
from relnet.topology import IndicatorPolynomial
from tests.conftest import finite_difference_rate


def x(name, step=None):
    return IndicatorPolynomial.monomial([(name, step)])


def two_component(paths):
    return Topology(label="two", components=[Component(id="A"), Component(id="B")], paths=paths)


def uniform_assignment(graph, edge, node):
    return {c.id: edge if c.kind == "edge" else node for c in graph.components}


def test_series_rule():
    poly = topology.build_indicator(two_component([["A", "B"]]))
    assert poly.terms == [(1, frozenset({("A", None), ("B", None)}))]


def test_parallel_rule():
    poly = topology.build_indicator(two_component([["A"], ["B"]]))
    assert poly == x("A") + x("B") - x("A") * x("B")


def test_multilinear_canonicalisation():
    assert x("A") * x("A") == x("A")
    poly = (1 - x("A")) * (1 - x("B")) * (x("A") + x("C"))
    assert IndicatorPolynomial(dict((m, c) for c, m in poly.terms)) == poly
    assert all(len(m) == len({v for v in m}) for _, m in poly.terms)
    assert len({m for _, m in poly.terms}) == len(poly.terms)


def test_partial_and_time_index():
    poly = x("A") * x("B") + x("C")
    assert poly.partial(("A", None)) == x("B")
    assert poly.partial(("D", None)) == IndicatorPolynomial()
    assert poly.at_time(2) == x("A", 2) * x("B", 2) + x("C", 2)


def test_square_closed_form(square):
    poly = topology.build_indicator(square)
    for e, n in itertools.product(np.linspace(0, 1, 20), repeat=2):
        expected = 2 * e ** 2 * n + e ** 3 * n ** 2 * (2 - 5 * e + 2 * e ** 2)
        assert topology.evaluate(poly, uniform_assignment(square, e, n)) == pytest.approx(expected, abs=1e-12)


def test_square_matches_enumeration(square, network):
    rng = np.random.default_rng(3)
    for graph in (square, network):
        poly = topology.build_indicator(graph)
        for _ in range(20):
            probabilities = {c: float(rng.uniform()) for c in graph.component_ids}
            assert topology.evaluate(poly, probabilities) == pytest.approx(
                topology.brute_force_probability(graph, probabilities), abs=1e-12
            )


def test_random_topologies_match_enumeration():
    rng = np.random.default_rng(5)
    for _ in range(20):
        size = int(rng.integers(2, 11))
        ids = [f"c{i}" for i in range(size)]
        paths = []
        for _ in range(int(rng.integers(1, 5))):
            length = int(rng.integers(1, size + 1))
            paths.append(list(rng.choice(ids, size=length, replace=False)))
        graph = Topology(label="random", components=[Component(id=c) for c in ids], paths=paths)
        poly = topology.build_indicator(graph)
        probabilities = {c: float(rng.uniform()) for c in ids}
        assert topology.evaluate(poly, probabilities) == pytest.approx(
            topology.brute_force_probability(graph, probabilities), abs=1e-12
        )
        assert topology.evaluate(poly, {c: 1.0 for c in ids}) == pytest.approx(1.0, abs=1e-12)
        assert topology.evaluate(poly, {c: 0.0 for c in ids}) == pytest.approx(0.0, abs=1e-12)
        for c in ids:
            raised = dict(probabilities, **{c: min(1.0, probabilities[c] + 0.1)})
            assert topology.evaluate(poly, raised) >= topology.evaluate(poly, probabilities) - 1e-12


def test_evaluate_rejects_bad_assignments(square):
    poly = topology.build_indicator(square)
    with pytest.raises(DomainError):
        topology.evaluate(poly, {"a": 0.5})
    with pytest.raises(DomainError):
        topology.evaluate(poly, uniform_assignment(square, 1.2, 1.0))


def test_evaluate_broadcasts_arrays(square):
    poly = topology.build_indicator(square)
    e = np.linspace(0, 1, 7)
    values = topology.evaluate(poly, uniform_assignment(square, e, 1.0))
    assert values.shape == (7,)
    assert values[-1] == pytest.approx(1.0)


def test_component_limit():
    ids = [f"c{i}" for i in range(31)]
    graph = Topology(label="big", components=[Component(id=c) for c in ids], paths=[ids])
    with pytest.raises(DomainError):
        topology.build_indicator(graph)


def test_invalid_topologies_rejected():
    with pytest.raises(ValidationError):
        Topology(label="bad", components=[Component(id="A")], paths=[["A", "B"]])
    with pytest.raises(ValidationError):
        Topology(label="bad", components=[Component(id="A")], paths=[])
    with pytest.raises(ValidationError):
        Topology(
            label="bad",
            components=[Component(id="A"), Component(id="B"), Component(id="C")],
            paths=[["A", "B"], ["C"]],
            symmetries=[{"A": "C", "C": "A"}],
        )


def test_network_survival_at_zero(network):
    model_a = BlockModel(multiplicity=3, law=ConnectionLaw(k=0.5))
    survivals, _ = topology.block_assignments(network, model_a)
    assert topology.network_survival(network, survivals, 0.0) == pytest.approx(1.0)

    model_b = BlockModel(multiplicity=6, law=ConnectionLaw(k=0.5), init=InitialDistribution(kind="binomial", p=0.5))
    survivals, _ = topology.block_assignments(network, model_b)
    offset = topology.network_survival(network, survivals, 0.0)
    edge_up = 1 - 0.5 ** 6
    expected = topology.brute_force_probability(network, uniform_assignment(network, edge_up, 1.0))
    assert offset < 1
    assert offset == pytest.approx(expected, abs=1e-12)


def test_network_outlives_chain(network):
    block = BlockModel(multiplicity=3, law=ConnectionLaw(k=0.5))
    survivals, _ = topology.block_assignments(network, block)
    t = np.linspace(0, 10, 101)
    chain = reliability.chain_survival(ChainModel.iid(block, 6), t)
    assert np.all(topology.network_survival(network, survivals, t) >= chain - 1e-15)


@pytest.mark.parametrize("t", [0.5, 1.0, 2.0])
def test_network_failure_rate_matches_finite_difference(network, t):
    block = BlockModel(multiplicity=3, law=ConnectionLaw(k=0.5), init=InitialDistribution(kind="binomial", p=0.8))
    survivals, rates = topology.block_assignments(network, block)
    survival = lambda s: topology.network_survival(network, survivals, s)
    assert topology.network_failure_rate(network, survivals, rates, t) == pytest.approx(
        finite_difference_rate(survival, t), rel=1e-5
    )


def test_chain_topology_rate_matches_chain(chain6):
    block = BlockModel(multiplicity=3, law=ConnectionLaw(k=0.5))
    survivals, rates = topology.block_assignments(chain6, block)
    chain = ChainModel.iid(block, 6)
    assert topology.network_survival(chain6, survivals, 1.2) == pytest.approx(reliability.chain_survival(chain, 1.2), rel=1e-12)
    assert topology.network_failure_rate(chain6, survivals, rates, 1.2) == pytest.approx(
        reliability.chain_failure_rate(chain, 1.2), rel=1e-12
    )


def test_chain_configurations_count():
    configurations = topology.enumerate_chain_configurations(6, 3, 0.7)
    assert len(configurations) == 28
    assert sum(c.count for c in configurations) == 3 ** 6
    total = sum(c.total_weight for c in configurations)
    assert total == pytest.approx((1 - 0.3 ** 3) ** 6, abs=1e-12)


def test_single_connection_chain():
    (configuration,) = topology.enumerate_chain_configurations(1, 1, 0.35)
    assert configuration.weight == pytest.approx(0.35)
    assert configuration.count == 1


def test_chain_configuration_weights_match_enumeration():
    u = 0.8
    aggregated = defaultdict(float)
    for state in itertools.product((0, 1), repeat=4):
        working = (state[0] + state[1], state[2] + state[3])
        if min(working) == 0:
            continue
        aggregated[tuple(sorted(working))] += np.prod([u if s else 1 - u for s in state])
    for configuration in topology.enumerate_chain_configurations(2, 2, u):
        key = tuple(sorted(configuration.multiplicities.values()))
        assert configuration.total_weight == pytest.approx(aggregated[key], abs=1e-12)
        assert configuration.weight == pytest.approx(np.prod(binom.pmf(key, 2, u)), abs=1e-12)


def test_network_has_five_configuration_classes(network):
    configurations = topology.enumerate_network_configurations(network, 0.8)
    assert len(configurations) == 5
    assert [c.count for c in configurations] == [2, 2, 4, 1, 1]
    assert set(configurations[-1].multiplicities) == set(network.edge_ids)
    assert len(configurations[-1].paths) == 4


@pytest.mark.parametrize("q", [0.8, 0.2, 0.55])
def test_network_configuration_weights_sum_to_indicator(network, q):
    configurations = topology.enumerate_network_configurations(network, q)
    poly = topology.build_indicator(network)
    expected = topology.evaluate(poly, uniform_assignment(network, q, 1.0))
    assert sum(c.total_weight for c in configurations) == pytest.approx(expected, abs=1e-12)


def test_single_edge_network():
    graph = Topology(label="edge", components=[Component(id="a")], paths=[["a"]])
    (configuration,) = topology.enumerate_network_configurations(graph, 0.4)
    assert configuration.weight == pytest.approx(0.4)


def test_symmetry_group_closure(network):
    group = topology.symmetry_group(network)
    assert len(group) == 4
    assert {c: c for c in network.component_ids} in group


def test_discover_paths_matches_declared(network):
    found = {frozenset(p) for p in topology.discover_paths(network)}
    assert found == {frozenset(p) for p in network.paths}


def test_discover_paths_needs_terminals(chain6):
    with pytest.raises(DomainError):
        topology.discover_paths(chain6)
