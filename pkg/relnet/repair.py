"""Temporal statistics of the break-and-repair renewal model.

A connection breaks in each functional step with probability p_down and is
then broken for exactly tau steps; it may break again right after repair.
Windows are sampled stationarily, i.e. the window start is uniform over a
renewal cycle of mean length 1/p_down - 1 + tau. Analytic results cover
windows of at most three steps; longer windows go through the Monte Carlo
estimator.
"""
import itertools
import logging
from collections import defaultdict
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import comb, rel_entr
from scipy.stats import binom

from relnet.exceptions import ConvergenceError, DomainError, NumericalError, UnsupportedPatternError
from relnet.schemas.experiment import Weighting
from relnet.schemas.repair import JointDistribution3, MonteCarloEstimate, RepairSpec, TemporalPattern
from relnet.schemas.topology import Configuration, Topology
from relnet.settings import ANALYTIC_WINDOW, DEFAULT_SHARDS, IPF_MAX_SWEEPS, IPF_TOL
from relnet.topology import IndicatorPolynomial, build_indicator, enumerate_chain_configurations, evaluate
from relnet.utils.montecarlo import batch_means, run_sharded, split_samples

logger = logging.getLogger(__name__)

PatternLike = Union[str, TemporalPattern]

SIGN_PATTERNS_3 = tuple("".join(bits) for bits in itertools.product("-+", repeat=3))


def p_eff_broken(spec: RepairSpec) -> float:
    """Stationary probability that a connection is broken at a random step."""
    return spec.tau / spec.cycle_length


def consecutive_broken(spec: RepairSpec, t: int) -> float:
    """m(t): probability of t consecutive broken steps, valid for 1 <= t <= tau."""
    if t < 1:
        raise DomainError(f"window length must be at least 1, got {t}")
    if t > spec.tau:
        raise DomainError(f"m(t) needs t <= tau (t={t}, tau={spec.tau}); use the Monte Carlo estimator")
    return p_eff_broken(spec) * (1.0 - (t - 1) * (1.0 - spec.p_down) / spec.tau)


def broken_functional_broken(spec: RepairSpec) -> float:
    """Probability of the single-connection pattern '-+-': one functional step between two repairs."""
    return (1.0 - spec.p_down) * spec.p_down / spec.cycle_length


def broken_wildcard_broken(spec: RepairSpec) -> float:
    return broken_functional_broken(spec) + consecutive_broken(spec, 3)


def average_uptime(spec: RepairSpec, multiplicity: int, length: int) -> float:
    """u = [1 - p_eff^N]^M for a chain of M blocks with N connections each."""
    return (1.0 - p_eff_broken(spec) ** multiplicity) ** length


def _steps(spec: RepairSpec, pattern: PatternLike) -> str:
    steps = pattern.steps if isinstance(pattern, TemporalPattern) else TemporalPattern(steps=pattern).steps
    limit = min(ANALYTIC_WINDOW, spec.tau)
    if len(steps) > limit:
        raise UnsupportedPatternError(
            f"pattern {steps!r} is longer than the analytic window of {limit} steps "
            f"(tau={spec.tau}); use estimate_pattern_probabilities instead"
        )
    return steps


def _connection_broken(spec: RepairSpec, steps: str) -> float:
    # steps over {'-', '*'}; leading and trailing wildcards drop out by stationarity
    core = steps.strip("*")
    if not core:
        return 1.0
    if "*" not in core:
        return consecutive_broken(spec, len(core))
    if core == "-*-":
        return broken_wildcard_broken(spec)
    raise UnsupportedPatternError(f"no closed form for the broken pattern {steps!r}")


def block_pattern_probability(spec: RepairSpec, multiplicity: int, pattern: PatternLike) -> float:
    """Probability that a block of N independent connections shows `pattern`.

    A block is broken iff all its connections are, so patterns over {-, *}
    are the single-connection value to the power N. Every '+' is resolved by
    inclusion-exclusion, which reproduces the marginal recursion
    p(+-) = p(-) - p(--), p(+-+) = p(+-) - p(+--) and so on.
    """
    if multiplicity < 1:
        raise DomainError(f"multiplicity must be at least 1, got {multiplicity}")
    steps = _steps(spec, pattern)
    plus = [i for i, s in enumerate(steps) if s == "+"]
    total = 0.0
    for size in range(len(plus) + 1):
        for broken in itertools.combinations(plus, size):
            variant = "".join(
                "-" if i in broken else ("*" if s == "+" else s) for i, s in enumerate(steps)
            )
            total += (-1) ** size * _connection_broken(spec, variant) ** multiplicity
    # cancellation leaves rounding noise around exact zeros
    return min(max(total, 0.0), 1.0)


def connection_pattern_probability(spec: RepairSpec, pattern: PatternLike) -> float:
    return block_pattern_probability(spec, 1, pattern)


def temporal_indicator(indicator: IndicatorPolynomial, pattern: str) -> IndicatorPolynomial:
    """Time-indexed product: x at '+' steps, (1 - x) at '-' steps, nothing at '*'."""
    product = IndicatorPolynomial.constant(1)
    for step, symbol in enumerate(pattern, start=1):
        if symbol == "+":
            product = product * indicator.at_time(step)
        elif symbol == "-":
            product = product * (1 - indicator.at_time(step))
    return product


def system_pattern_probability(
    system: Topology,
    spec: RepairSpec,
    multiplicity: int,
    pattern: PatternLike,
    *,
    indicator: Optional[IndicatorPolynomial] = None,
) -> float:
    """Probability that the whole system shows `pattern` in consecutive steps.

    The same block at different steps is correlated, so each monomial is
    grouped by component and evaluated as one block pattern with '+' at the
    monomial's time indices. Nodes never break in this model.
    """
    steps = _steps(spec, pattern)
    expanded = temporal_indicator(indicator or build_indicator(system), steps)
    nodes = set(system.node_ids)
    block_values: Dict[FrozenSet, float] = {}
    total = 0.0
    for coefficient, monomial in expanded.terms:
        times = defaultdict(set)
        for component, step in monomial:
            if component not in nodes:
                times[component].add(step)
        value = 1.0
        for component_times in times.values():
            key = frozenset(component_times)
            if key not in block_values:
                block_pattern = "".join("+" if i in key else "*" for i in range(1, len(steps) + 1))
                block_values[key] = block_pattern_probability(spec, multiplicity, block_pattern)
            value *= block_values[key]
        total += coefficient * value
    return min(max(total, 0.0), 1.0)


def build_joint_distribution(system: Topology, spec: RepairSpec, multiplicity: int) -> JointDistribution3:
    indicator = build_indicator(system)
    table = {
        pattern: system_pattern_probability(system, spec, multiplicity, pattern, indicator=indicator)
        for pattern in SIGN_PATTERNS_3
    }
    return JointDistribution3.from_patterns(table)


def _moments(joint: JointDistribution3) -> Dict[str, float]:
    p = joint.as_array()
    return {
        "a": p[1].sum(),
        "b": p[:, 1].sum(),
        "c": p[:, :, 1].sum(),
        "ab": p[1, 1].sum(),
        "ac": p[1, :, 1].sum(),
        "bc": p[:, 1, 1].sum(),
        "abc": p[1, 1, 1],
    }


def temporal_correlation(joint: JointDistribution3, steps: Tuple[int, int] = (1, 2)) -> float:
    names = {1: "a", 2: "b", 3: "c"}
    if len(steps) != 2 or steps[0] == steps[1] or any(s not in names for s in steps):
        raise DomainError(f"steps must be two distinct indices out of 1, 2, 3, got {steps}")
    first, second = sorted(names[s] for s in steps)
    moments = _moments(joint)
    mean_1, mean_2 = moments[first], moments[second]
    variance = mean_1 * (1.0 - mean_1) * mean_2 * (1.0 - mean_2)
    if variance <= 1e-30:
        raise NumericalError("correlation is undefined: the system state does not fluctuate")
    return float((moments[first + second] - mean_1 * mean_2) / np.sqrt(variance))


def joint_cumulant(joint: JointDistribution3, *, signed: bool = False) -> float:
    """Third joint cumulant of (S1, S2, S3); its magnitude unless `signed`."""
    m = _moments(joint)
    cumulant = (
        m["abc"] - m["a"] * m["bc"] - m["b"] * m["ac"] - m["c"] * m["ab"] + 2.0 * m["a"] * m["b"] * m["c"]
    )
    return float(cumulant if signed else abs(cumulant))


def _pairwise_marginals(q: np.ndarray) -> List[np.ndarray]:
    return [q.sum(axis=2), q.sum(axis=1), q.sum(axis=0)]


def pairwise_projection(
    joint: JointDistribution3, *, tol: float = IPF_TOL, max_sweeps: int = IPF_MAX_SWEEPS
) -> np.ndarray:
    """Closest two-body distribution by iterative proportional fitting from uniform."""
    target = joint.as_array()
    marginals = _pairwise_marginals(target)
    q = np.full((2, 2, 2), 1.0 / 8.0)
    expand = [lambda r: r[:, :, None], lambda r: r[:, None, :], lambda r: r[None, :, :]]
    for sweep in range(1, max_sweeps + 1):
        for axis, (marginal, lift) in enumerate(zip(marginals, expand)):
            current = q.sum(axis=2 - axis)
            ratio = np.divide(marginal, current, out=np.zeros_like(marginal), where=current > 0)
            q = q * lift(ratio)
        deviation = max(np.max(np.abs(m - c)) for m, c in zip(marginals, _pairwise_marginals(q)))
        if deviation < tol:
            logger.debug("IPF converged after %d sweeps (deviation %.2g)", sweep, deviation)
            return q
    raise ConvergenceError(f"IPF did not reach tolerance {tol:g} within {max_sweeps} sweeps")


def d3_multi_information(joint: JointDistribution3, **kwargs) -> float:
    """D(P || Q*) in bits, Q* the pairwise projection of P."""
    q = pairwise_projection(joint, **kwargs)
    divergence = float(np.sum(rel_entr(joint.as_array(), q)) / np.log(2.0))
    return max(divergence, 0.0)


def correlation_measures(system: Topology, spec: RepairSpec, multiplicity: int) -> Dict[str, float]:
    return joint_measures(build_joint_distribution(system, spec, multiplicity))


def joint_measures(joint: JointDistribution3) -> Dict[str, float]:
    return {
        "uptime": joint.pattern("+**"),
        "cor_12": temporal_correlation(joint, (1, 2)),
        "cor_13": temporal_correlation(joint, (1, 3)),
        "c3": joint_cumulant(joint),
        "d3": d3_multi_information(joint),
    }


def condition_chain_configurations(
    length: int, multiplicity: int, spec: RepairSpec, weighting: Weighting = "unconditional"
) -> List[Configuration]:
    """Chain configurations weighted by the chain state in the previous step.

    Weights are P(configuration now | chain functional or broken before).
    Non-functional configurations are omitted, so weights sum to the
    conditional probability of working now rather than to 1.
    """
    broken = p_eff_broken(spec)
    up = 1.0 - broken
    counts = np.arange(multiplicity + 1)
    now = binom.pmf(counts, multiplicity, up)
    if weighting == "unconditional":
        return enumerate_chain_configurations(length, multiplicity, up, block_distribution=now)
    if weighting not in ("conditioned-functional", "conditioned-broken"):
        raise DomainError(f"unknown weighting {weighting!r}")
    # per block: exactly n working now while all N were broken one step before
    broken_broken = consecutive_broken(spec, 2)
    broken_up = broken - broken_broken
    after_outage = comb(multiplicity, counts) * broken_up ** counts * broken_broken ** (multiplicity - counts)
    after_working = now - after_outage
    chain_up = average_uptime(spec, multiplicity, length)
    configurations = []
    for configuration in enumerate_chain_configurations(length, multiplicity, up):
        combo = list(configuration.multiplicities.values())
        joint_now = float(np.prod(now[combo]))
        joint_after_working = float(np.prod(after_working[combo]))
        if weighting == "conditioned-functional":
            weight = joint_after_working / chain_up
        else:
            weight = (joint_now - joint_after_working) / (1.0 - chain_up)
        configurations.append(configuration.model_copy(update={"weight": min(max(weight, 0.0), 1.0)}))
    return configurations


def simulate_connection_states(spec: RepairSpec, steps: int, rng: np.random.Generator) -> np.ndarray:
    """Stationary functional/broken trajectory of one connection, True = functional.

    Cycles of (geometric - 1) functional steps followed by tau broken steps,
    with a burn-in of 100 (1/p_down + tau) steps discarded.
    """
    burn_in = int(100 * (1.0 / spec.p_down + spec.tau))
    total = burn_in + steps
    chunks = []
    produced = 0
    while produced < total:
        cycles = int(1.2 * (total - produced) / spec.cycle_length) + 16
        functional = rng.geometric(spec.p_down, size=cycles) - 1
        runs = np.column_stack([functional, np.full(cycles, spec.tau)]).ravel()
        chunk = np.repeat(np.tile([True, False], cycles), runs)
        chunks.append(chunk)
        produced += chunk.size
    return np.concatenate(chunks)[burn_in:total]


def _pattern_name(index: int, window: int) -> str:
    return "".join("+" if bit == "1" else "-" for bit in format(index, f"0{window}b"))


def estimate_pattern_probabilities(
    system: Topology,
    spec: RepairSpec,
    multiplicity: int,
    window: int,
    windows: int,
    seed: Union[int, Sequence[int]],
    *,
    shards: int = DEFAULT_SHARDS,
    threads: int = 1,
) -> Dict[str, MonteCarloEstimate]:
    """Monte Carlo frequencies of every sign pattern of `window` consecutive steps.

    Each shard simulates its own trajectories; standard errors are batch
    means across shards since overlapping windows are correlated.
    """
    if window < 1:
        raise DomainError(f"window must be at least 1, got {window}")
    if windows < shards:
        raise DomainError(f"need at least one window per shard ({windows} < {shards})")
    indicator = build_indicator(system)
    per_shard = split_samples(windows, shards)

    def task(index: int, rng: np.random.Generator) -> np.ndarray:
        count = per_shard[index]
        steps = count + window - 1
        assign = {}
        for component in system.components:
            if component.kind == "node":
                assign[component.id] = 1.0
                continue
            states = [simulate_connection_states(spec, steps, rng) for _ in range(multiplicity)]
            assign[component.id] = np.any(states, axis=0).astype(float)
        functional = (np.asarray(evaluate(indicator, assign)) > 0.5).astype(np.int64)
        codes = np.zeros(count, dtype=np.int64)
        for offset in range(window):
            codes = 2 * codes + functional[offset:offset + count]
        return np.bincount(codes, minlength=2 ** window) / count

    frequencies = run_sharded(task, seed, shards, threads)
    mean, stderr = batch_means(frequencies, weights=per_shard)
    logger.info("estimated %d patterns of %s from %d windows", 2 ** window, system.label, windows)
    return {
        _pattern_name(i, window): MonteCarloEstimate(mean=float(mean[i]), stderr=float(stderr[i]), samples=windows)
        for i in range(2 ** window)
    }


def joint_distribution_rows(joint: JointDistribution3) -> List[Tuple[str, float]]:
    """Eight (pattern, probability) rows for CSV export."""
    return list(joint.rows())
