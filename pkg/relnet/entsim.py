"""Entanglement distribution with cut-off over frozen hardware configurations.

Every working connection of an edge tries to generate a link once per time
step; an edge holds a link from the first success among its connections. An
attempt completes at the first step T where some declared path has links on
all of its edges, and each link on that path decoheres from its creation
until T. Swaps are instantaneous and noiseless. Attempts that exceed the
cut-off are discarded and restarted.
"""
import logging
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.special import xlogy

from relnet.exceptions import DomainError
from relnet.schemas.entsim import AttemptOutcome, CutoffStatistics, KeyRateCurve, KeyRatePoint, ProtocolParams
from relnet.schemas.topology import Configuration
from relnet.settings import DEFAULT_SHARDS, SURVIVAL_TAIL
from relnet.topology import IndicatorPolynomial, evaluate
from relnet.utils.montecarlo import run_sharded, split_samples

logger = logging.getLogger(__name__)


def sample_segment_waiting_time(multiplicity: int, p_gen: float, rng: np.random.Generator, size=None):
    """Minimum over `multiplicity` geometric waiting times (support from 1), by inverse CDF."""
    if multiplicity < 1:
        raise DomainError(f"multiplicity must be at least 1, got {multiplicity}")
    if not 0 < p_gen <= 1:
        raise DomainError(f"p_gen must lie in (0, 1], got {p_gen}")
    shape = (multiplicity,) if size is None else (size, multiplicity)
    u = rng.random(shape)
    if p_gen == 1.0:
        times = np.ones(shape, dtype=np.int64)
    else:
        times = np.floor(np.log1p(-u) / np.log1p(-p_gen)).astype(np.int64) + 1
    waiting = times.min(axis=-1)
    return int(waiting) if size is None else waiting


def _edges(configuration: Configuration) -> List[str]:
    return list(configuration.multiplicities)


def _ranked_paths(configuration: Configuration) -> List[Tuple[str, ...]]:
    # fewest hops first, then declaration order
    order = sorted(range(len(configuration.paths)), key=lambda i: (len(configuration.paths[i]), i))
    return [tuple(configuration.paths[i]) for i in order]


def complete_attempts(
    configuration: Configuration, link_times: np.ndarray, params: ProtocolParams
) -> Tuple[np.ndarray, np.ndarray]:
    """Completion times T and visibilities W from per-edge link creation times.

    `link_times` has one row per attempt and one column per edge, in the
    order of `configuration.multiplicities`.
    """
    link_times = np.atleast_2d(link_times)
    column = {edge: i for i, edge in enumerate(_edges(configuration))}
    paths = _ranked_paths(configuration)
    if not paths:
        raise DomainError(f"configuration {configuration.id} has no usable path")
    completion = np.empty((link_times.shape[0], len(paths)), dtype=np.int64)
    aging = np.empty((link_times.shape[0], len(paths)), dtype=float)
    for j, path in enumerate(paths):
        times = link_times[:, [column[e] for e in path]]
        completion[:, j] = times.max(axis=1)
        aging[:, j] = (completion[:, j, None] - times).sum(axis=1)
    chosen = np.argmin(completion, axis=1)
    t = np.take_along_axis(completion, chosen[:, None], axis=1)[:, 0]
    ages = np.take_along_axis(aging, chosen[:, None], axis=1)[:, 0]
    w = np.exp(-ages * params.t_ts / params.t_coh)
    return t, w


def simulate_attempts(
    configuration: Configuration, params: ProtocolParams, size: int, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    """Uncut completion times and visibilities of `size` independent attempts."""
    edges = _edges(configuration)
    counts = np.array([configuration.multiplicities[e] for e in edges])
    if np.any(counts < 1):
        raise DomainError(f"configuration {configuration.id} has an edge without working connections")
    u = rng.random((size, int(counts.sum())))
    if params.p_gen == 1.0:
        per_connection = np.ones(u.shape, dtype=np.int64)
    else:
        per_connection = np.floor(np.log1p(-u) / np.log1p(-params.p_gen)).astype(np.int64) + 1
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
    link_times = np.minimum.reduceat(per_connection, offsets, axis=1)
    return complete_attempts(configuration, link_times, params)


def simulate_attempt(configuration: Configuration, params: ProtocolParams, rng: np.random.Generator) -> AttemptOutcome:
    t, w = simulate_attempts(configuration, params, 1, rng)
    if t[0] > params.t_cut:
        return AttemptOutcome(success=False)
    return AttemptOutcome(success=True, t=int(t[0]), w=float(w[0]))


def attempt_from_link_times(
    configuration: Configuration, link_times: Mapping[str, int], params: ProtocolParams
) -> AttemptOutcome:
    row = np.array([[link_times[e] for e in _edges(configuration)]], dtype=np.int64)
    t, w = complete_attempts(configuration, row, params)
    if t[0] > params.t_cut:
        return AttemptOutcome(success=False)
    return AttemptOutcome(success=True, t=int(t[0]), w=float(w[0]))


def swap_visibility(visibilities: Sequence[float]) -> float:
    return float(np.prod(np.asarray(visibilities, dtype=float)))


def fidelity(w):
    return (1.0 + 3.0 * np.asarray(w, dtype=float)) / 4.0


def decohered_visibility(w, age_steps, params: ProtocolParams):
    return np.asarray(w, dtype=float) * np.exp(-np.asarray(age_steps, dtype=float) * params.t_ts / params.t_coh)


def secret_key_fraction(w):
    """BB84 fraction 1 + (1-w) log2((1-w)/2) + (1+w) log2((1+w)/2), clamped at 0."""
    w = np.asarray(w, dtype=float)
    value = 1.0 + (xlogy(1.0 - w, (1.0 - w) / 2.0) + xlogy(1.0 + w, (1.0 + w) / 2.0)) / np.log(2.0)
    value = np.maximum(value, 0.0)
    return float(value) if value.ndim == 0 else value


def cutoff_statistics(t: np.ndarray, w: np.ndarray, t_cut: int, params: ProtocolParams) -> CutoffStatistics:
    """Restart statistics of uncut samples truncated at `t_cut`.

    <T> = t_cut (1 - p_cut) / p_cut + E[T | T <= t_cut]; only the final
    successful attempt contributes to <W>.
    """
    t = np.asarray(t)
    w = np.asarray(w, dtype=float)
    success = t <= t_cut
    n_success = int(success.sum())
    if n_success == 0:
        logger.debug("no successful attempt within t_cut=%d", t_cut)
        return CutoffStatistics(
            t_cut=t_cut, p_cut=0.0, mean_t_steps=np.inf, mean_t_seconds=np.inf,
            mean_w=0.0, mean_r=0.0, n_samples=t.size, n_success=0,
        )
    p_cut = n_success / t.size
    mean_t = t_cut * (1.0 - p_cut) / p_cut + float(t[success].mean())
    return CutoffStatistics(
        t_cut=t_cut,
        p_cut=p_cut,
        mean_t_steps=mean_t,
        mean_t_seconds=mean_t * params.t_ts,
        mean_w=float(w[success].mean()),
        mean_r=float(np.mean(secret_key_fraction(w[success]))),
        n_samples=t.size,
        n_success=n_success,
    )


def key_rate(mean_w: float, mean_t_seconds: float) -> float:
    """R = r(<W>) / <T> in bits per second."""
    if not np.isfinite(mean_t_seconds):
        return 0.0
    if mean_t_seconds <= 0:
        raise DomainError(f"mean waiting time must be positive, got {mean_t_seconds}")
    return secret_key_fraction(mean_w) / mean_t_seconds


def key_rate_point(stats: CutoffStatistics, params: ProtocolParams) -> KeyRatePoint:
    r = secret_key_fraction(stats.mean_w) if params.key_rate_mode == "mean-visibility" else stats.mean_r
    rate = r / stats.mean_t_seconds if stats.attainable else 0.0
    return KeyRatePoint(
        t_cut=stats.t_cut,
        p_cut=stats.p_cut,
        mean_t_steps=stats.mean_t_steps,
        mean_t_seconds=stats.mean_t_seconds,
        mean_w=stats.mean_w,
        r=r,
        rate=rate,
        n_samples=stats.n_samples,
    )


def sample_attempts(
    configuration: Configuration,
    params: ProtocolParams,
    *,
    stream: int = 0,
    shards: int = DEFAULT_SHARDS,
    threads: int = 1,
) -> Tuple[np.ndarray, np.ndarray]:
    """params.samples uncut attempts, reproducible for a given (seed, stream, shards)."""
    sizes = split_samples(params.samples, shards)
    results = run_sharded(
        lambda i, rng: simulate_attempts(configuration, params, sizes[i], rng),
        [params.seed, stream],
        shards,
        threads,
    )
    return np.concatenate([t for t, _ in results]), np.concatenate([w for _, w in results])


def configuration_curve(
    configuration: Configuration,
    params: ProtocolParams,
    t_cuts: Sequence[int],
    *,
    label: Optional[str] = None,
    stream: int = 0,
    shards: int = DEFAULT_SHARDS,
    threads: int = 1,
) -> KeyRateCurve:
    """Key rate against cut-off; one batch of uncut samples serves every t_cut."""
    t, w = sample_attempts(configuration, params, stream=stream, shards=shards, threads=threads)
    points = [key_rate_point(cutoff_statistics(t, w, int(t_cut), params), params) for t_cut in t_cuts]
    logger.info(
        "configuration %s: %d samples, best rate %.6g bit/s",
        configuration.id, t.size, max(p.rate for p in points),
    )
    return KeyRateCurve(
        label=label or configuration.id,
        t_cuts=[p.t_cut for p in points],
        rates=[p.rate for p in points],
        points=points,
    )


def average_key_rate(
    curves: Sequence[KeyRateCurve], weights: Sequence[float], *, label: str = "average", weighting: str = "unconditional"
) -> KeyRateCurve:
    """Sum_i weight_i R_i(t_cut); weights are total class probabilities, not renormalised."""
    if len(curves) != len(weights) or not curves:
        raise DomainError("need one weight per curve and at least one curve")
    t_cuts = curves[0].t_cuts
    if any(c.t_cuts != t_cuts for c in curves):
        raise DomainError("curves are evaluated on different t_cut grids")
    rates = np.zeros(len(t_cuts))
    for curve, weight in zip(curves, weights):
        rates += weight * np.asarray(curve.rates, dtype=float)
    return KeyRateCurve(label=label, weighting=weighting, t_cuts=list(t_cuts), rates=rates.tolist())


def optimize_cutoff(curve: KeyRateCurve) -> int:
    """Grid argmax of the rate; ties go to the smaller t_cut."""
    t_cuts, rates = curve.as_arrays()
    order = np.argsort(t_cuts, kind="stable")
    best = order[int(np.argmax(rates[order]))]
    if rates[best] <= 0:
        logger.warning("curve %s has no positive rate; returning the smallest cut-off", curve.label)
    return int(t_cuts[best])


def path_indicator(configuration: Configuration) -> IndicatorPolynomial:
    failing = IndicatorPolynomial.constant(1)
    for path in configuration.paths:
        failing = failing * (1 - IndicatorPolynomial.monomial((e, None) for e in path))
    return 1 - failing


def success_probability(configuration: Configuration, p_gen: float, t) -> float:
    """Exact P(T <= t): edges finish independently with P = 1 - (1 - p_gen)^(n t)."""
    t = np.asarray(t, dtype=float)
    assign = {
        edge: -np.expm1(n * t * np.log1p(-p_gen)) if p_gen < 1 else np.ones_like(t)
        for edge, n in configuration.multiplicities.items()
    }
    return evaluate(path_indicator(configuration), assign)


def mean_waiting_time(configuration: Configuration, p_gen: float, tail: float = SURVIVAL_TAIL) -> float:
    """E[T] without cut-off, sum over t >= 0 of P(T > t)."""
    total = 0.0
    start = 0
    block = 4096
    while True:
        steps = np.arange(start, start + block)
        survival = 1.0 - np.asarray(success_probability(configuration, p_gen, steps))
        total += float(survival.sum())
        if survival[-1] < tail:
            return total
        start += block
