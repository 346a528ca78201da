"""Closed-form reliability of multiplexed connections, blocks and chains.

Every survival and failure-rate function accepts a scalar time or a numpy
array of times and returns the same shape.
"""
import logging
from typing import Callable, Dict, Literal

import numpy as np
from scipy import integrate, optimize
from scipy.stats import binom

from relnet.exceptions import ConvergenceError, DomainError, NumericalError
from relnet.schemas.reliability import BlockModel, ChainModel, ConnectionLaw, InitialDistribution
from relnet.settings import MAX_MULTIPLICITY, MTTF_ABS_TOL, MTTF_HORIZON, SURVIVAL_TAIL

logger = logging.getLogger(__name__)

Criterion = Literal["mttf", "initial", "both"]
SurvivalFunction = Callable[[float], float]


def _times(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("time must be nonnegative")
    return t


def _shaped(values):
    return float(values) if np.ndim(values) == 0 else values


def _check_flux(n: int, flux: int) -> None:
    if n < 1:
        raise DomainError(f"multiplicity must be at least 1, got {n}")
    if not 1 <= flux <= n:
        raise DomainError(f"flux must satisfy 1 <= flux <= N, got flux={flux}, N={n}")


def connection_survival(law: ConnectionLaw, t):
    """S(1, k, t) = e^{-kt} of a single exponentially failing connection."""
    return _shaped(np.exp(-law.k * _times(t)))


def block_survival_perfect(n: int, flux: int, law: ConnectionLaw, t):
    """Probability that at least `flux` of `n` initially working connections survive t.

    Equals the upper binomial tail sum_{i=0}^{n-flux} C(n,i)(1-a)^i a^(n-i)
    with a = e^{-kt}.
    """
    _check_flux(n, flux)
    alpha = np.exp(-law.k * _times(t))
    return _shaped(binom.sf(flux - 1, n, alpha))


def block_failure_rate_perfect(n: int, flux: int, law: ConnectionLaw, t):
    """Hazard k * flux * C(n,flux) (1-a)^(n-flux) a^flux / S of a perfect-start block."""
    _check_flux(n, flux)
    alpha = np.exp(-law.k * _times(t))
    survival = binom.sf(flux - 1, n, alpha)
    if np.any(survival <= 0):
        raise NumericalError("block survival underflows to 0; failure rate diverges")
    density = law.k * flux * binom.pmf(flux, n, alpha)
    return _shaped(density / survival)


def _tail_terms(model: BlockModel, t):
    # rows: initial working count n = flux..N, columns: times
    alpha = np.exp(-model.law.k * np.atleast_1d(_times(t)))
    counts = np.arange(model.flux, model.multiplicity + 1)[:, None]
    weights = model.q[model.flux:][:, None]
    return counts, weights, alpha[None, :]


def block_survival_probabilistic(model: BlockModel, t):
    """S_b(N, Q; k, t) = sum_{n >= flux} q_n S_b(n, k, t)."""
    if model.init.kind == "perfect":
        return block_survival_perfect(model.multiplicity, model.flux, model.law, t)
    counts, weights, alpha = _tail_terms(model, t)
    survival = np.sum(weights * binom.sf(model.flux - 1, counts, alpha), axis=0)
    return _shaped(survival.reshape(np.shape(t)))


def block_failure_rate_probabilistic(model: BlockModel, t):
    """Full-weight hazard (1/S_b) sum_n q_n mu_b(n) S_b(n) of a probabilistic-start block.

    The unnormalised q is kept, so at t=0 this is the rate conditioned on the
    block working initially.
    """
    if model.init.kind == "perfect":
        return block_failure_rate_perfect(model.multiplicity, model.flux, model.law, t)
    counts, weights, alpha = _tail_terms(model, t)
    survival = np.sum(weights * binom.sf(model.flux - 1, counts, alpha), axis=0)
    if np.any(survival <= 0):
        raise NumericalError("block survival underflows to 0; failure rate diverges")
    density = model.law.k * model.flux * np.sum(weights * binom.pmf(model.flux, counts, alpha), axis=0)
    return _shaped((density / survival).reshape(np.shape(t)))


def block_failure_rate_small_time(model: BlockModel, t):
    """Unweighted approximation sum_n q~_n mu_b(n) with q~ renormalised over n >= flux.

    Agrees with the full-weight rate only while every S_b(n) is close to 1.
    """
    q = model.q[model.flux:]
    total = q.sum()
    if total <= 0:
        raise NumericalError("no initial state reaches the required flux")
    rates = [
        np.asarray(block_failure_rate_perfect(n, model.flux, model.law, t))
        for n in range(model.flux, model.multiplicity + 1)
    ]
    return _shaped(sum(w / total * r for w, r in zip(q, rates)))


def block_survival(block: BlockModel, t):
    return block_survival_probabilistic(block, t)


def block_failure_rate(block: BlockModel, t):
    return block_failure_rate_probabilistic(block, t)


def block_survival_function(block: BlockModel) -> SurvivalFunction:
    return lambda t: block_survival(block, t)


def block_failure_rate_function(block: BlockModel) -> SurvivalFunction:
    return lambda t: block_failure_rate(block, t)


def chain_survival(chain: ChainModel, t):
    survival = np.ones(np.shape(_times(t)))
    for block in chain.blocks:
        survival = survival * np.asarray(block_survival(block, t))
    return _shaped(survival)


def chain_failure_rate(chain: ChainModel, t):
    rate = np.zeros(np.shape(_times(t)))
    for block in chain.blocks:
        rate = rate + np.asarray(block_failure_rate(block, t))
    return _shaped(rate)


def mean_time_to_failure(
    survival: SurvivalFunction,
    *,
    threshold: float = SURVIVAL_TAIL,
    epsabs: float = MTTF_ABS_TOL,
    horizon: float = MTTF_HORIZON,
) -> float:
    """<T> = int_0^inf S(t) dt, truncated where S drops below `threshold`."""
    t_max = 1.0
    while float(survival(t_max)) >= threshold:
        t_max *= 2.0
        if t_max > horizon:
            raise ConvergenceError(
                f"survival stays above {threshold:g} beyond the horizon t={horizon:g}"
            )
    value, error = integrate.quad(lambda t: float(survival(t)), 0.0, t_max, epsabs=epsabs, epsrel=0.0, limit=500)
    logger.debug("MTTF quadrature on [0, %g]: %.12g (error estimate %.2g)", t_max, value, error)
    return value


def chain_mean_time_to_failure(chain: ChainModel, **kwargs) -> float:
    return mean_time_to_failure(lambda t: chain_survival(chain, t), **kwargs)


def initial_working_probability(chain: ChainModel) -> float:
    """Probability that every block starts with at least `flux` working connections."""
    probability = 1.0
    for block in chain.blocks:
        probability *= float(block.q[block.flux:].sum())
    return probability


def probabilistic_chain(reference: ChainModel, n_prime: int, p: float, k_prime: float) -> ChainModel:
    """Model (b) counterpart of a reference chain: N' connections, binomial(p) start, rate k'."""
    return ChainModel(
        blocks=[
            BlockModel(
                multiplicity=n_prime,
                flux=block.flux,
                law=ConnectionLaw(k=k_prime),
                init=InitialDistribution(kind="binomial", p=p),
            )
            for block in reference.blocks
        ]
    )


def match_multiplicity(
    reference: ChainModel,
    p: float,
    k_prime: float,
    criteria: Criterion = "mttf",
    *,
    p_thres: float = 0.9,
    max_multiplicity: int = MAX_MULTIPLICITY,
) -> int:
    """Smallest N' for which the probabilistic-start chain meets `criteria`.

    - **mttf**: <T> of the candidate is at least the reference <T>
    - **initial**: initial working probability is at least `p_thres`
    - **both**: conjunction of the two

    Both criteria are monotone in N', so the search gallops upward from
    N' = 1 and then bisects the last bracket.
    """
    if any(block.init.kind != "perfect" for block in reference.blocks):
        raise DomainError("reference chain must use perfect-start blocks")
    if criteria not in ("mttf", "initial", "both"):
        raise DomainError(f"unknown criteria {criteria!r}")
    target_mttf = chain_mean_time_to_failure(reference) if criteria != "initial" else None
    flux = max(block.flux for block in reference.blocks)

    def satisfied(n_prime: int) -> bool:
        if n_prime < flux:
            return False
        candidate = probabilistic_chain(reference, n_prime, p, k_prime)
        if criteria in ("initial", "both") and initial_working_probability(candidate) < p_thres:
            return False
        if criteria in ("mttf", "both"):
            # connections that never fail outlive any reference chain
            if k_prime == 0:
                return True
            return chain_mean_time_to_failure(candidate) >= target_mttf * (1.0 - 1e-9)
        return True

    low, high = 0, 1
    while not satisfied(high):
        if high >= max_multiplicity:
            raise ConvergenceError(
                f"no N' <= {max_multiplicity} satisfies {criteria} (p={p:g}, k'={k_prime:g})"
            )
        low, high = high, min(2 * high, max_multiplicity)
    while high - low > 1:
        middle = (low + high) // 2
        if satisfied(middle):
            high = middle
        else:
            low = middle
    logger.debug("match_multiplicity(p=%g, k'=%g, %s) -> %d", p, k_prime, criteria, high)
    return high


# Reference laws for overlays; never used as connection laws.

def gompertz_makeham_failure_rate(t, a: float, b: float, lam: float):
    return _shaped(a + b * np.exp(lam * _times(t)))


def gompertz_makeham_survival(t, a: float, b: float, lam: float):
    t = _times(t)
    return _shaped(np.exp(-a * t - b / lam * np.expm1(lam * t)))


def weibull_failure_rate(t, a: float, b: float):
    return _shaped(a * np.power(_times(t), b))


def weibull_survival(t, a: float, b: float):
    t = _times(t)
    return _shaped(np.exp(-a * np.power(t, b + 1.0) / (b + 1.0)))


def fit_reference_laws(t, rate, guess: Dict[str, float]) -> Dict[str, float]:
    """Least-squares fit of both reference laws to a failure-rate curve.

    `guess` holds gompertz_a, gompertz_b, gompertz_lam, weibull_a, weibull_b;
    parameters whose fit fails keep their guessed values.
    """
    t = np.asarray(t, dtype=float)
    rate = np.asarray(rate, dtype=float)
    mask = np.isfinite(rate) & (t > 0)
    fitted = dict(guess)
    try:
        (a, b, lam), _ = optimize.curve_fit(
            lambda x, a, b, lam: a + b * np.exp(lam * x),
            t[mask],
            rate[mask],
            p0=[guess["gompertz_a"], guess["gompertz_b"], guess["gompertz_lam"]],
            bounds=([0, 1e-12, 1e-12], [np.inf, np.inf, 50.0]),
            maxfev=20_000,
        )
        fitted.update(gompertz_a=float(a), gompertz_b=float(b), gompertz_lam=float(lam))
    except (RuntimeError, ValueError) as exc:
        logger.warning("Gompertz-Makeham fit failed, keeping configured parameters: %s", exc)
    try:
        (a, b), _ = optimize.curve_fit(
            lambda x, a, b: a * np.power(x, b),
            t[mask],
            rate[mask],
            p0=[guess["weibull_a"], guess["weibull_b"]],
            bounds=([1e-12, -0.999], [np.inf, 20.0]),
            maxfev=20_000,
        )
        fitted.update(weibull_a=float(a), weibull_b=float(b))
    except (RuntimeError, ValueError) as exc:
        logger.warning("Weibull fit failed, keeping configured parameters: %s", exc)
    return fitted
