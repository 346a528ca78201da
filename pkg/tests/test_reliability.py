import itertools
import math

import numpy as np
import pytest

from relnet import reliability
from relnet.exceptions import ConvergenceError, DomainError
from relnet.schemas.reliability import BlockModel, ChainModel, ConnectionLaw, InitialDistribution
from tests.conftest import finite_difference_rate

TIMES = np.linspace(0.0, 5.0, 50)


def brute_force_block(q, flux, alpha):
    """Enumerate initial states x survival outcomes of every connection."""
    n = len(q) - 1
    total = 0.0
    for initial in itertools.product((0, 1), repeat=n):
        working = sum(initial)
        # q_n is spread uniformly over the C(n, working) initial states
        weight = q[working] / math.comb(n, working)
        if weight == 0:
            continue
        for alive in itertools.product((0, 1), repeat=working):
            if sum(alive) >= flux:
                p = 1.0
                for a in alive:
                    p *= alpha if a else 1.0 - alpha
                total += weight * p
    return total


def perfect(n, flux=1, k=1.0):
    return BlockModel(multiplicity=n, flux=flux, law=ConnectionLaw(k=k))


def binomial(n, p, flux=1, k=1.0):
    return BlockModel(multiplicity=n, flux=flux, law=ConnectionLaw(k=k), init=InitialDistribution(kind="binomial", p=p))


def test_connection_survival():
    law = ConnectionLaw(k=3.7)
    assert reliability.connection_survival(law, 0.0) == 1.0
    assert reliability.connection_survival(ConnectionLaw(k=0), 10.0) == 1.0
    assert reliability.connection_survival(ConnectionLaw(k=math.log(2)), 1.0) == pytest.approx(0.5, rel=1e-12)


def test_negative_time_rejected():
    with pytest.raises(DomainError):
        reliability.connection_survival(ConnectionLaw(k=1), -1.0)


def test_flux_above_multiplicity_rejected():
    with pytest.raises(DomainError):
        reliability.block_survival_perfect(2, 3, ConnectionLaw(k=1), 1.0)


def test_block_survival_perfect_examples():
    law = ConnectionLaw(k=math.log(2))
    assert reliability.block_survival_perfect(2, 1, law, 1.0) == pytest.approx(0.75, rel=1e-12)
    law = ConnectionLaw(k=0.8)
    assert reliability.block_survival_perfect(1, 1, law, 2.0) == pytest.approx(math.exp(-1.6), rel=1e-12)


@pytest.mark.parametrize("n", range(1, 9))
def test_block_survival_perfect_matches_enumeration(n):
    law = ConnectionLaw(k=0.7)
    for flux in range(1, n + 1):
        q = [0.0] * n + [1.0]
        values = reliability.block_survival_perfect(n, flux, law, TIMES)
        expected = [brute_force_block(q, flux, math.exp(-0.7 * t)) for t in TIMES[::7]]
        assert np.allclose(values[::7], expected, rtol=0, atol=1e-12)


def test_flux_one_identity():
    law = ConnectionLaw(k=0.4)
    alpha = np.exp(-0.4 * TIMES)
    for n in (1, 3, 7):
        values = reliability.block_survival_perfect(n, 1, law, TIMES)
        assert np.allclose(values, 1 - (1 - alpha) ** n, rtol=1e-12, atol=0)


def test_survival_nonincreasing_in_flux():
    law = ConnectionLaw(k=0.5)
    for flux in range(1, 5):
        lower = reliability.block_survival_perfect(5, flux + 1, law, TIMES)
        upper = reliability.block_survival_perfect(5, flux, law, TIMES)
        assert np.all(lower <= upper + 1e-15)


def test_block_failure_rate_perfect():
    law = ConnectionLaw(k=1.3)
    assert reliability.block_failure_rate_perfect(1, 1, law, 0.7) == pytest.approx(1.3, rel=1e-12)
    for n in (2, 4):
        assert reliability.block_failure_rate_perfect(n, n, law, 1e-8) == pytest.approx(n * 1.3, rel=1e-6)


def test_block_failure_rate_matches_finite_difference():
    law = ConnectionLaw(k=1.0)
    survival = lambda t: reliability.block_survival_perfect(3, 1, law, t)
    rate = reliability.block_failure_rate_perfect(3, 1, law, 1.0)
    assert rate == pytest.approx(finite_difference_rate(survival, 1.0), rel=1e-5)


def test_probabilistic_reduces_to_perfect():
    assert reliability.block_survival_probabilistic(perfect(4, 2), 1.3) == reliability.block_survival_perfect(
        4, 2, ConnectionLaw(k=1.0), 1.3
    )
    degenerate = binomial(4, 1.0, flux=2)
    assert reliability.block_survival_probabilistic(degenerate, TIMES) == pytest.approx(
        reliability.block_survival_perfect(4, 2, ConnectionLaw(k=1.0), TIMES), abs=1e-15
    )
    assert reliability.block_failure_rate_probabilistic(perfect(3), 0.5) == reliability.block_failure_rate_perfect(
        3, 1, ConnectionLaw(k=1.0), 0.5
    )


@pytest.mark.parametrize("n,flux,p", [(6, 1, 0.5), (4, 2, 0.3), (5, 3, 0.8)])
def test_probabilistic_matches_enumeration(n, flux, p):
    model = binomial(n, p, flux=flux, k=0.5)
    for t in (0.0, 1.0, 2.5):
        expected = brute_force_block(model.q, flux, math.exp(-0.5 * t))
        assert reliability.block_survival_probabilistic(model, t) == pytest.approx(expected, abs=1e-12)


def test_explicit_initial_distribution():
    model = BlockModel(
        multiplicity=3, law=ConnectionLaw(k=1.0), init=InitialDistribution(kind="explicit", q=[0.1, 0.2, 0.3, 0.4])
    )
    expected = brute_force_block(model.q, 1, math.exp(-1.0))
    assert reliability.block_survival(model, 1.0) == pytest.approx(expected, abs=1e-12)


def test_probabilistic_rate_at_zero_is_finite():
    model = binomial(6, 0.5, k=0.5)
    rate = reliability.block_failure_rate_probabilistic(model, 0.0)
    assert np.isfinite(rate) and rate > 0
    # at t=0 the full-weight rate is the renormalised small-time average
    assert rate == pytest.approx(reliability.block_failure_rate_small_time(model, 0.0), rel=1e-12)
    survival = lambda t: reliability.block_survival_probabilistic(model, t)
    assert reliability.block_failure_rate_probabilistic(model, 2.0) == pytest.approx(
        finite_difference_rate(survival, 2.0), rel=1e-5
    )


def test_small_time_approximation_drifts_later():
    model = binomial(6, 0.5, k=0.5)
    full = reliability.block_failure_rate_probabilistic(model, 4.0)
    approximate = reliability.block_failure_rate_small_time(model, 4.0)
    assert abs(full - approximate) > 1e-3


def test_random_models_are_valid_survival_curves():
    rng = np.random.default_rng(7)
    grid = np.linspace(0, 20, 1000)
    for _ in range(10):
        n = int(rng.integers(1, 9))
        flux = int(rng.integers(1, n + 1))
        model = binomial(n, float(rng.uniform(0.1, 1.0)), flux=flux, k=float(rng.uniform(0.05, 2.0)))
        values = reliability.block_survival(model, grid)
        assert np.all((values >= 0) & (values <= 1))
        assert np.all(np.diff(values) <= 1e-15)


def test_random_models_rate_consistency():
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 100:
        n = int(rng.integers(1, 7))
        flux = int(rng.integers(1, n + 1))
        model = binomial(n, float(rng.uniform(0.2, 1.0)), flux=flux, k=float(rng.uniform(0.1, 1.5)))
        t = float(rng.uniform(0.1, 4.0))
        survival = lambda x: reliability.block_survival(model, x)
        rate = reliability.block_failure_rate(model, t)
        # below ~1e-3 the difference quotient is dominated by rounding in ln S
        if survival(t) <= 1e-6 or rate < 1e-3:
            continue
        assert rate == pytest.approx(finite_difference_rate(survival, t), rel=1e-5)
        checked += 1


def test_chain_iid_specialisation():
    block = perfect(3, k=0.5)
    chain = ChainModel.iid(block, 6)
    assert np.allclose(reliability.chain_survival(chain, TIMES), reliability.block_survival(block, TIMES) ** 6, rtol=1e-12)
    assert reliability.chain_failure_rate(chain, 1.5) == pytest.approx(6 * reliability.block_failure_rate(block, 1.5), rel=1e-12)
    single = ChainModel(blocks=[block])
    assert reliability.chain_survival(single, 0.8) == reliability.block_survival(block, 0.8)


def test_mixed_chain_matches_enumeration():
    blocks = [perfect(2, 1, k=1.0), binomial(3, 0.6, flux=2, k=0.5)]
    chain = ChainModel(blocks=blocks)
    t = 0.9
    expected = brute_force_block(blocks[0].q, 1, math.exp(-0.9)) * brute_force_block(blocks[1].q, 2, math.exp(-0.45))
    assert reliability.chain_survival(chain, t) == pytest.approx(expected, abs=1e-12)
    survival = lambda x: reliability.chain_survival(chain, x)
    assert reliability.chain_failure_rate(chain, t) == pytest.approx(finite_difference_rate(survival, t), rel=1e-5)


def test_mean_time_to_failure_closed_forms():
    law = ConnectionLaw(k=1.0)
    assert reliability.mean_time_to_failure(lambda t: reliability.connection_survival(law, t)) == pytest.approx(1.0, abs=1e-7)
    block = perfect(3, k=1.0)
    assert reliability.mean_time_to_failure(reliability.block_survival_function(block)) == pytest.approx(11 / 6, abs=1e-7)


def test_mean_time_to_failure_horizon():
    with pytest.raises(ConvergenceError):
        reliability.mean_time_to_failure(lambda t: 1.0, horizon=1e3)


def test_chain_mttf_matches_order_statistics(rng):
    chain = ChainModel.iid(perfect(3, k=0.5), 6)
    failures = rng.exponential(scale=2.0, size=(200_000, 6, 3))
    sampled = failures.max(axis=2).min(axis=1).mean()
    assert reliability.chain_mean_time_to_failure(chain) == pytest.approx(sampled, rel=0.01)


def test_initial_working_probability():
    reference = ChainModel.iid(perfect(3, k=0.5), 6)
    assert reliability.initial_working_probability(reliability.probabilistic_chain(reference, 3, 1.0, 0.5)) == 1.0
    single = ChainModel.iid(perfect(1), 1)
    assert reliability.initial_working_probability(reliability.probabilistic_chain(single, 1, 0.3, 1.0)) == pytest.approx(0.3)
    candidate = reliability.probabilistic_chain(reference, 6, 0.5, 0.5)
    assert reliability.initial_working_probability(candidate) == pytest.approx((1 - 2 ** -6) ** 6, rel=1e-12)


def test_match_multiplicity_identity():
    reference = ChainModel.iid(perfect(3, k=0.5), 6)
    assert reliability.match_multiplicity(reference, 1.0, 0.5, "mttf") == 3


def test_match_multiplicity_is_minimal():
    reference = ChainModel.iid(perfect(3, k=0.5), 6)
    n_prime = reliability.match_multiplicity(reference, 0.9, 0.5, "mttf")
    target = reliability.chain_mean_time_to_failure(reference)
    mttf = lambda n: reliability.chain_mean_time_to_failure(reliability.probabilistic_chain(reference, n, 0.9, 0.5))
    assert mttf(n_prime) >= target * (1 - 1e-9)
    assert all(mttf(n) < target for n in range(1, n_prime))


def test_match_multiplicity_initial_criterion():
    reference = ChainModel.iid(perfect(3, k=0.5), 6)
    expected = next(n for n in range(1, 100) if (1 - 2.0 ** -n) ** 6 >= 0.9)
    assert reliability.match_multiplicity(reference, 0.5, 0.5, "initial", p_thres=0.9) == expected
    both = reliability.match_multiplicity(reference, 0.5, 0.5, "both")
    assert both == max(expected, reliability.match_multiplicity(reference, 0.5, 0.5, "mttf"))


def test_match_multiplicity_bound():
    reference = ChainModel.iid(perfect(3, k=0.5), 6)
    with pytest.raises(ConvergenceError):
        reliability.match_multiplicity(reference, 0.1, 0.5, "initial", max_multiplicity=4)


def test_match_multiplicity_rejects_probabilistic_reference():
    with pytest.raises(DomainError):
        reliability.match_multiplicity(ChainModel.iid(binomial(3, 0.5), 2), 0.5, 0.5)


def test_match_multiplicity_without_decay():
    reference = ChainModel.iid(perfect(3, k=0.5), 6)
    assert reliability.match_multiplicity(reference, 0.9, 0.0, "mttf") == 1
    initial = reliability.match_multiplicity(reference, 0.9, 0.0, "initial")
    assert reliability.match_multiplicity(reference, 0.9, 0.0, "both") == initial
    flux_two = ChainModel.iid(perfect(3, flux=2, k=0.5), 6)
    assert reliability.match_multiplicity(flux_two, 0.9, 0.0, "mttf") == 2


@pytest.mark.slow
def test_partial_start_needs_more_connections():
    reference = ChainModel.iid(perfect(3, k=0.5), 6)
    for p in np.linspace(0.1, 0.9, 9):
        assert reliability.match_multiplicity(reference, p, 0.5, "mttf") * p > 3


@pytest.mark.slow
def test_initial_criterion_dominates_for_slow_decay():
    reference = ChainModel.iid(perfect(3, k=0.5), 6)
    for p in (0.1, 0.3, 0.5):
        for k_prime in (0.05, 0.1, 0.125):
            n_initial = reliability.match_multiplicity(reference, p, k_prime, "initial")
            assert n_initial >= reliability.match_multiplicity(reference, p, k_prime, "mttf")
            assert reliability.match_multiplicity(reference, p, k_prime, "both") == n_initial


def test_reference_laws():
    t = np.linspace(0.5, 5, 10)
    assert np.allclose(reliability.weibull_failure_rate(t, 0.3, 0.0), 0.3)
    survival = lambda x: reliability.gompertz_makeham_survival(x, 0.1, 0.05, 0.3)
    assert reliability.gompertz_makeham_failure_rate(2.0, 0.1, 0.05, 0.3) == pytest.approx(
        finite_difference_rate(survival, 2.0), rel=1e-5
    )
    survival = lambda x: reliability.weibull_survival(x, 0.4, 1.5)
    assert reliability.weibull_failure_rate(2.0, 0.4, 1.5) == pytest.approx(finite_difference_rate(survival, 2.0), rel=1e-5)


def test_fit_reference_laws_recovers_parameters():
    t = np.linspace(0, 10, 101)
    rate = reliability.gompertz_makeham_failure_rate(t, 0.1, 0.05, 0.3)
    guess = dict(gompertz_a=0.05, gompertz_b=0.1, gompertz_lam=0.5, weibull_a=0.5, weibull_b=1.0)
    fitted = reliability.fit_reference_laws(t, rate, guess)
    assert fitted["gompertz_a"] == pytest.approx(0.1, rel=1e-3)
    assert fitted["gompertz_b"] == pytest.approx(0.05, rel=1e-3)
    assert fitted["gompertz_lam"] == pytest.approx(0.3, rel=1e-3)
