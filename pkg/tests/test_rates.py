import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hkdelay import (
    DelayKind,
    HalanayProblem,
    InfluenceFunction,
    InitialDatum,
    InvalidInterval,
    InvalidProblem,
    InvalidWeights,
    Measure,
    PreconditionViolated,
    WeightScheme,
    check_preconditions,
    convexity_bound_check,
    integrate,
    psi_floor,
    rate_reaction_nonsymmetric,
    rate_transmission_normalized,
    shrink_factor,
    shrink_iteration,
    simulate_equality_case,
    solve_halanay,
)

from conftest import make_config


def scan_root(alpha, beta, tau, measure, n=2_000_001):
    """Independent oracle: locate the sign change of beta - C - alpha*K(C)."""
    cs = np.linspace(0.0, beta - alpha, n)
    x = cs * tau
    if measure is Measure.DIRAC_AT_ZERO:
        rhs = alpha * np.exp(x)
    else:
        with np.errstate(invalid="ignore"):
            rhs = alpha * np.exp(x) * np.expm1(x) / x
        rhs[0] = alpha
    f = beta - cs - rhs
    idx = int(np.argmax(f <= 0.0))
    return float(cs[idx - 1]), float(cs[idx])


# ---------------------------------------------------------------------------
# rate equation solver

def test_halanay_tiny_delay_limit():
    res = solve_halanay(HalanayProblem(0.5, 1.0, 1e-12, Measure.DIRAC_AT_ZERO))
    assert res.C == pytest.approx(0.5, abs=1e-9)


@pytest.mark.parametrize(
    "alpha,beta,tau,measure",
    [
        (0.5, 1.0, 1.0, Measure.DIRAC_AT_ZERO),
        (0.2, 1.0, 0.1, Measure.UNIFORM_ON_DELAY),
        (0.9, 1.3, 2.5, Measure.DIRAC_AT_ZERO),
        (0.05, 0.4, 4.0, Measure.UNIFORM_ON_DELAY),
    ],
)
def test_halanay_matches_scan_oracle(alpha, beta, tau, measure):
    res = solve_halanay(HalanayProblem(alpha, beta, tau, measure))
    lo, hi = scan_root(alpha, beta, tau, measure)
    assert lo <= res.C <= hi
    assert abs(res.residual) <= 1e-12
    assert 0.0 < res.C < beta - alpha


def test_halanay_residual_and_interval_on_grid():
    for beta in np.linspace(0.2, 2.0, 6):
        for frac in np.linspace(0.05, 0.95, 6):
            for tau in (1e-3, 0.3, 2.0):
                for measure in Measure:
                    res = solve_halanay(HalanayProblem(frac * beta, beta, tau, measure))
                    assert abs(res.residual) <= 1e-12
                    assert 0.0 < res.C < beta - frac * beta


def test_halanay_monotonicity():
    for measure in Measure:
        c_tau = [solve_halanay(HalanayProblem(0.4, 1.0, t, measure)).C for t in (0.1, 0.5, 2.0)]
        assert c_tau[0] > c_tau[1] > c_tau[2]
        c_alpha = [solve_halanay(HalanayProblem(a, 1.0, 0.5, measure)).C for a in (0.2, 0.4, 0.8)]
        assert c_alpha[0] > c_alpha[1] > c_alpha[2]
        c_beta = [solve_halanay(HalanayProblem(0.4, b, 0.5, measure)).C for b in (0.6, 1.0, 1.5)]
        assert c_beta[0] < c_beta[1] < c_beta[2]


def test_halanay_invalid_problems():
    with pytest.raises(InvalidProblem):
        HalanayProblem(1.0, 1.0, 0.5)
    with pytest.raises(InvalidProblem):
        HalanayProblem(-0.1, 1.0, 0.5)
    with pytest.raises(InvalidProblem):
        HalanayProblem(0.5, 1.0, 0.0)


def test_equality_case_matches_closed_form_on_first_segment():
    # for t in [0, tau]: u' = alpha - beta u, so u = a/b + (1 - a/b) e^{-bt}
    alpha, beta, tau = 0.4, 1.2, 0.8
    times, u = simulate_equality_case(alpha, beta, tau, horizon_delays=1, steps_per_delay=64)
    exact = alpha / beta + (1 - alpha / beta) * np.exp(-beta * times)
    assert np.max(np.abs(u - exact)) < 1e-9


def test_equality_case_respects_rate_bound():
    alpha, beta, tau = 0.5, 1.0, 1.0
    times, u = simulate_equality_case(alpha, beta, tau)
    for measure in Measure:
        c = solve_halanay(HalanayProblem(alpha, beta, tau, measure)).C
        assert np.all(u <= np.exp(-c * times) * (1.0 + 1e-6))


# ---------------------------------------------------------------------------
# theorem rates

def test_transmission_rate_small_delay_limit():
    res = rate_transmission_normalized(3, 1.0, 1e-12)
    assert res.C == pytest.approx(0.5, abs=1e-9)  # alpha = 1/2, beta = 1


@pytest.mark.parametrize(
    "n,psi_lower,tau",
    [(3, 1.0, 1.0), (10, 0.3, 0.5), (5, 0.77, 2.0)],
)
def test_transmission_rate_matches_scan(n, psi_lower, tau):
    alpha = 1.0 - psi_lower * (n - 2) / (n - 1)
    res = rate_transmission_normalized(n, psi_lower, tau)
    lo, hi = scan_root(alpha, 1.0, tau, Measure.DIRAC_AT_ZERO)
    assert lo <= res.C <= hi
    # explicit residual in the theorem's own equation
    assert abs(1.0 - res.C - alpha * math.exp(res.C * tau)) <= 1e-12


def test_transmission_rate_degenerates_for_two_agents():
    with pytest.raises(InvalidProblem):
        rate_transmission_normalized(2, 1.0, 0.5)


def test_reaction_rate_small_delay_limit():
    res = rate_reaction_nonsymmetric(1.0, 1e-12)
    assert res.C == pytest.approx(1.0, abs=1e-6)


def test_reaction_rate_matches_scan():
    res = rate_reaction_nonsymmetric(1.0, 0.1)
    lo, hi = scan_root(0.4, 1.0, 0.1, Measure.UNIFORM_ON_DELAY)
    assert lo <= res.C <= hi
    # theorem form: psi0 - C = 4 e^{C tau} (e^{C tau} - 1) / C
    c = res.C
    assert abs(1.0 - c - 4.0 * math.exp(0.1 * c) * math.expm1(0.1 * c) / c) <= 1e-11


def test_reaction_rate_precondition():
    with pytest.raises(PreconditionViolated):
        rate_reaction_nonsymmetric(0.5, 0.2)  # 4 tau = 0.8 >= 0.5


# ---------------------------------------------------------------------------
# shrink factor and iteration

def test_shrink_factor_zero_width():
    est = shrink_factor(0.5, 1.0, 3, 2.0, 2.0)
    assert est.sigma == 0.0
    assert est.gamma == 0.0


def test_shrink_factor_direct_evaluation():
    est = shrink_factor(1.0, 1.0, 2, 1.0, 3.0)
    sigma = min(1.0, (3.0 - 1.0) / 6.0)
    expect = (1 - math.exp(-1.0)) ** 2 * (1 - math.exp(-sigma)) * math.exp(-6.0) * 1.0
    assert est.sigma == pytest.approx(sigma)
    assert est.gamma == pytest.approx(expect, rel=1e-15)


@given(
    psi=st.floats(min_value=1e-6, max_value=1.0),
    tau=st.floats(min_value=1e-3, max_value=10.0),
    n=st.integers(min_value=2, max_value=50),
    m=st.floats(min_value=1e-6, max_value=100.0),
    width=st.floats(min_value=0.0, max_value=100.0),
)
def test_shrink_factor_in_unit_interval(psi, tau, n, m, width):
    est = shrink_factor(psi, tau, n, m, m + width)
    assert 0.0 <= est.gamma < 1.0


def test_shrink_factor_invalid_interval():
    with pytest.raises(InvalidInterval):
        shrink_factor(0.5, 1.0, 3, 0.0, 1.0)
    with pytest.raises(InvalidInterval):
        shrink_factor(0.5, 1.0, 3, 2.0, 1.0)


def test_shrink_iteration_contracts(rng):
    config = make_config(
        n_agents=4, dim=1, tau=0.5,
        weight_scheme=WeightScheme.CLASSICAL_SCALED,
    )
    datum = InitialDatum.constant(rng.uniform(1.0, 3.0, (4, 1)))
    traj = integrate(config, datum, 6 * 4 * config.tau)
    m0, M0 = float(datum.values.min()), float(datum.values.max())
    psi_low = psi_floor(config.influence, M0 - m0)
    est = shrink_iteration(traj, psi_low, n_windows=4)
    assert est.m == pytest.approx(m0)
    assert est.M == pytest.approx(M0)
    recs = est.records
    assert len(recs) == 5
    for k in range(4):
        assert recs[k + 1].D <= (1.0 - recs[k].gamma) * recs[k].D + 1e-9


# ---------------------------------------------------------------------------
# preconditions

def test_preconditions_reaction_symmetric_short_delay():
    config = make_config(
        n_agents=4, tau=0.4,
        delay_kind=DelayKind.REACTION,
        weight_scheme=WeightScheme.CLASSICAL_SCALED,
    )
    datum = InitialDatum.constant([[0.0], [0.5], [1.0], [1.5]])
    rep = check_preconditions(config, datum)
    assert rep.reaction_symmetric.applies
    assert not rep.transmission_classical.applies
    assert not rep.transmission_normalized.applies


def test_preconditions_reaction_small_delay_fails_arithmetic():
    config = make_config(
        n_agents=2, tau=0.3,
        delay_kind=DelayKind.REACTION,
        weight_scheme=WeightScheme.NORMALIZED,
        influence=InfluenceFunction.constant(1.0),
    )
    datum = InitialDatum.constant([[0.0], [1.0]])
    rep = check_preconditions(config, datum)
    assert rep.psi0_lower == pytest.approx(1.0)
    assert not rep.reaction_small_delay.applies  # 4 * 0.3 = 1.2 >= 1
    assert any("4*tau" in r for r in rep.reaction_small_delay.reasons)


def test_preconditions_transmission_normalized_unconditional():
    config = make_config(n_agents=5, tau=10.0, weight_scheme=WeightScheme.NORMALIZED)
    datum = InitialDatum.constant(np.linspace(0, 1, 5)[:, None])
    rep = check_preconditions(config, datum)
    assert rep.transmission_normalized.applies
    assert rep.transmission_classical.applies


def test_preconditions_normalized_constant_psi_counts_as_symmetric():
    config = make_config(
        n_agents=3, tau=0.4,
        delay_kind=DelayKind.REACTION,
        weight_scheme=WeightScheme.NORMALIZED,
        influence=InfluenceFunction.constant(1.0),
    )
    datum = InitialDatum.constant([[0.0], [0.5], [1.0]])
    assert check_preconditions(config, datum).reaction_symmetric.applies


# ---------------------------------------------------------------------------
# convex-combination bound

def _random_instance(rng):
    n = int(rng.integers(3, 9))
    d = int(rng.integers(1, 4))
    x = rng.normal(size=(n, d))
    i, k = rng.choice(n, size=2, replace=False)
    eta_i = np.insert(rng.dirichlet(np.ones(n - 1)), i, 0.0)
    eta_k = np.insert(rng.dirichlet(np.ones(n - 1)), k, 0.0)
    mu = min(np.delete(eta_i, i).min(), np.delete(eta_k, k).min())
    return x, eta_i, eta_k, mu, int(i), int(k)


def test_convexity_bound_identical_weights():
    # same full weight vector, zero at both excluded indices
    x = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [2.0, 2.0]])
    eta = np.array([0.0, 0.0, 0.5, 0.5])
    chk = convexity_bound_check(x, eta, eta, 0.0, i=0, k=1)
    assert chk.lhs == 0.0
    assert chk.holds


def test_convexity_bound_mu_zero_is_triangle_case(rng):
    x, eta_i, eta_k, _, i, k = _random_instance(rng)
    chk = convexity_bound_check(x, eta_i, eta_k, 0.0, i=i, k=k)
    from hkdelay import diameter

    assert chk.rhs == pytest.approx(diameter(x))
    assert chk.holds


def test_convexity_bound_randomized(rng):
    for _ in range(300):
        x, eta_i, eta_k, mu, i, k = _random_instance(rng)
        chk = convexity_bound_check(x, eta_i, eta_k, mu, i=i, k=k)
        assert chk.holds


def test_convexity_bound_validation(rng):
    x = np.zeros((4, 2))
    eta = np.array([0.0, 0.5, 0.25, 0.25])
    with pytest.raises(InvalidWeights):
        convexity_bound_check(x, eta, eta, 0.0, i=0, k=0)  # indices must differ
    with pytest.raises(InvalidWeights):
        convexity_bound_check(x, eta * 2.0, eta, 0.0, i=0, k=1)
    with pytest.raises(InvalidWeights):
        convexity_bound_check(x, eta, np.roll(eta, 1), 0.9, i=0, k=1)  # mu too large
