import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import golden_mismatches
from penalized_sampler.errors import InvalidArgument
from penalized_sampler.theory import (
    kl_first_bound,
    kl_quadrature,
    kl_quadrature_radial,
    kl_second_bound,
    laplace_kl_estimate,
    lyapunov,
    mu_star_from,
    penalized_constants,
    schedule_for,
    solve_lambda_alpha1,
    wckp_bound,
    wckp_constant,
)


def _flat_kl(delta):
    return math.log1p(math.sqrt(math.pi * delta) / 2)


# -- constants -------------------------------------------------------------------


def test_constants_example():
    c = penalized_constants(L=1, grad_f0_norm=2.0, f0=0, ell=4, m_S=1, b_S=1, delta=0.1, gamma=1, d=1)
    assert c.L_delta == pytest.approx(41)
    assert c.m_delta == pytest.approx(8.5)
    assert c.b_delta == pytest.approx(0.5 * 4.0 + 10)
    assert c.m_delta_valid and c.M_valid
    # Lambda is in the thousands here, so the rate itself underflows; its log stays finite
    assert math.isfinite(c.log_mu_star)
    assert c.fixed_point_iterations <= 100


def test_constants_invalid_delta_flagged():
    c = penalized_constants(L=1, grad_f0_norm=0, f0=0, ell=4, m_S=1, b_S=1, delta=1.0, gamma=1, d=1)
    assert c.m_delta <= 0
    assert not c.m_delta_valid
    assert not c.M_valid
    d = c.to_dict()
    assert d["m_delta_valid"] is False
    assert d["mu_star"] is None  # no positive rate without dissipativity


def test_constants_reject_bad_input():
    with pytest.raises(InvalidArgument):
        penalized_constants(1, 0, 0, 4, 1, 1, delta=0.0, gamma=1, d=1)
    with pytest.raises(InvalidArgument):
        penalized_constants(float("nan"), 0, 0, 4, 1, 1, delta=0.1, gamma=1, d=1)


def test_mu_star_example():
    expected = math.sqrt(5) * math.exp(-5) / 768
    assert mu_star_from(1.0, 0.1, 5.0, 2.0) == pytest.approx(expected, rel=1e-14)
    assert mu_star_from(1.0, 0.1, 5.0, 2.0) == pytest.approx(1.962e-5, rel=1e-3)


def test_fixed_point_is_consistent():
    Lam, a1, iters = solve_lambda_alpha1(L_delta=41.0, gamma=1.0, lam=0.1, d=3, A=2.0)
    ratio = 41.0
    assert a1 == pytest.approx((1 + 1 / Lam) * ratio, rel=1e-12)
    assert Lam == pytest.approx(2.4 * (1 + 2 * a1 + 2 * a1**2) * 5.0 * ratio / (0.1 * 0.8), rel=1e-12)
    assert iters < 100


def test_mu_star_positive_when_representable():
    c = penalized_constants(L=0.0, grad_f0_norm=0, f0=0, ell=4, m_S=1, b_S=1, delta=1.0, gamma=10.0, d=1)
    assert c.mu_star > 0
    assert math.log(c.mu_star) == pytest.approx(c.log_mu_star)


def test_mu_star_decreases_with_dimension():
    rates = [penalized_constants(1, 0.5, 0, 4, 1, 1, delta=0.2, gamma=2.0, d=d).log_mu_star
             for d in (1, 2, 5, 10, 50)]
    assert all(np.diff(rates) < 0)


def test_L_delta_at_least_L():
    for delta in (1e-3, 0.1, 10.0):
        assert penalized_constants(3.0, 0, 0, 4, 1, 1, delta=delta, gamma=1, d=1).L_delta >= 3.0


def test_lyapunov_value():
    # f = 1, S = 0.5, delta = 0.5, gamma = 2, lam = 0.1, x = (1, 0), v = (0, 2)
    val = lyapunov(np.array([1.0, 0.0]), np.array([0.0, 2.0]), 1.0, 0.5, 0.5, 2.0, 0.1)
    assert val == pytest.approx(1.0 + 1.0 + 1.0 * (2.0 + 1.0 - 0.1))


def test_golden_calculators():
    checked, bad = golden_mismatches(rtol=1e-12)
    assert checked > 50
    assert bad == []


# -- schedules -------------------------------------------------------------------


def test_pld_delta():
    plan = schedule_for("PLD", 0.1)
    assert plan.delta == 1e-4
    assert plan.alpha == pytest.approx(1e-2)


def test_psgld_schedule_example():
    plan = schedule_for("psgld", 0.5, d=2, L=1.0, mu=1.0)
    assert plan.delta == 0.00390625
    assert plan.eta == pytest.approx(0.5**18 / (2 * (0.5**8 + 4) ** 2), rel=1e-12)
    assert plan.eta == pytest.approx(1.19e-7, rel=5e-3)


def test_phmc_iterations_and_multiplier():
    assert schedule_for("PHMC", 0.1, d=4).K == pytest.approx(2e7, rel=1e-12)
    assert schedule_for("PHMC", 0.1, d=4, multipliers={"K": 3.0}).K == pytest.approx(6e7, rel=1e-12)


def test_psghmc_convex_plan_is_positive():
    plan = schedule_for("PSGHMC", 0.5, d=2)
    assert plan.delta == 0.00390625
    assert plan.eta > 0 and plan.K_hat >= 1 and plan.batch_size >= 1


def test_nonconvex_stochastic_plans():
    plan = schedule_for("PSGLD", 0.9, d=2, convex=False, lambda_star=0.5)
    assert plan.batch_size == pytest.approx(1 / plan.eta, rel=1e-12)
    with pytest.raises(InvalidArgument):
        schedule_for("PSGHMC", 0.9, convex=False)
    plan = schedule_for("PSGHMC", 0.9, d=2, convex=False, mu_star=1e-3)
    assert plan.eta > 0


def test_extreme_plans_stay_finite_in_log_space():
    plan = schedule_for("PSGLD", 1e-3, d=10, convex=False, lambda_star=0.1)
    assert plan.log10_K_hat > 308
    assert plan.to_dict()["K_hat"] is None  # overflows a double, reported in log10 only


def test_schedule_rejects_bad_input():
    for eps in (0.0, 1.0, 1.5):
        with pytest.raises(InvalidArgument):
            schedule_for("PLD", eps)
    with pytest.raises(InvalidArgument):
        schedule_for("XYZ", 0.1)
    with pytest.raises(InvalidArgument):
        schedule_for("PLD", 0.1, d=0)


@settings(max_examples=50)
@given(eps=st.floats(0.01, 0.99), d=st.integers(1, 100))
def test_schedule_invariants(eps, d):
    for alg in ("PLD", "PHMC", "PSGLD", "PSGHMC"):
        plan = schedule_for(alg, eps, d=d)
        assert plan.delta > 0
        assert plan.eta is None or plan.eta > 0
        assert plan.K >= 1


# -- divergence bounds -------------------------------------------------------------


def test_kl_example():
    # ln(1 + sqrt(0.01 pi)/2) = ln(1.0886227) = 0.0849133
    assert kl_quadrature(lambda x: 0.0, (-1, 1), 0.01) == pytest.approx(0.0849133, abs=5e-8)


@pytest.mark.parametrize("delta", [1e-1, 1e-2, 1e-3, 1e-4])
def test_kl_matches_closed_form(delta):
    assert abs(kl_quadrature(lambda x: 0.0, (-1, 1), delta) - _flat_kl(delta)) <= 1e-10


@pytest.mark.parametrize("f", [lambda x: 0.0, lambda x: 0.5 * x * x, lambda x: 3 * x, lambda x: x**4])
def test_kl_monotone_in_delta(f):
    values = [kl_quadrature(f, (-1, 2), 10.0**-k) for k in range(1, 6)]
    assert all(np.diff(values) < 0)
    assert values[-1] > 0


def test_kl_slope():
    deltas = np.array([1e-1, 1e-2, 1e-3, 1e-4])
    kl = [kl_quadrature(lambda x: 0.0, (-1, 1), d) for d in deltas]
    slope = np.polyfit(np.log(deltas), np.log(kl), 1)[0]
    assert 0.45 <= slope <= 0.55


def test_kl_rejects_bad_input():
    with pytest.raises(InvalidArgument):
        kl_quadrature(lambda x: 0.0, (1, -1), 0.1)
    with pytest.raises(InvalidArgument):
        kl_quadrature(lambda x: 0.0, (-1, 1), 0.0)


def test_radial_kl_matches_interval_in_one_dimension():
    for delta in (1e-1, 1e-3):
        assert kl_quadrature_radial(lambda r: 0.0, 1.0, delta, 1) == pytest.approx(_flat_kl(delta), rel=1e-10)


def test_laplace_estimate_is_leading_order():
    # flat potential on the unit disc: exact tail ratio approaches the Laplace value as delta -> 0
    inner = math.pi
    for delta in (1e-4, 1e-6):
        exact = math.expm1(kl_quadrature_radial(lambda r: 0.0, 1.0, delta, 2))
        approx = laplace_kl_estimate(2, 1.0, delta, inner)
        assert exact == pytest.approx(approx, rel=2 * math.sqrt(delta) + 1e-6)


def test_first_bound_dominates_exact_kl():
    delta = 0.01
    tail = math.sqrt(math.pi * delta)
    exact = kl_quadrature(lambda x: 0.0, (-1, 1), delta)
    assert kl_first_bound(tail, 2.0) >= exact


def test_second_bound_positive_and_shrinking():
    vals = [kl_second_bound(d=2, r=0.5, R=1.0, delta=dl, alpha_tilde=1.0, inf_f=0.0,
                            tail_integral=1.0, inner_integral=math.pi) for dl in (1e-2, 1e-4, 1e-6)]
    assert all(v > 0 for v in vals)
    assert all(np.diff(vals) < 0)
    with pytest.raises(InvalidArgument):
        kl_second_bound(2, 0.5, 1.0, 1.5, 1.0, 0.0, 1.0, 1.0)


def test_wckp_examples():
    assert wckp_bound(0.0, 1.0) == 0.0
    assert wckp_bound(2.0, 1.0) == pytest.approx(2.414214, abs=5e-7)
    assert wckp_bound(0.5, 2.0) == pytest.approx(2.828427, abs=5e-7)
    with pytest.raises(InvalidArgument):
        wckp_bound(-0.1, 1.0)
    with pytest.raises(InvalidArgument):
        wckp_bound(0.1, 0.0)


@settings(max_examples=100)
@given(D1=st.floats(0, 100), D2=st.floats(0, 100), c=st.floats(0.01, 100), k=st.floats(0.01, 100))
def test_wckp_monotone_and_homogeneous(D1, D2, c, k):
    lo, hi = sorted((D1, D2))
    assert wckp_bound(lo, c) <= wckp_bound(hi, c)
    assert wckp_bound(D1, k * c) == pytest.approx(k * wckp_bound(D1, c), rel=1e-12)


def test_wckp_constant():
    assert wckp_constant(1.5, 0.0) == pytest.approx(2.0)
    with pytest.raises(InvalidArgument):
        wckp_constant(0.0, 1.0)
