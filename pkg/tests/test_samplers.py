import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from penalized_sampler.data import gen_linear
from penalized_sampler.errors import DivergenceError, InvalidArgument
from penalized_sampler.geometry import DistanceSquared, L2Ball
from penalized_sampler.potentials import GradientOracle, gaussian_potential, make_least_squares, zero_potential
from penalized_sampler.samplers import (
    HmcConfig,
    LangevinConfig,
    StepSchedule,
    coeffs_by_quadrature,
    covariance_by_quadrature,
    hmc_run,
    integrator_coeffs,
    langevin_run,
    noise_covariance,
    run,
    schedule_eval,
)

# frozen regression bound for the stationary tail fraction (measured ratio about 0.07)
CONFINEMENT_C = 0.15


# -- integrator coefficients -----------------------------------------------------


def test_coeffs_unit_example():
    np.testing.assert_allclose(integrator_coeffs(1.0, 1.0), (0.367879, 0.632121, 0.367879), atol=5e-7)


@pytest.mark.parametrize("gamma", [0.0, 1e-9])
def test_coeffs_small_gamma_limit(gamma):
    assert integrator_coeffs(gamma, 0.3) == (1.0, 0.3, 0.045)


@settings(max_examples=200)
@given(gamma=st.floats(1e-6, 50), eta=st.floats(1e-6, 10))
def test_coeffs_below_frictionless_values(gamma, eta):
    _, psi1, psi2 = integrator_coeffs(gamma, eta)
    assert psi1 < eta
    assert psi2 < 0.5 * eta**2


@settings(max_examples=100)
@given(gamma=st.floats(1e-7, 30), eta=st.floats(1e-5, 5))
def test_coeffs_match_quadrature(gamma, eta):
    np.testing.assert_allclose(integrator_coeffs(gamma, eta), coeffs_by_quadrature(gamma, eta),
                               rtol=1e-10, atol=1e-14)


def test_coeffs_reject_bad_input():
    for args in ((-1.0, 1.0), (1.0, 0.0), (float("nan"), 1.0), (1.0, float("inf"))):
        with pytest.raises(InvalidArgument):
            integrator_coeffs(*args)


def test_covariance_small_gamma():
    eta = 0.7
    cov, _ = noise_covariance(0.0, eta)
    np.testing.assert_allclose(cov, [[eta, eta**2 / 2], [eta**2 / 2, eta**3 / 3]], rtol=1e-15)


def test_covariance_unit_example():
    cov, _ = noise_covariance(1.0, 1.0)
    assert cov[0, 0] == pytest.approx(0.432332, abs=5e-7)
    assert cov[0, 1] == pytest.approx(0.199788, abs=5e-7)
    # closed form 1 - 2(1 - e^-1) + (1 - e^-2)/2
    assert cov[1, 1] == pytest.approx(0.1680912, abs=5e-7)


@settings(max_examples=100)
@given(gamma=st.floats(0, 30), eta=st.floats(1e-4, 5))
def test_covariance_psd_and_factor(gamma, eta):
    cov, factor = noise_covariance(gamma, eta, validate=False)
    assert np.all(np.linalg.eigvalsh(cov) >= -1e-15 * np.abs(cov).max())
    assert factor[0, 1] == 0.0
    np.testing.assert_allclose(factor @ factor.T, cov, rtol=1e-9, atol=1e-15 * cov[0, 0])


def test_covariance_matches_quadrature_on_grid():
    for gamma in np.geomspace(1e-3, 20, 8):
        for eta in np.geomspace(1e-3, 3, 8):
            cov, _ = noise_covariance(gamma, eta, validate=False)
            quad = covariance_by_quadrature(gamma, eta)
            np.testing.assert_allclose(cov, quad, rtol=1e-10, atol=1e-15)


def test_sampled_noise_pairs_match_covariance():
    # one zero-force step from rest exposes sqrt(2 gamma) times the noise pair
    gamma, eta, n = 1.0, 0.1, 200_000
    cfg = HmcConfig(delta=1.0, gamma=gamma, schedule=StepSchedule(eta), steps=1, seed=3)
    out = hmc_run(zero_potential(1), None, cfg, np.zeros((n, 1)), np.zeros((n, 1)))
    xi = out.final_velocity[:, 0] / math.sqrt(2 * gamma)
    xi_p = out.final_position[:, 0] / math.sqrt(2 * gamma)
    cov, _ = noise_covariance(gamma, eta)
    for est, target in ((xi * xi, cov[0, 0]), (xi * xi_p, cov[0, 1]), (xi_p * xi_p, cov[1, 1])):
        se = est.std(ddof=1) / math.sqrt(n)
        assert abs(est.mean() - target) <= 3 * se


# -- schedule --------------------------------------------------------------------


def test_schedule_examples():
    sched = StepSchedule(1e-4, 0.75, 1000)
    assert schedule_eval(sched, 0) == 1e-4
    assert schedule_eval(sched, 999) == 1e-4
    assert schedule_eval(sched, 1000) == pytest.approx(7.5e-5, rel=1e-15)
    const = StepSchedule(0.3)
    assert {schedule_eval(const, k) for k in range(0, 10_000, 997)} == {0.3}


def test_schedule_validation():
    for args in ((0.0,), (1.0, 1.5), (1.0, 0.0), (1.0, 0.5, 0)):
        with pytest.raises(InvalidArgument):
            StepSchedule(*args)
    with pytest.raises(InvalidArgument):
        schedule_eval(StepSchedule(1.0), -1)


# -- Langevin --------------------------------------------------------------------


def test_langevin_gradient_descent_step():
    cfg = LangevinConfig(delta=1.0, schedule=StepSchedule(0.1), steps=1, noise=False)
    out = langevin_run(gaussian_potential(1), None, cfg, np.array([1.0]))
    assert out.final_position[0] == pytest.approx(0.9, abs=1e-15)


def test_langevin_penalty_step():
    cfg = LangevinConfig(delta=1.0, schedule=StepSchedule(0.25), steps=1, noise=False)
    out = langevin_run(zero_potential(2), DistanceSquared(L2Ball(1.0, 2)), cfg, np.array([2.0, 0.0]))
    np.testing.assert_allclose(out.final_position, [1.5, 0.0], atol=1e-15)


def test_langevin_stationary_variance():
    # 10^4 independent chains started at the target, 100 relaxation times of 1/eta steps
    cfg = LangevinConfig(delta=1.0, schedule=StepSchedule(1e-3), steps=1000, seed=4, record_every=1000)
    x0 = np.random.default_rng(0).standard_normal((10_000, 1))
    out = langevin_run(gaussian_potential(1), None, cfg, x0)
    assert out.final_position.var() == pytest.approx(1.0, abs=0.05)


def test_penalty_confinement():
    delta = 0.01
    body = L2Ball(1.0, 2)
    cfg = LangevinConfig(delta=delta, schedule=StepSchedule(1e-3), steps=3000, seed=5,
                         record_every=100, burn_in=1000)
    x0 = np.random.default_rng(0).uniform(-0.5, 0.5, size=(2000, 2))
    out = langevin_run(zero_potential(2), DistanceSquared(body), cfg, x0)
    dist = body.distance(out.samples)
    for theta in (0.1, 0.01):
        assert np.mean(dist > math.sqrt(delta * math.log(1 / theta))) <= CONFINEMENT_C * theta


def test_recording_and_burn_in():
    cfg = LangevinConfig(delta=1.0, schedule=StepSchedule(0.01), steps=100, burn_in=40, record_every=6)
    out = langevin_run(gaussian_potential(2), None, cfg, np.zeros((3, 2)))
    np.testing.assert_array_equal(out.steps, np.arange(46, 101, 6))
    assert out.trace.shape == (10, 3, 2)
    assert out.samples.shape == (30, 2)
    np.testing.assert_array_equal(out.sample_steps[:3], [46, 46, 46])
    np.testing.assert_array_equal(out.sample_chains[:4], [0, 1, 2, 0])
    np.testing.assert_array_equal(out.trace[-1], out.final_position)


def test_single_point_shapes():
    cfg = LangevinConfig(delta=1.0, schedule=StepSchedule(0.01), steps=5)
    out = langevin_run(gaussian_potential(3), None, cfg, np.zeros(3))
    assert out.final_position.shape == (3,)
    assert out.trace.shape == (5, 1, 3)
    assert out.metadata["algorithm"] == "PLD"


@pytest.mark.parametrize("sampler", ["langevin", "hmc"])
def test_determinism(sampler):
    pot = make_least_squares(gen_linear(n=200, seed=1))
    pen = DistanceSquared(L2Ball(1.0, 2))

    def go(seed):
        if sampler == "langevin":
            cfg = LangevinConfig(delta=0.1, schedule=StepSchedule(1e-4, 0.5, 20), steps=60,
                                 seed=seed, batch_size=10)
        else:
            cfg = HmcConfig(delta=0.1, gamma=0.5, schedule=StepSchedule(1e-3, 0.5, 20), steps=60,
                            seed=seed, batch_size=10)
        return run(pot, pen, cfg, np.zeros((4, 2)))

    a, b, c = go(7), go(7), go(8)
    assert a.trace.tobytes() == b.trace.tobytes()
    assert a.metadata == b.metadata
    assert a.trace.tobytes() != c.trace.tobytes()


def test_divergence_reports_step():
    cfg = LangevinConfig(delta=1.0, schedule=StepSchedule(5.0), steps=1000, noise=False)
    with pytest.raises(DivergenceError) as info:
        langevin_run(gaussian_potential(1), None, cfg, np.array([1.0]))
    # |x_k| = 4^k crosses 1e8 at k = 14
    assert info.value.step == 14


def test_bad_configs():
    sched = StepSchedule(0.1)
    with pytest.raises(InvalidArgument):
        LangevinConfig(delta=0.0, schedule=sched, steps=1)
    with pytest.raises(InvalidArgument):
        LangevinConfig(delta=1.0, schedule=sched, steps=0)
    with pytest.raises(InvalidArgument):
        HmcConfig(delta=1.0, gamma=0.0, schedule=sched, steps=1)
    cfg = LangevinConfig(delta=1.0, schedule=sched, steps=1)
    with pytest.raises(InvalidArgument):
        langevin_run(gaussian_potential(2), None, cfg, np.zeros(3))
    with pytest.raises(InvalidArgument):
        langevin_run(gaussian_potential(2), None, cfg, np.array([np.nan, 0.0]))
    with pytest.raises(InvalidArgument):
        run(gaussian_potential(2), None, object(), np.zeros(2))


# -- Hamiltonian -----------------------------------------------------------------


def test_hmc_free_step_example():
    cfg = HmcConfig(delta=1.0, gamma=1.0, schedule=StepSchedule(1.0), steps=1, noise=False)
    out = hmc_run(zero_potential(1), None, cfg, np.zeros(1), np.ones(1))
    assert out.final_velocity[0] == pytest.approx(0.367879, abs=5e-7)
    assert out.final_position[0] == pytest.approx(0.632121, abs=5e-7)


def test_hmc_free_flight():
    cfg = HmcConfig(delta=1.0, gamma=1e-12, schedule=StepSchedule(0.5), steps=1, noise=False)
    out = hmc_run(zero_potential(2), None, cfg, np.array([1.0, -1.0]), np.array([2.0, 3.0]))
    np.testing.assert_array_equal(out.final_velocity, [2.0, 3.0])
    np.testing.assert_array_equal(out.final_position, [2.0, 0.5])


def test_hmc_matches_exact_ou_law():
    gamma, eta, k, n = 1.0, 0.05, 100, 10_000
    cfg = HmcConfig(delta=1.0, gamma=gamma, schedule=StepSchedule(eta), steps=k, seed=11,
                    record_every=k, record_velocity=True)
    out = hmc_run(zero_potential(1), None, cfg, np.zeros((n, 1)), np.zeros((n, 1)))
    x, v = out.final_position[:, 0], out.final_velocity[:, 0]
    cov_t, _ = noise_covariance(gamma, k * eta)
    var_v, var_x = 2 * gamma * cov_t[0, 0], 2 * gamma * cov_t[1, 1]
    assert abs(v.mean()) <= 3 * math.sqrt(var_v / n)
    assert abs(x.mean()) <= 3 * math.sqrt(var_x / n)
    assert abs(v.var() - var_v) <= 3 * var_v * math.sqrt(2 / (n - 1))
    assert abs(x.var() - var_x) <= 3 * var_x * math.sqrt(2 / (n - 1))
    np.testing.assert_array_equal(out.velocity_trace[-1], out.final_velocity)


def test_hmc_stationary_velocity_variance():
    cfg = HmcConfig(delta=1.0, gamma=1.0, schedule=StepSchedule(0.1), steps=200, seed=2)
    out = hmc_run(zero_potential(1), None, cfg, np.zeros((20_000, 1)))
    assert out.final_velocity.var() == pytest.approx(1.0, abs=0.03)


def test_hmc_initial_velocity_variance_option():
    cfg = HmcConfig(delta=1.0, gamma=1.0, schedule=StepSchedule(1e-12), steps=1, seed=0,
                    velocity_variance=0.25, noise=False)
    out = hmc_run(zero_potential(1), None, cfg, np.zeros((20_000, 1)))
    assert out.final_velocity.var() == pytest.approx(0.25, rel=0.05)


def test_hmc_v0_shape_checked():
    cfg = HmcConfig(delta=1.0, gamma=1.0, schedule=StepSchedule(0.1), steps=1)
    with pytest.raises(InvalidArgument):
        hmc_run(zero_potential(2), None, cfg, np.zeros((3, 2)), np.zeros((2, 2)))


def test_hmc_recomputes_coefficients_per_step_size():
    # decaying schedule: a single-chain run equals two runs glued at the decay boundary
    pot = gaussian_potential(1)
    sched = StepSchedule(0.2, 0.5, 3)
    cfg = HmcConfig(delta=1.0, gamma=0.7, schedule=sched, steps=6, noise=False)
    out = hmc_run(pot, None, cfg, np.array([1.0]), np.array([0.0]))
    first = hmc_run(pot, None, HmcConfig(delta=1.0, gamma=0.7, schedule=StepSchedule(0.2), steps=3,
                                         noise=False), np.array([1.0]), np.array([0.0]))
    second = hmc_run(pot, None, HmcConfig(delta=1.0, gamma=0.7, schedule=StepSchedule(0.1), steps=3,
                                          noise=False), first.final_position, first.final_velocity)
    np.testing.assert_allclose(out.final_position, second.final_position, rtol=1e-14)


# -- mini-batch variance ---------------------------------------------------------


def test_batch_size_variance_exponent():
    pot = make_least_squares(gen_linear(n=5000, seed=3))
    x = np.array([0.2, -0.4])
    sizes = np.array([1, 5, 25, 125])
    variances = []
    for b in sizes:
        oracle = GradientOracle(pot, batch_size=int(b), rng=np.random.default_rng(int(b)))
        draws = oracle(np.broadcast_to(x, (20_000, 2)))
        variances.append(np.sum(draws.var(axis=0)))
    slope = np.polyfit(np.log(sizes), np.log(variances), 1)[0]
    assert 0.8 <= -slope <= 1.2
