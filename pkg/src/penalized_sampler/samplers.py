"""Penalized overdamped (PLD/PSGLD) and underdamped (PHMC/PSGHMC) samplers.

Both samplers target ``pi_delta(x) ~ exp(-f(x) - S(x)/delta)``. They accept a
single starting point of shape ``(d,)`` or an ensemble ``(n_chains, d)``; an
ensemble shares one random stream but every chain evolves independently.
"""

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import DivergenceError, InternalConsistencyError, InvalidArgument
from .potentials import GradientOracle

DIVERGENCE_LIMIT = 1e8
SMALL_GAMMA = 1e-8
_SERIES_CUTOFF = 1.0
_SERIES_TERMS = 30


@dataclass(frozen=True)
class StepSchedule:
    """Piecewise-constant step size ``eta0 * decay_factor ** (k // decay_period)``."""

    eta0: float
    decay_factor: float = 1.0
    decay_period: int = 1

    def __post_init__(self):
        if not self.eta0 > 0:
            raise InvalidArgument("eta0 must be positive")
        if not 0 < self.decay_factor <= 1:
            raise InvalidArgument("decay_factor must lie in (0, 1]")
        if self.decay_period < 1:
            raise InvalidArgument("decay_period must be >= 1")

    def __call__(self, k):
        return self.eta0 * self.decay_factor ** (k // self.decay_period)


def schedule_eval(schedule, k):
    if k < 0:
        raise InvalidArgument("step index must be nonnegative")
    return schedule(k)


# -- integrator coefficients ----------------------------------------------------


def _phi1(x):
    # (1 - e^-x) / x
    return 1.0 if x == 0 else -math.expm1(-x) / x


def _phi2(x):
    # (x - 1 + e^-x) / x^2
    if x < _SERIES_CUTOFF:
        return sum((-x) ** n / math.factorial(n + 2) for n in range(_SERIES_TERMS))
    return (x + math.expm1(-x)) / x**2


def _c22(x):
    # (x - 2(1 - e^-x) + (1 - e^-2x)/2) / x^3
    if x < _SERIES_CUTOFF:
        return sum((-1) ** n * (2 - 2 ** (n - 1)) / math.factorial(n) * x ** (n - 3)
                   for n in range(3, _SERIES_TERMS + 3))
    return (x + 2 * math.expm1(-x) - 0.5 * math.expm1(-2 * x)) / x**3


def _check_gamma_eta(gamma, eta):
    if not (math.isfinite(gamma) and math.isfinite(eta)):
        raise InvalidArgument("gamma and eta must be finite")
    if gamma < 0:
        raise InvalidArgument("gamma must be nonnegative")
    if not eta > 0:
        raise InvalidArgument("eta must be positive")


def integrator_coeffs(gamma, eta):
    """``(psi0(eta), psi1(eta), psi2(eta))`` for ``psi0(t) = exp(-gamma t)`` and
    ``psi_{k+1}(t) = int_0^t psi_k``."""
    _check_gamma_eta(gamma, eta)
    if gamma < SMALL_GAMMA:
        return 1.0, eta, 0.5 * eta**2
    x = gamma * eta
    return math.exp(-x), eta * _phi1(x), eta**2 * _phi2(x)


def noise_covariance(gamma, eta, validate=True):
    """Covariance ``C(eta) = int_0^eta [psi0, psi1]^T [psi0, psi1] dt`` and a
    lower-triangular factor ``F`` with ``F F^T = C``.

    Closed forms: ``C11 = eta*phi1(2 gamma eta)``, ``C12 = psi1(eta)^2 / 2``,
    ``C22 = int_0^eta psi1^2``. With ``validate`` every entry is checked
    against adaptive quadrature.
    """
    _check_gamma_eta(gamma, eta)
    if gamma < SMALL_GAMMA:
        c11, c12, c22 = eta, 0.5 * eta**2, eta**3 / 3.0
    else:
        x = gamma * eta
        psi1 = eta * _phi1(x)
        c11 = eta * _phi1(2 * x)
        c12 = 0.5 * psi1**2
        c22 = eta**3 * _c22(x)
    cov = np.array([[c11, c12], [c12, c22]])
    if validate:
        quad = covariance_by_quadrature(gamma, eta)
        err = np.abs(cov - quad)
        if np.any(err > 1e-10 * np.maximum(1.0, np.abs(quad))):
            raise InternalConsistencyError(
                f"closed-form covariance disagrees with quadrature (max err {err.max():.3e})")
    l11 = math.sqrt(c11)
    l21 = c12 / l11
    l22 = math.sqrt(max(c22 - l21 * l21, 0.0))
    factor = np.array([[l11, 0.0], [l21, l22]])
    return cov, factor


def _psi1_t(gamma, t):
    return t if gamma < SMALL_GAMMA else t * _phi1(gamma * t)


def covariance_by_quadrature(gamma, eta):
    """Same integral as ``noise_covariance`` evaluated by ``scipy.integrate.quad``."""
    opts = dict(epsabs=1e-15, epsrel=1e-13, limit=200)
    c11 = integrate.quad(lambda t: math.exp(-2 * gamma * t), 0, eta, **opts)[0]
    c12 = integrate.quad(lambda t: math.exp(-gamma * t) * _psi1_t(gamma, t), 0, eta, **opts)[0]
    c22 = integrate.quad(lambda t: _psi1_t(gamma, t) ** 2, 0, eta, **opts)[0]
    return np.array([[c11, c12], [c12, c22]])


def coeffs_by_quadrature(gamma, eta):
    opts = dict(epsabs=1e-15, epsrel=1e-13, limit=200)
    psi1 = integrate.quad(lambda t: math.exp(-gamma * t), 0, eta, **opts)[0]
    psi2 = integrate.quad(lambda t: _psi1_t(gamma, t), 0, eta, **opts)[0]
    return math.exp(-gamma * eta), psi1, psi2


# -- configuration and output ---------------------------------------------------


@dataclass(frozen=True)
class LangevinConfig:
    """PLD when ``batch_size`` is None, PSGLD otherwise."""

    delta: float
    schedule: StepSchedule
    steps: int
    seed: int = 0
    batch_size: Optional[int] = None
    record_every: int = 1
    burn_in: int = 0
    noise: bool = True  # test hook: False turns the recursion into gradient descent

    def __post_init__(self):
        _check_common(self)

    @property
    def algorithm(self):
        return "PLD" if self.batch_size is None else "PSGLD"


@dataclass(frozen=True)
class HmcConfig:
    """PHMC when ``batch_size`` is None, PSGHMC otherwise.

    When no initial velocity is passed, ``v0 ~ N(0, velocity_variance * I)``.
    """

    delta: float
    gamma: float
    schedule: StepSchedule
    steps: int
    seed: int = 0
    batch_size: Optional[int] = None
    record_every: int = 1
    burn_in: int = 0
    velocity_variance: float = 1.0
    record_velocity: bool = False
    noise: bool = True

    def __post_init__(self):
        _check_common(self)
        if not self.gamma > 0:
            raise InvalidArgument("friction gamma must be positive")
        if not self.velocity_variance >= 0:
            raise InvalidArgument("velocity_variance must be nonnegative")

    @property
    def algorithm(self):
        return "PHMC" if self.batch_size is None else "PSGHMC"


def _check_common(cfg):
    if not cfg.delta > 0:
        raise InvalidArgument("delta must be positive")
    if cfg.steps < 1:
        raise InvalidArgument("steps must be >= 1")
    if cfg.record_every < 1:
        raise InvalidArgument("record_every must be >= 1")
    if cfg.burn_in < 0:
        raise InvalidArgument("burn_in must be >= 0")


def config_hash(cfg):
    payload = json.dumps(asdict(cfg), sort_keys=True, default=str)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class SampleBatch:
    """Recorded iterates.

    ``trace`` has shape ``(n_records, n_chains, d)`` and ``steps`` the step
    index of each record. ``samples`` is the flattened ``(n_records *
    n_chains, d)`` matrix, ordered by step then chain.
    """

    trace: np.ndarray
    steps: np.ndarray
    final_position: np.ndarray
    final_velocity: Optional[np.ndarray] = None
    velocity_trace: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    @property
    def samples(self):
        return self.trace.reshape(-1, self.trace.shape[-1])

    @property
    def sample_steps(self):
        return np.repeat(self.steps, self.trace.shape[1])

    @property
    def sample_chains(self):
        return np.tile(np.arange(self.trace.shape[1]), self.trace.shape[0])

    @property
    def n_chains(self):
        return self.trace.shape[1]

    @property
    def dim(self):
        return self.trace.shape[-1]


def _streams(seed):
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    noise_ss, batch_ss, init_ss = ss.spawn(3)
    return (np.random.default_rng(noise_ss), np.random.default_rng(batch_ss),
            np.random.default_rng(init_ss))


def _prepare(potential, penalty, cfg, x0):
    x = np.array(x0, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != potential.dim:
        raise InvalidArgument(f"x0 must have shape (d,) or (n, d) with d = {potential.dim}")
    if penalty is not None and getattr(penalty, "dim", None) not in (None, potential.dim):
        raise InvalidArgument("penalty and potential dimensions differ")
    if not np.all(np.isfinite(x)):
        raise InvalidArgument("x0 must be finite")
    noise_rng, batch_rng, init_rng = _streams(cfg.seed)
    oracle = GradientOracle(potential, cfg.batch_size, batch_rng if cfg.batch_size else None)
    n_rec = _record_count(cfg)
    return x, single, noise_rng, init_rng, oracle, n_rec


def _record_count(cfg):
    if cfg.steps <= cfg.burn_in:
        return 0
    return (cfg.steps - cfg.burn_in) // cfg.record_every


def _should_record(cfg, step):
    return step > cfg.burn_in and (step - cfg.burn_in) % cfg.record_every == 0


def _force(oracle, penalty, inv_delta, x):
    g = oracle(x)
    if penalty is not None:
        g = g + inv_delta * penalty.grad(x)
    return g


def _check_finite(x, step):
    peak = np.max(np.abs(x))
    if not peak <= DIVERGENCE_LIMIT / math.sqrt(x.shape[-1]):
        norms = np.linalg.norm(x, axis=-1)
        worst = float(np.nanmax(norms)) if np.any(np.isfinite(norms)) else float("nan")
        if not np.all(np.isfinite(x)) or worst > DIVERGENCE_LIMIT:
            raise DivergenceError(step, worst if np.all(np.isfinite(x)) else float("inf"))


def _metadata(cfg, potential, penalty, n_chains):
    return {
        "algorithm": cfg.algorithm,
        "config_hash": config_hash(cfg),
        "seed": cfg.seed if isinstance(cfg.seed, int) else str(cfg.seed),
        "potential": potential.name,
        "penalty": repr(penalty),
        "n_chains": n_chains,
    }


def langevin_run(potential, penalty, config, x0):
    """Run ``x_{k+1} = x_k - eta_k (g(x_k) + grad S(x_k)/delta) + sqrt(2 eta_k) xi``."""
    cfg = config
    x, single, noise_rng, _, oracle, n_rec = _prepare(potential, penalty, cfg, x0)
    inv_delta = 1.0 / cfg.delta
    trace = np.empty((n_rec,) + x.shape)
    steps = np.empty(n_rec, dtype=np.int64)
    r = 0
    for k in range(cfg.steps):
        eta = cfg.schedule(k)
        x = x - eta * _force(oracle, penalty, inv_delta, x)
        if cfg.noise:
            x = x + math.sqrt(2.0 * eta) * noise_rng.standard_normal(x.shape)
        _check_finite(x, k + 1)
        if _should_record(cfg, k + 1):
            trace[r] = x
            steps[r] = k + 1
            r += 1
    final = x[0].copy() if single else x.copy()
    return SampleBatch(trace=trace, steps=steps, final_position=final,
                       metadata=_metadata(cfg, potential, penalty, x.shape[0]))


def hmc_run(potential, penalty, config, x0, v0=None):
    """Run the penalized underdamped recursion with the exact-OU integrator.

    Per step and coordinate a correlated pair ``(xi, xi')`` with covariance
    ``C(eta_k)`` is drawn, then::

        v' = psi0 v - psi1 F(x) + sqrt(2 gamma) xi
        x' = x + psi1 v - psi2 F(x) + sqrt(2 gamma) xi'

    where ``F = g + grad S / delta``. Coefficients are recomputed (and cached)
    whenever the scheduled step size changes.
    """
    cfg = config
    x, single, noise_rng, init_rng, oracle, n_rec = _prepare(potential, penalty, cfg, x0)
    if v0 is None:
        v = math.sqrt(cfg.velocity_variance) * init_rng.standard_normal(x.shape)
    else:
        v = np.array(v0, dtype=float)
        v = v[None, :] if v.ndim == 1 else v
        if v.shape != x.shape:
            raise InvalidArgument("v0 must match the shape of x0")
    inv_delta = 1.0 / cfg.delta
    noise_scale = math.sqrt(2.0 * cfg.gamma)
    trace = np.empty((n_rec,) + x.shape)
    vtrace = np.empty((n_rec,) + x.shape) if cfg.record_velocity else None
    steps = np.empty(n_rec, dtype=np.int64)
    cache = {}
    r = 0
    for k in range(cfg.steps):
        eta = cfg.schedule(k)
        if eta not in cache:
            cache[eta] = (integrator_coeffs(cfg.gamma, eta), noise_covariance(cfg.gamma, eta)[1])
        (psi0, psi1, psi2), factor = cache[eta]
        F = _force(oracle, penalty, inv_delta, x)
        v_new = psi0 * v - psi1 * F
        x = x + psi1 * v - psi2 * F
        if cfg.noise:
            z = noise_rng.standard_normal(x.shape + (2,))
            v_new = v_new + noise_scale * (factor[0, 0] * z[..., 0])
            x = x + noise_scale * (factor[1, 0] * z[..., 0] + factor[1, 1] * z[..., 1])
        v = v_new
        _check_finite(x, k + 1)
        if _should_record(cfg, k + 1):
            trace[r] = x
            if vtrace is not None:
                vtrace[r] = v
            steps[r] = k + 1
            r += 1
    final_x = x[0].copy() if single else x.copy()
    final_v = v[0].copy() if single else v.copy()
    return SampleBatch(trace=trace, steps=steps, final_position=final_x, final_velocity=final_v,
                       velocity_trace=vtrace, metadata=_metadata(cfg, potential, penalty, x.shape[0]))


def run(potential, penalty, config, x0, v0=None):
    """Dispatch on the config type."""
    if isinstance(config, HmcConfig):
        return hmc_run(potential, penalty, config, x0, v0)
    if isinstance(config, LangevinConfig):
        return langevin_run(potential, penalty, config, x0)
    raise InvalidArgument(f"unknown sampler config {type(config).__name__}")
