"""Evaluable constants, step-size/iteration schedules and distance bounds.

The schedule calculators return literal evaluations of order-of-magnitude
rates; the hidden constants of those rates are exposed as caller-supplied
multipliers (default 1).
"""

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate

from .errors import InvalidArgument, NumericalFailure

FIXED_POINT_MAX_ITER = 100
FIXED_POINT_TOL = 1e-12


def _finite_or_none(value):
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


@dataclass
class PenalizedConstants:
    L_delta: float
    m_delta: float
    b_delta: float
    M: float
    lam: float
    A: float
    Lambda_big: float
    alpha1: float
    mu_star: float
    log_mu_star: float
    m_delta_valid: bool
    M_valid: bool
    fixed_point_iterations: int
    inputs: dict = field(default_factory=dict)
    kappa0: Optional[float] = None

    def to_dict(self):
        out = {}
        for key, value in asdict(self).items():
            if isinstance(value, float):
                value = _finite_or_none(value)
            out[key] = value
        return out


def mu_star_from(gamma, lam, Lambda_big, L_delta):
    """Underdamped contraction rate ``gamma/768 * min{lam L g^-2, sqrt(Lam) e^-Lam L g^-2, sqrt(Lam) e^-Lam}``."""
    return math.exp(log_mu_star_from(gamma, lam, Lambda_big, L_delta))


def log_mu_star_from(gamma, lam, Lambda_big, L_delta):
    if lam <= 0 or Lambda_big <= 0:
        return float("nan")
    ratio = L_delta / gamma**2
    tail = 0.5 * math.log(Lambda_big) - Lambda_big
    candidates = [math.log(lam * ratio), tail + math.log(ratio), tail]
    return math.log(gamma / 768.0) + min(candidates)


def solve_lambda_alpha1(L_delta, gamma, lam, d, A, max_iter=FIXED_POINT_MAX_ITER, tol=FIXED_POINT_TOL):
    """Fixed point of ``Lambda(alpha1)`` and ``alpha1(Lambda)``.

    ``Lambda = 12/5 (1 + 2 a + 2 a^2)(d + A) L g^-2 / (lam (1 - 2 lam))`` and
    ``a = (1 + 1/Lambda) L g^-2``, started from ``a = L g^-2``.
    """
    ratio = L_delta / gamma**2
    alpha1 = ratio
    Lambda_big = float("nan")
    for it in range(1, max_iter + 1):
        Lambda_big = 2.4 * (1 + 2 * alpha1 + 2 * alpha1**2) * (d + A) * ratio / (lam * (1 - 2 * lam))
        new_alpha1 = (1 + 1 / Lambda_big) * ratio
        change = abs(new_alpha1 - alpha1) / abs(alpha1) if alpha1 else abs(new_alpha1)
        alpha1 = new_alpha1
        if change < tol:
            break
    Lambda_big = 2.4 * (1 + 2 * alpha1 + 2 * alpha1**2) * (d + A) * ratio / (lam * (1 - 2 * lam))
    return Lambda_big, alpha1, it


def penalized_constants(L, grad_f0_norm, f0, ell, m_S, b_S, delta, gamma, d, kappa0=None):
    """Smoothness, dissipativity and rate constants of ``f + S/delta``.

    Validity conditions are reported as flags; the numbers are computed
    regardless.
    """
    values = [L, grad_f0_norm, f0, ell, m_S, b_S, delta, gamma]
    if not all(math.isfinite(v) for v in values):
        raise InvalidArgument("inputs must be finite")
    if delta <= 0 or gamma <= 0 or d < 1:
        raise InvalidArgument("need delta > 0, gamma > 0, d >= 1")
    L_delta = L + ell / delta
    m_delta = -L - 0.5 + m_S / delta
    b_delta = 0.5 * grad_f0_norm**2 + b_S / delta
    M = -f0 + 0.5 * grad_f0_norm**2 + b_S / (2 * delta) * math.log(3)
    lam = 0.5 * min(0.25, m_delta / (L_delta + gamma**2 / 2))
    A = m_delta / (2 * L_delta + gamma**2) * (
        grad_f0_norm**2 / (2 * L_delta + gamma**2)
        + b_delta / m_delta * (L_delta + 0.5 * gamma**2)
        + f0
    )
    if lam > 0:
        Lambda_big, alpha1, iters = solve_lambda_alpha1(L_delta, gamma, lam, d, A)
    else:
        Lambda_big, alpha1, iters = float("nan"), float("nan"), 0
    log_mu = log_mu_star_from(gamma, lam, Lambda_big, L_delta)
    mu = math.exp(log_mu) if math.isfinite(log_mu) else float("nan")
    return PenalizedConstants(
        L_delta=L_delta,
        m_delta=m_delta,
        b_delta=b_delta,
        M=M,
        lam=lam,
        A=A,
        Lambda_big=Lambda_big,
        alpha1=alpha1,
        mu_star=mu,
        log_mu_star=log_mu,
        m_delta_valid=delta < m_S / (L + 0.5),
        M_valid=delta <= 2 * m_S / (3 * (1 + L)),
        fixed_point_iterations=iters,
        inputs=dict(L=L, grad_f0_norm=grad_f0_norm, f0=f0, ell=ell, m_S=m_S, b_S=b_S,
                    delta=delta, gamma=gamma, d=d),
        kappa0=kappa0,
    )


def lyapunov(x, v, f_value, S_value, delta, gamma, lam):
    """``f + S/delta + gamma^2/4 (|x + v/gamma|^2 + |v/gamma|^2 - lam |x|^2)`` pointwise."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    w = v / gamma
    quad = np.sum((x + w) ** 2, -1) + np.sum(w * w, -1) - lam * np.sum(x * x, -1)
    return f_value + S_value / delta + 0.25 * gamma**2 * quad


# -- schedules -----------------------------------------------------------------

ALGORITHMS = ("PLD", "PHMC", "PSGLD", "PSGHMC")


@dataclass
class SchedulePlan:
    algorithm: str
    convex: bool
    epsilon: float
    d: int
    delta: float
    eta: Optional[float]
    K: Optional[float]
    K_hat: Optional[float]
    batch_size: Optional[float]
    alpha: Optional[float]
    log_factor: float
    log10_K: Optional[float] = None
    log10_K_hat: Optional[float] = None
    log10_eta: Optional[float] = None
    multipliers: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self):
        out = {}
        for key, value in asdict(self).items():
            out[key] = _finite_or_none(value) if isinstance(value, float) else value
        return out


def _exp10(log10_value):
    if log10_value is None:
        return None
    if log10_value > 308:
        return float("inf")
    if log10_value < -323:
        return 0.0
    return 10.0**log10_value


def _l10(x):
    return math.log10(x)


def schedule_for(algorithm, epsilon, d=1, L=1.0, mu=1.0, multipliers=None, ell=4.0,
                 convex=True, h_strongly_convex=False, batch_size=None,
                 lambda_star=1.0, mu_star=None):
    """Parameter choices ``(delta, eta, K or K_hat, alpha, b)`` for a target accuracy.

    ``multipliers`` may hold ``K``, ``K_hat``, ``eta`` and ``b`` factors that
    stand in for the unspecified constants of the orders. ``K`` and ``K_hat``
    omit logarithmic factors; ``log_factor = ln(1/eps) ln(d)`` is reported
    separately.

    * PLD (nonconvex f): delta = eps^4, eta = eps^10/d, K = d/eps^10.
    * PHMC (nonconvex f): delta = eps^4, K = sqrt(d)/eps^7.
    * PSGLD, strongly convex: delta = eps^8, eta = eps^18 mu^2 / (d (L eps^8 + ell)^2),
      K_hat = d (L eps^8 + ell)^2 / (eps^18 mu^3).
    * PSGHMC, strongly convex: delta = eps^8 with the batch size, K_hat and eta
      of the corresponding stochastic-HMC rate.
    * PSGLD / PSGHMC with ``convex=False``: the nonconvex rates in terms of
      ``lambda_star`` / ``mu_star`` with ``b = 1/eta``.
    """
    alg = algorithm.upper()
    if alg not in ALGORITHMS:
        raise InvalidArgument(f"algorithm must be one of {ALGORITHMS}")
    if not 0 < epsilon < 1:
        raise InvalidArgument("epsilon must lie in (0, 1)")
    if d < 1:
        raise InvalidArgument("d must be >= 1")
    mult = {"K": 1.0, "K_hat": 1.0, "eta": 1.0, "b": 1.0}
    mult.update(multipliers or {})
    eps = float(epsilon)
    le = _l10(eps)
    log_factor = math.log(1 / eps) * math.log(d)
    notes = []
    alpha = None
    b = batch_size
    lK = lKh = leta = None

    if alg in ("PLD", "PHMC"):
        delta = _exp10(4 * le)
        alpha = 0.0 if h_strongly_convex else _exp10(2 * le)
        if alg == "PLD":
            lK = _l10(d) - 10 * le
            leta = -_l10(d) + 10 * le
        else:
            lK = 0.5 * _l10(d) - 7 * le
            notes.append("step size left implicit by the PHMC rate")
    elif convex:
        delta = _exp10(8 * le)
        q = L * eps**8 + ell
        if alg == "PSGLD":
            leta = 18 * le + 2 * _l10(mu) - _l10(d) - 2 * _l10(q)
            lKh = _l10(d) + 2 * _l10(q) - 18 * le - 3 * _l10(mu)
            if b is None:
                b = 1.0
                notes.append("batch size of constant order; K = K_hat / b with b = 1")
        else:
            s = (mu + L) * eps**8 + ell
            lb = (2 * _l10(L) + _l10(q) + _l10(eps**16 * d * mu + q**2) - 26 * le - 4 * _l10(mu))
            if b is None:
                b = mult["b"] * 10**lb if lb < 300 else float("inf")
            lKh = (2 * _l10(L) + 2 * _l10(q) + _l10(eps**16 * d * mu + q**2) + 0.5 * _l10(s)
                   - 39 * le - 6 * _l10(mu) + _l10(max(math.sqrt(d), math.sqrt(s) / eps**3)))
            eta1 = _l10(mu) + 9 * le - 0.5 * _l10(d) - _l10(q)
            eta2 = _l10(mu) + 12 * le - 0.5 * _l10(s) - _l10(q)
            leta = min(eta1, eta2)
    else:
        delta = _exp10(8 * le)
        if alg == "PSGLD":
            if not lambda_star > 0:
                raise InvalidArgument("lambda_star must be positive")
            loglam = math.log(1 / lambda_star) if lambda_star < 1 else 0.0
            lKh = (17 * _l10(d) - 9 * _l10(lambda_star) - 392 * le
                   + (8 * _l10(loglam) if loglam > 0 else 0.0))
            leta = (196 * le - 8 * _l10(d) + 4 * _l10(lambda_star)
                    - (4 * _l10(loglam) if loglam > 0 else 0.0))
            if loglam == 0:
                notes.append("log(1/lambda_star) factor dropped (lambda_star >= 1)")
        else:
            if mu_star is None or not mu_star > 0:
                raise InvalidArgument("nonconvex PSGHMC needs a positive mu_star")
            logmu = math.log(1 / mu_star) if mu_star < 1 else 0.0
            lKh = (7 * _l10(d) - 132 * le - 3 * _l10(mu_star)
                   + (5 * _l10(logmu) if logmu > 0 else 0.0))
            leta = (50 * le + _l10(mu_star) - 3 * _l10(d)
                    - (2 * _l10(logmu) if logmu > 0 else 0.0))
        if b is None:
            b = mult["b"] * _exp10(-leta)
            notes.append("batch size b = 1/eta")

    if lK is not None:
        lK += _l10(mult["K"])
    if lKh is not None:
        lKh += _l10(mult["K_hat"])
        if b and math.isfinite(b):
            lK = lKh - _l10(b)
            lK += _l10(mult["K"])
    if leta is not None:
        leta += _l10(mult["eta"])
    return SchedulePlan(
        algorithm=alg, convex=convex, epsilon=eps, d=int(d), delta=delta,
        eta=_exp10(leta), K=_exp10(lK), K_hat=_exp10(lKh), batch_size=b, alpha=alpha,
        log_factor=log_factor, log10_K=lK, log10_K_hat=lKh, log10_eta=leta,
        multipliers=mult, notes=notes,
    )


# -- divergence and distance bounds ----------------------------------------------


def _dist_sq_interval(x, a, b):
    if x < a:
        return (a - x) ** 2
    if x > b:
        return (x - b) ** 2
    return 0.0


def kl_quadrature(f, interval, delta, integration_halfwidth=None, tol=1e-12):
    """Exact ``D(pi || pi_delta) = log(int_R e^{-f - S/delta} / int_C e^{-f})`` in 1-D.

    ``pi`` is ``e^{-f}`` restricted to ``C = [a, b]`` and ``S`` the squared
    distance to ``C``. The two tails are integrated over
    ``[a - H, a]`` and ``[b, b + H]``; by default ``H = 40 sqrt(delta)``,
    beyond which ``e^{-S/delta}`` is below ``e^{-1600}``.
    """
    a, b = map(float, interval)
    if not a < b:
        raise InvalidArgument("interval must have a < b")
    if not delta > 0:
        raise InvalidArgument("delta must be positive")
    H = 40.0 * math.sqrt(delta) if integration_halfwidth is None else float(integration_halfwidth)
    opts = dict(epsabs=tol, epsrel=tol, limit=500, full_output=1)

    def checked(fun, lo, hi):
        res = integrate.quad(fun, lo, hi, **opts)
        # a 4th element is quad's warning message; only fail if the error estimate is poor
        if len(res) > 3 and res[1] > 1e-10 * max(1.0, abs(res[0])):
            raise NumericalFailure(f"quadrature failed on [{lo}, {hi}]: {res[3]}")
        return res[0]

    inside = checked(lambda x: math.exp(-f(x)), a, b)
    left = checked(lambda x: math.exp(-f(x) - (a - x) ** 2 / delta), a - H, a)
    right = checked(lambda x: math.exp(-f(x) - (x - b) ** 2 / delta), b, b + H)
    if not inside > 0:
        raise NumericalFailure("e^{-f} integrates to zero on C")
    return math.log1p((left + right) / inside)


def kl_quadrature_radial(f_radial, radius, delta, d, integration_halfwidth=None, tol=1e-12):
    """Same identity for a ball ``{|x| <= R}`` in ``R^d`` and a radial ``f(|x|)``.

    The angular factor cancels, leaving one-dimensional integrals in ``r``
    weighted by ``r^(d-1)``.
    """
    if d < 1:
        raise InvalidArgument("d must be >= 1")
    R = float(radius)
    H = 40.0 * math.sqrt(delta) if integration_halfwidth is None else float(integration_halfwidth)
    opts = dict(epsabs=tol, epsrel=tol, limit=500)
    inside = integrate.quad(lambda r: math.exp(-f_radial(r)) * r ** (d - 1), 0, R, **opts)[0]
    tail = integrate.quad(lambda r: math.exp(-f_radial(r) - (r - R) ** 2 / delta) * r ** (d - 1),
                          R, R + H, **opts)[0]
    return math.log1p(tail / inside)


def laplace_kl_estimate(d, radius, delta, inner_integral):
    """Leading-order small-delta value of the ball tail ratio.

    ``omega_d sqrt(pi/(2 s''(R))) R^(d-1) sqrt(delta) / int_C e^{-f}`` with
    ``s'' = 2`` and ``omega_d = 2 pi^(d/2)/Gamma(d/2)`` the sphere area.
    """
    omega = 2 * math.pi ** (d / 2) / math.gamma(d / 2)
    return omega * math.sqrt(math.pi / 4) * radius ** (d - 1) * math.sqrt(delta) / inner_integral


def kl_first_bound(tail_integral, inner_integral):
    """``int_{R^d minus C} e^{-S/delta - f} / int_C e^{-f}``."""
    return tail_integral / inner_integral


def kl_second_bound(d, r, R, delta, alpha_tilde, inf_f, tail_integral, inner_integral):
    """Collar-volume bound on ``D(pi || pi_delta)`` for ``S = dist^2``.

    ``((1 + sqrt(a delta log(1/delta))/r)^d - 1) |B_R| e^{-inf f} / Z
    + delta^a * tail / Z`` with ``Z = int_C e^{-f}`` and ``|B_R|`` the volume
    of the radius-R ball.
    """
    if not 0 < delta < 1:
        raise InvalidArgument("delta must lie in (0, 1)")
    collar = math.sqrt(alpha_tilde * delta * math.log(1 / delta))
    ball = math.pi ** (d / 2) / math.gamma(d / 2 + 1) * R**d
    first = ((1 + collar / r) ** d - 1) * ball * math.exp(-inf_f) / inner_integral
    return first + delta**alpha_tilde * tail_integral / inner_integral


def wckp_bound(D, C_hat):
    """``W2 <= C_hat (sqrt(D) + (D/2)^(1/4))``."""
    if D < 0:
        raise InvalidArgument("KL divergence must be nonnegative")
    if not C_hat > 0:
        raise InvalidArgument("C_hat must be positive")
    return C_hat * (math.sqrt(D) + (D / 2) ** 0.25)


def wckp_constant(alpha_hat, log_moment):
    """``2 sqrt((3/2 + log E e^{alpha |x - x0|^2}) / alpha)`` for one choice of ``(alpha, x0)``."""
    if not alpha_hat > 0:
        raise InvalidArgument("alpha_hat must be positive")
    return 2 * math.sqrt((1.5 + log_moment) / alpha_hat)
