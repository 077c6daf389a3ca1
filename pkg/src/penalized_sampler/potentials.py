"""Target potentials ``f`` and their (possibly stochastic) gradient oracles."""

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidArgument

DIRICHLET_FLOOR = 1e-3


@dataclass
class Potential:
    """Smooth potential with callbacks over ``(..., d)`` arrays.

    ``L`` is the declared gradient-Lipschitz constant and ``mu`` an optional
    strong-convexity constant; neither is verified here.
    """

    dim: int
    value: Callable
    grad: Callable
    L: Optional[float] = None
    mu: Optional[float] = None
    name: str = "potential"

    def __post_init__(self):
        if self.mu is not None and self.L is not None and self.mu > self.L:
            raise InvalidArgument("mu must not exceed L")


def zero_potential(dim):
    return Potential(
        dim=dim,
        value=lambda x: np.zeros(np.shape(x)[:-1]),
        grad=lambda x: np.zeros(np.shape(x)),
        L=0.0,
        name="zero",
    )


def gaussian_potential(dim, mean=0.0, precision=1.0):
    """``f(x) = precision/2 |x - mean|^2``."""
    mean = np.broadcast_to(np.asarray(mean, dtype=float), (dim,)).copy()
    precision = float(precision)
    return Potential(
        dim=dim,
        value=lambda x: 0.5 * precision * np.sum((np.asarray(x) - mean) ** 2, axis=-1),
        grad=lambda x: precision * (np.asarray(x) - mean),
        L=precision,
        mu=precision,
        name="gaussian",
    )


def make_dirichlet_potential(alpha, floor=DIRICHLET_FLOOR):
    """Negative log-density of Dirichlet(alpha) over the first K-1 coordinates.

    Outside the open simplex the coordinates (and the implied last coordinate
    ``1 - sum x``) are floored at ``floor`` before the logarithms and
    reciprocals are taken, which keeps the gradient finite everywhere.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim != 1 or alpha.size < 2:
        raise InvalidArgument("alpha needs at least two entries")
    if np.any(alpha <= 0) or not np.all(np.isfinite(alpha)):
        raise InvalidArgument("alpha entries must be positive")
    if np.any(alpha < 1):
        warnings.warn("Dirichlet with alpha_i < 1 is unbounded below near the boundary; "
                      "not covered by the smoothness theory", stacklevel=2)
    head = alpha[:-1] - 1.0
    tail = alpha[-1] - 1.0

    def _coords(x):
        x = np.asarray(x, dtype=float)
        return np.maximum(x, floor), np.maximum(1.0 - x.sum(axis=-1), floor)

    def value(x):
        xs, last = _coords(x)
        return -(np.log(xs) @ head) - tail * np.log(last)

    def grad(x):
        xs, last = _coords(x)
        return -head / xs + (tail / last)[..., None]

    return Potential(dim=alpha.size - 1, value=value, grad=grad, L=None, name="dirichlet")


def power_iteration(matrix, n_iter=200, tol=1e-10, seed=0):
    """Largest eigenvalue of a symmetric PSD matrix."""
    matrix = np.asarray(matrix, dtype=float)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(matrix.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(n_iter):
        w = matrix @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v = w / norm
        new = float(v @ matrix @ v)
        if abs(new - lam) <= tol * max(abs(new), 1.0):
            return new
        lam = new
    return lam


class FiniteSumPotential(Potential):
    """``f(x) = sum_j f_j(x)``.

    ``component_value(x, idx)`` and ``component_grad(x, idx)`` return sums of
    the selected components; ``idx`` has shape ``(b,)`` for a single point or
    ``(..., b)`` aligned with the leading axes of ``x``.
    """

    def __init__(self, dim, n, component_value, component_grad, L=None, mu=None, name="finite-sum"):
        if n < 1:
            raise InvalidArgument("need at least one component")
        self.n = int(n)
        self.component_value = component_value
        self.component_grad = component_grad
        everything = np.arange(self.n)
        super().__init__(
            dim=dim,
            value=lambda x: component_value(x, everything),
            grad=lambda x: component_grad(x, everything),
            L=L,
            mu=mu,
            name=name,
        )


class LeastSquaresPotential(FiniteSumPotential):
    """``f_j(x) = 1/2 (y_j - a_j^T x)^2``."""

    def __init__(self, features, responses):
        A = np.asarray(features, dtype=float)
        y = np.asarray(responses, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[0] != y.shape[0] or A.shape[0] < 1:
            raise InvalidArgument("features must be (n, d) with one response per row")
        self.features = A
        self.responses = y
        gram = A.T @ A
        super().__init__(
            dim=A.shape[1],
            n=A.shape[0],
            component_value=self._value,
            component_grad=self._grad,
            L=power_iteration(gram),
            name="least-squares",
        )
        self.value = self._full_value
        self.grad = self._full_grad

    def _residual(self, x, idx):
        x = np.asarray(x, dtype=float)
        idx = np.asarray(idx)
        if idx.ndim == 1:
            Ab = self.features[idx]
            return self.responses[idx] - x @ Ab.T, Ab
        Ab = self.features[idx]
        return self.responses[idx] - np.einsum("...bd,...d->...b", Ab, x), Ab

    def _value(self, x, idx):
        r, _ = self._residual(x, idx)
        return 0.5 * np.sum(r * r, axis=-1)

    def _grad(self, x, idx):
        r, Ab = self._residual(x, idx)
        if np.ndim(idx) == 1:
            return -(r @ Ab)
        return -np.einsum("...b,...bd->...d", r, Ab)

    def _full_value(self, x):
        r = self.responses - np.asarray(x, dtype=float) @ self.features.T
        return 0.5 * np.sum(r * r, axis=-1)

    def _full_grad(self, x):
        r = self.responses - np.asarray(x, dtype=float) @ self.features.T
        return -(r @ self.features)

    def ols(self):
        return np.linalg.lstsq(self.features, self.responses, rcond=None)[0]


def make_least_squares(features, responses=None):
    """Least-squares potential from ``(A, y)`` or from a ``Dataset``."""
    if responses is None:
        return LeastSquaresPotential(features.features, features.responses)
    return LeastSquaresPotential(features, responses)


class GradientOracle:
    """Exact or mini-batch gradient of a potential.

    In mini-batch mode each call draws, per chain, ``b`` distinct component
    indices uniformly at random and returns ``n/b`` times their gradient sum,
    which is unbiased for the full-sum gradient. One oracle per chain
    ensemble: the random stream is private and not thread-safe.
    """

    def __init__(self, potential, batch_size=None, rng=None):
        self.potential = potential
        self.batch_size = batch_size
        if batch_size is not None:
            if not isinstance(potential, FiniteSumPotential):
                raise InvalidArgument("mini-batch gradients need a finite-sum potential")
            if not 1 <= batch_size <= potential.n:
                raise InvalidArgument(f"batch size must lie in [1, {potential.n}]")
            if rng is None:
                raise InvalidArgument("mini-batch mode needs a random generator")
        self.rng = rng

    @property
    def stochastic(self):
        return self.batch_size is not None and self.batch_size < self.potential.n

    def draw_indices(self, lead_shape=()):
        """Uniform ``b``-subsets without replacement, one per leading index."""
        n, b = self.potential.n, self.batch_size
        rows = int(np.prod(lead_shape, dtype=int))
        if rows == 1:
            idx = self.rng.choice(n, size=(1, b), replace=False)
        elif b * b > n:
            keys = self.rng.random((rows, n))
            idx = np.argpartition(keys, b - 1, axis=1)[:, :b]
        else:
            # rejection: ordered tuples conditioned on distinctness are uniform subsets
            idx = self.rng.integers(0, n, size=(rows, b))
            while True:
                s = np.sort(idx, axis=1)
                bad = np.any(s[:, 1:] == s[:, :-1], axis=1)
                if not np.any(bad):
                    break
                idx[bad] = self.rng.integers(0, n, size=(int(bad.sum()), b))
        return idx.reshape(tuple(lead_shape) + (b,))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if not self.stochastic:
            return self.potential.grad(x)
        idx = self.draw_indices(x.shape[:-1])
        scale = self.potential.n / self.batch_size
        return scale * self.potential.component_grad(x, idx)


def gradient(oracle, x):
    return oracle(x)


def noise_bound(sigma2, L, x, grad_f0):
    """Right-hand side ``2 sigma^2 (L^2 |x|^2 + |grad f(0)|^2)`` of the noise model."""
    x = np.asarray(x, dtype=float)
    return 2.0 * sigma2 * (L**2 * np.sum(x * x, axis=-1) + float(np.sum(np.square(grad_f0))))


def dirichlet_mean(alpha):
    alpha = np.asarray(alpha, dtype=float)
    return alpha / alpha.sum()


def log_beta(alpha):
    alpha = np.asarray(alpha, dtype=float)
    return float(sum(math.lgamma(a) for a in alpha) - math.lgamma(alpha.sum()))
