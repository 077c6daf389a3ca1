"""Convex bodies, Euclidean projections and penalty functions.

Every routine here accepts a single point of shape ``(d,)`` or a stack of
points of shape ``(..., d)`` and works row-wise, so an ensemble of chains can
be pushed through one call.
"""

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConvergenceFailure, InvalidArgument, UnsupportedPenalty

MEMBERSHIP_TOL = 1e-12
DYKSTRA_MAX_ITER = 10_000
DYKSTRA_TOL = 1e-10
LP_BISECTION_TOL = 1e-12


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or x.shape[-1] != dim:
        raise InvalidArgument(f"expected points with last axis {dim}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidArgument("points must be finite")
    return x


def _project_simplex_sum(v, total=1.0):
    """Rows of ``v`` onto ``{w >= 0, sum(w) = total}`` (sort-based)."""
    shape = v.shape
    v = v.reshape(-1, shape[-1])
    n = shape[-1]
    u = -np.sort(-v, axis=-1)
    css = np.cumsum(u, axis=-1) - total
    cond = u * np.arange(1, n + 1) > css
    # cond is a prefix of trues, so its count is the support size
    rho = np.count_nonzero(cond, axis=-1) - 1
    theta = css[np.arange(v.shape[0]), rho] / (rho + 1)
    return np.maximum(v - theta[:, None], 0.0).reshape(shape)


class ConvexBody:
    """Compact convex set with an interior witness point."""

    dim: int

    def project(self, x):
        """Euclidean projection of points ``(..., d)`` onto the body."""
        return self._project(_as_points(x, self.dim))

    def _project(self, x):
        # x already validated
        raise NotImplementedError

    def contains(self, x, tol=MEMBERSHIP_TOL):
        return self.distance(x) <= tol

    def distance(self, x):
        x = _as_points(x, self.dim)
        return np.linalg.norm(x - self._project(x), axis=-1)

    @property
    def interior_point(self):
        raise NotImplementedError

    def enclosing_radius(self):
        """Radius of the smallest origin-centred ball we can certify contains the body."""
        raise NotImplementedError

    def constraints(self):
        """Convex differentiable functions ``h_i`` with ``C = {h_i <= 0 for all i}``."""
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError


class L2Ball(ConvexBody):
    def __init__(self, radius, dim):
        if not radius > 0:
            raise InvalidArgument("radius must be positive")
        if dim < 1:
            raise InvalidArgument("dimension must be >= 1")
        self.radius = float(radius)
        self.dim = int(dim)

    def _project(self, x):
        norm = np.linalg.norm(x, axis=-1, keepdims=True)
        scale = np.where(norm > self.radius, self.radius / np.maximum(norm, 1e-300), 1.0)
        return x * scale

    @property
    def interior_point(self):
        return np.zeros(self.dim)

    def enclosing_radius(self):
        return self.radius

    def constraints(self):
        return [lp_norm_constraint(2, self.radius, self.dim)]

    def to_dict(self):
        return {"type": "l2_ball", "radius": self.radius, "dim": self.dim}

    def __repr__(self):
        return f"L2Ball(radius={self.radius}, dim={self.dim})"


class LinfBall(ConvexBody):
    def __init__(self, radius, dim):
        if not radius > 0:
            raise InvalidArgument("radius must be positive")
        if dim < 1:
            raise InvalidArgument("dimension must be >= 1")
        self.radius = float(radius)
        self.dim = int(dim)

    def _project(self, x):
        return np.clip(x, -self.radius, self.radius)

    @property
    def interior_point(self):
        return np.zeros(self.dim)

    def enclosing_radius(self):
        return self.radius * math.sqrt(self.dim)

    def constraints(self):
        eye = np.eye(self.dim)
        return [affine_constraint(s * eye[i], self.radius) for i in range(self.dim) for s in (1.0, -1.0)]

    def to_dict(self):
        return {"type": "linf_ball", "radius": self.radius, "dim": self.dim}

    def __repr__(self):
        return f"LinfBall(radius={self.radius}, dim={self.dim})"


def _project_l1(x, radius):
    flat = x.reshape(-1, x.shape[-1])
    out = flat.copy()
    outside = np.abs(flat).sum(axis=-1) > radius
    if np.any(outside):
        v = flat[outside]
        out[outside] = np.sign(v) * _project_simplex_sum(np.abs(v), radius)
    return out.reshape(x.shape)


def _project_lp(x, p, radius, tol=LP_BISECTION_TOL):
    """Projection onto the l_p ball for 1 < p < inf via bisection on the multiplier.

    For a multiplier ``lam`` each magnitude solves ``z + lam*p*z**(p-1) = |x_i|``
    (monotone in z); the multiplier is then tuned so that ``sum z**p = R**p``.
    """
    a = np.abs(x)
    norm = np.sum(a**p, axis=-1) ** (1.0 / p)
    outside = norm > radius
    out = x.copy()
    if not np.any(outside):
        return out
    a_out = a[outside]
    target = radius**p

    def magnitudes(lam):
        # Newton from above on a convex increasing equation converges monotonically:
        # for p >= 2 solve z + c z^(p-1) = |x_i| in z, otherwise u^q + c u = |x_i|
        # in u = z^(p-1), q = 1/(p-1)
        c = (lam * p)[:, None]
        if p >= 2:
            z = a_out.copy()
            for _ in range(100):
                g = z + c * z ** (p - 1) - a_out
                new = np.maximum(z - g / (1.0 + c * (p - 1) * z ** (p - 2)), 0.0)
                done = np.all(np.abs(new - z) <= tol * np.maximum(a_out, 1e-300))
                z = new
                if done:
                    break
            return z
        q = 1.0 / (p - 1)
        u = a_out ** (p - 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            for _ in range(100):
                g = u**q + c * u - a_out
                new = np.maximum(u - g / (q * u ** (q - 1) + c), 0.0)
                new = np.where(np.isfinite(new), new, 0.0)
                done = np.all(np.abs(new - u) <= tol * np.maximum(u, 1e-300))
                u = new
                if done:
                    break
        return u**q

    lam_lo = np.zeros(a_out.shape[0])
    lam_hi = np.ones(a_out.shape[0])
    for _ in range(2000):
        excess = np.sum(magnitudes(lam_hi) ** p, axis=-1) > target
        if not np.any(excess):
            break
        lam_hi = np.where(excess, lam_hi * 2.0, lam_hi)
    for _ in range(400):
        lam_mid = 0.5 * (lam_lo + lam_hi)
        excess = np.sum(magnitudes(lam_mid) ** p, axis=-1) > target
        lam_lo = np.where(excess, lam_mid, lam_lo)
        lam_hi = np.where(excess, lam_hi, lam_mid)
        if np.all(lam_hi - lam_lo <= tol * np.maximum(lam_hi, 1e-300)):
            break
    z = magnitudes(lam_hi)
    out[outside] = np.sign(x[outside]) * z
    return out


class LpBall(ConvexBody):
    def __init__(self, p, radius, dim):
        p = float(p)
        if not p >= 1:
            raise InvalidArgument("order p must be >= 1")
        if not radius > 0:
            raise InvalidArgument("radius must be positive")
        if dim < 1:
            raise InvalidArgument("dimension must be >= 1")
        self.p = p
        self.radius = float(radius)
        self.dim = int(dim)

    def _project(self, x):
        if self.p == 1:
            return _project_l1(x, self.radius)
        if self.p == 2:
            return L2Ball(self.radius, self.dim)._project(x)
        if math.isinf(self.p):
            return np.clip(x, -self.radius, self.radius)
        flat = x.reshape(-1, self.dim)
        return _project_lp(flat, self.p, self.radius).reshape(x.shape)

    @property
    def interior_point(self):
        return np.zeros(self.dim)

    def enclosing_radius(self):
        if self.p <= 2:
            return self.radius
        if math.isinf(self.p):
            return self.radius * math.sqrt(self.dim)
        return self.radius * self.dim ** (0.5 - 1.0 / self.p)

    def constraints(self):
        if self.p == 1:
            # the l1 norm is not differentiable; use its 2^d facets instead
            return [affine_constraint(np.array(s), self.radius)
                    for s in itertools.product((1.0, -1.0), repeat=self.dim)]
        if math.isinf(self.p):
            return LinfBall(self.radius, self.dim).constraints()
        return [lp_norm_constraint(self.p, self.radius, self.dim)]

    def to_dict(self):
        p = "inf" if math.isinf(self.p) else self.p
        return {"type": "lp_ball", "p": p, "radius": self.radius, "dim": self.dim}

    def __repr__(self):
        return f"LpBall(p={self.p}, radius={self.radius}, dim={self.dim})"


class Simplex(ConvexBody):
    """``{x in R^d : x_i >= 0, sum(x) <= 1}``."""

    def __init__(self, dim):
        if dim < 1:
            raise InvalidArgument("dimension must be >= 1")
        self.dim = int(dim)

    def _project(self, x):
        flat = x.reshape(-1, self.dim)
        out = np.maximum(flat, 0.0)
        outside = out.sum(axis=-1) > 1.0
        if np.any(outside):
            out[outside] = _project_simplex_sum(flat[outside], 1.0)
        return out.reshape(x.shape)

    @property
    def interior_point(self):
        return np.full(self.dim, 1.0 / (self.dim + 1))

    def enclosing_radius(self):
        return 1.0

    def constraints(self):
        eye = np.eye(self.dim)
        rows = [affine_constraint(-eye[i], 0.0) for i in range(self.dim)]
        rows.append(affine_constraint(np.ones(self.dim), 1.0))
        return rows

    def to_dict(self):
        return {"type": "simplex", "dim": self.dim}

    def __repr__(self):
        return f"Simplex(dim={self.dim})"


class Polytope(ConvexBody):
    """Bounded intersection of halfspaces ``a_i^T x <= b_i``.

    Projection runs Dykstra's alternating projections over the halfspaces.
    """

    def __init__(self, normals, offsets, interior_point):
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        offsets = np.asarray(offsets, dtype=float).reshape(-1)
        witness = np.asarray(interior_point, dtype=float).reshape(-1)
        if normals.shape[0] != offsets.shape[0]:
            raise InvalidArgument("need one offset per normal")
        if witness.shape[0] != normals.shape[1]:
            raise InvalidArgument("interior point has the wrong dimension")
        if not (np.all(np.isfinite(normals)) and np.all(np.isfinite(offsets))):
            raise InvalidArgument("polytope data must be finite")
        norms = np.linalg.norm(normals, axis=1)
        if np.any(norms == 0):
            raise InvalidArgument("polytope normals must be nonzero")
        if not np.all(normals @ witness < offsets):
            raise InvalidArgument("interior point must satisfy every constraint strictly")
        self.normals = normals
        self.offsets = offsets
        self.dim = normals.shape[1]
        self._witness = witness
        self._sq_norms = norms**2
        self._radius = None
        self._check_bounded()

    def _check_bounded(self):
        from scipy.optimize import linprog

        for i in range(self.dim):
            for sign in (1.0, -1.0):
                c = np.zeros(self.dim)
                c[i] = -sign
                res = linprog(c, A_ub=self.normals, b_ub=self.offsets, bounds=[(None, None)] * self.dim)
                if res.status == 3:
                    raise InvalidArgument("polytope is unbounded")

    def project(self, x, max_iter=DYKSTRA_MAX_ITER, tol=DYKSTRA_TOL):
        return self._project(_as_points(x, self.dim), max_iter, tol)

    def _project(self, x, max_iter=DYKSTRA_MAX_ITER, tol=DYKSTRA_TOL):
        flat = x.reshape(-1, self.dim)
        viol = flat @ self.normals.T - self.offsets
        out = flat.copy()
        todo = np.any(viol > 0, axis=1)
        if np.any(todo):
            out[todo] = self._dykstra(flat[todo], max_iter, tol)
        return out.reshape(x.shape)

    def _dykstra(self, v, max_iter, tol):
        m = self.normals.shape[0]
        x = v.copy()
        increments = np.zeros((m,) + v.shape)
        scale = np.maximum(1.0, np.abs(v).max())
        residual = np.inf
        for _ in range(max_iter):
            start = x.copy()
            for i in range(m):
                a = self.normals[i]
                y = x + increments[i]
                excess = np.maximum(y @ a - self.offsets[i], 0.0)
                x = y - (excess / self._sq_norms[i])[:, None] * a
                increments[i] = y - x
            # a small step alone can be a plateau while an old increment unwinds,
            # so also require feasibility and complementary slackness
            slack = x @ self.normals.T - self.offsets
            weight = np.linalg.norm(increments, axis=-1).T
            residual = max(np.abs(x - start).max(), slack.max(), np.abs(weight * slack).max())
            if residual <= tol * scale:
                return x
        raise ConvergenceFailure(
            f"Dykstra projection did not converge in {max_iter} cycles (residual {residual:.3e})",
            residual=residual,
        )

    @property
    def interior_point(self):
        return self._witness.copy()

    def vertices(self):
        """Enumerate vertices by solving every d-subset of active constraints."""
        verts = []
        for rows in itertools.combinations(range(self.normals.shape[0]), self.dim):
            A = self.normals[list(rows)]
            if abs(np.linalg.det(A)) < 1e-12:
                continue
            v = np.linalg.solve(A, self.offsets[list(rows)])
            if np.all(self.normals @ v <= self.offsets + 1e-9):
                verts.append(v)
        return np.array(verts)

    def enclosing_radius(self):
        if self._radius is None:
            self._radius = float(np.linalg.norm(self.vertices(), axis=1).max())
        return self._radius

    def constraints(self):
        return [affine_constraint(a, b) for a, b in zip(self.normals, self.offsets)]

    def to_dict(self):
        return {
            "type": "polytope",
            "normals": self.normals.tolist(),
            "offsets": self.offsets.tolist(),
            "interior_point": self._witness.tolist(),
        }

    def __repr__(self):
        return f"Polytope(m={self.normals.shape[0]}, dim={self.dim})"


def project(body, x):
    """Euclidean projection of ``x`` onto ``body``."""
    return body.project(x)


def body_from_dict(spec):
    """Build a body from its JSON description (see ``ConvexBody.to_dict``)."""
    kind = spec["type"]
    if kind == "l2_ball":
        return L2Ball(spec["radius"], spec["dim"])
    if kind == "linf_ball":
        return LinfBall(spec["radius"], spec["dim"])
    if kind == "lp_ball":
        p = math.inf if spec["p"] in ("inf", math.inf) else spec["p"]
        return LpBall(p, spec["radius"], spec["dim"])
    if kind == "l1_ball":
        return LpBall(1, spec["radius"], spec["dim"])
    if kind == "simplex":
        return Simplex(spec["dim"])
    if kind == "polytope":
        return Polytope(spec["normals"], spec["offsets"], spec["interior_point"])
    raise InvalidArgument(f"unknown body type {kind!r}")


# -- constraint functions ------------------------------------------------------


@dataclass
class ConstraintFn:
    """Convex differentiable ``h`` with value and gradient callbacks over ``(..., d)``."""

    value: Callable
    grad: Callable
    name: str = "h"
    meta: dict = field(default_factory=dict)


def affine_constraint(normal, offset):
    normal = np.asarray(normal, dtype=float)
    offset = float(offset)
    return ConstraintFn(
        value=lambda x: np.asarray(x) @ normal - offset,
        grad=lambda x: np.broadcast_to(normal, np.shape(x)).copy(),
        name="affine",
        meta={"kind": "affine", "normal": normal, "offset": offset},
    )


def lp_norm_constraint(p, radius, dim):
    """``h(x) = ||x||_p - R``; differentiable away from the origin for p > 1."""
    p = float(p)
    if not 1 < p < math.inf:
        raise InvalidArgument("lp_norm_constraint needs 1 < p < inf")

    def value(x):
        x = np.asarray(x, dtype=float)
        return np.sum(np.abs(x) ** p, axis=-1) ** (1.0 / p) - radius

    def grad(x):
        x = np.asarray(x, dtype=float)
        norm = np.sum(np.abs(x) ** p, axis=-1, keepdims=True) ** (1.0 / p)
        safe = np.where(norm > 0, norm, 1.0)
        g = np.sign(x) * (np.abs(x) / safe) ** (p - 1)
        return np.where(norm > 0, g, 0.0)

    return ConstraintFn(value, grad, name=f"l{p:g}-norm",
                        meta={"kind": "lp_norm", "p": p, "radius": float(radius), "dim": int(dim)})


# -- penalties -------------------------------------------------------------------


class Penalty:
    """Nonnegative ``S`` vanishing exactly on the constraint set."""

    dim: int

    def value(self, x):
        return self.evaluate(x)[0]

    def grad(self, x):
        return self.evaluate(x)[1]

    def evaluate(self, x):
        raise NotImplementedError


class DistanceSquared(Penalty):
    """``S(x) = dist(x, C)^2`` with gradient ``2 (x - P_C(x))``."""

    def __init__(self, body):
        self.body = body
        self.dim = body.dim

    def evaluate(self, x):
        x = _as_points(x, self.dim)
        diff = x - self.body._project(x)
        dist = np.linalg.norm(diff, axis=-1)
        on_set = dist <= MEMBERSHIP_TOL
        value = np.where(on_set, 0.0, dist**2)
        grad = np.where(on_set[..., None], 0.0, 2.0 * diff)
        return value, grad

    def grad(self, x):
        x = _as_points(x, self.dim)
        diff = x - self.body._project(x)
        sq = np.einsum("...i,...i->...", diff, diff)
        return np.where((sq <= MEMBERSHIP_TOL**2)[..., None], 0.0, 2.0 * diff)

    def __repr__(self):
        return f"DistanceSquared({self.body!r})"


class Functional(Penalty):
    """``S(x) = sum_i max(0, h_i(x))^2`` -- no projection needed.

    Smoothness of ``S`` relies on each ``h_i`` being smooth on ``{h_i >= 0}``;
    supplied constraints are trusted, not checked.
    """

    def __init__(self, constraints, dim=None):
        self.constraints = list(constraints)
        if not self.constraints:
            raise InvalidArgument("need at least one constraint")
        self.dim = dim

    def _h(self, c, x):
        return c.value(x), c.grad(x)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            raise InvalidArgument("points must be finite")
        value = np.zeros(x.shape[:-1])
        grad = np.zeros_like(x)
        for c in self.constraints:
            h, dh = self._h(c, x)
            pos = np.maximum(h, 0.0)
            value = value + pos**2
            grad = grad + 2.0 * pos[..., None] * dh
        return value, grad

    def __repr__(self):
        return f"Functional({len(self.constraints)} constraints)"


class RegularizedFunctional(Functional):
    """Functional penalty on ``C^alpha = {h_i(x) + alpha/2 |x|^2 <= 0}``."""

    def __init__(self, constraints, alpha, dim=None):
        if not alpha >= 0:
            raise InvalidArgument("alpha must be nonnegative")
        super().__init__(constraints, dim)
        self.alpha = float(alpha)

    def _h(self, c, x):
        h = c.value(x) + 0.5 * self.alpha * np.sum(x * x, axis=-1)
        dh = c.grad(x) + self.alpha * x
        return h, dh

    def __repr__(self):
        return f"RegularizedFunctional({len(self.constraints)} constraints, alpha={self.alpha})"


def penalty_eval(penalty, x):
    """Return ``(S(x), grad S(x))``."""
    return penalty.evaluate(x)


def regularize(constraints, alpha):
    if not alpha >= 0:
        raise InvalidArgument("alpha must be nonnegative")
    return RegularizedFunctional(constraints, alpha)


# -- constants -----------------------------------------------------------------


@dataclass
class ConstantsReport:
    ell: float
    m_S: float | None
    b_S: float | None
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {"ell": self.ell, "m_S": self.m_S, "b_S": self.b_S, "notes": list(self.notes)}


def penalty_constants(penalty):
    """Smoothness and dissipativity constants of a supported penalty.

    ``<x, grad S(x)> >= m_S |x|^2 - b_S`` and ``grad S`` is ``ell``-Lipschitz.
    For the distance-squared penalty ``2<x, x - P(x)> >= 2|x|^2 - 2R|x|
    >= |x|^2 - R^2``, so ``b_S = R^2``; the smaller value ``R^2/4`` that is
    sometimes quoted fails at boundary points with ``|x| > R/2``.
    """
    if isinstance(penalty, DistanceSquared):
        R = penalty.body.enclosing_radius()
        return ConstantsReport(
            ell=4.0,
            m_S=1.0,
            b_S=R**2,
            notes=[
                "ell = 4 from |grad S(x) - grad S(y)| <= 2|x-y| + 2|P(x)-P(y)|",
                f"m_S = 1, b_S = R^2 with enclosing radius R = {R:.17g}",
                "b_S = R^2/4 is not valid: boundary points with |x| > R/2 violate it",
            ],
        )
    if type(penalty) is Functional and len(penalty.constraints) == 1:
        meta = penalty.constraints[0].meta
        if meta.get("kind") == "lp_norm" and meta["p"] >= 2:
            p, R, d = meta["p"], meta["radius"], meta["dim"]
            return ConstantsReport(
                ell=(2.0 / R + (d - 1)) * (p - 1),
                m_S=d ** (2.0 / p - 1.0),
                b_S=R**2,
                notes=[
                    "ell = (2/R + (d-1))(p-1) for max(0, |x|_p - R)^2",
                    "m_S = d^(2/p-1), b_S = R^2 from <x, grad S> = 2 t (t - R), t = |x|_p",
                ],
            )
        if meta.get("kind") == "lp_norm":
            raise UnsupportedPenalty("functional l_p constants need p >= 2")
    raise UnsupportedPenalty(f"no closed-form constants for {penalty!r}")
