"""Empirical distances and constraint / fit statistics for sample sets."""

import numpy as np

from .errors import InvalidArgument
from .geometry import MEMBERSHIP_TOL


def _as_1d(a, name):
    a = np.asarray(a, dtype=float).reshape(-1)
    if a.size == 0:
        raise InvalidArgument(f"{name} is empty")
    return a


def _quantiles(sorted_values, n):
    """``n`` evenly spaced empirical quantiles (midpoint rule) of a sorted sample."""
    m = sorted_values.size
    if m == n:
        return sorted_values
    levels = (np.arange(n) + 0.5) / n
    grid = (np.arange(m) + 0.5) / m
    return np.interp(levels, grid, sorted_values)


def w2_1d(a, b, allow_unequal=False):
    """Exact empirical 2-Wasserstein distance between two 1-D samples.

    For equal sizes this is the sorted (monotone) coupling. With
    ``allow_unequal`` both samples are resampled at ``max(n_a, n_b)`` evenly
    spaced quantiles first.
    """
    a = np.sort(_as_1d(a, "a"))
    b = np.sort(_as_1d(b, "b"))
    if a.size != b.size:
        if not allow_unequal:
            raise InvalidArgument(f"sample sizes differ ({a.size} vs {b.size})")
        n = max(a.size, b.size)
        a, b = _quantiles(a, n), _quantiles(b, n)
    gap = np.abs(a - b)
    scale = gap.max()
    if scale == 0:
        return 0.0
    # scaled so tiny or huge gaps do not under- or overflow when squared
    return float(scale * np.sqrt(np.mean((gap / scale) ** 2)))


def random_directions(d, n_projections, seed):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((n_projections, d))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def sliced_w2(a, b, n_projections=50, seed=0, directions=None):
    """Average of ``w2_1d`` over random unit directions (deterministic given ``seed``)."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape != b.shape:
        raise InvalidArgument(f"batch shapes differ ({a.shape} vs {b.shape})")
    if directions is None:
        directions = random_directions(a.shape[1], n_projections, seed)
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    pa = np.sort(a @ directions.T, axis=0)
    pb = np.sort(b @ directions.T, axis=0)
    per_direction = np.sqrt(np.mean((pa - pb) ** 2, axis=0))
    return float(per_direction.mean())


def violation_stats(body, samples):
    """``(fraction outside, mean distance, max distance)`` of samples w.r.t. ``body``."""
    x = np.atleast_2d(np.asarray(samples, dtype=float))
    if x.shape[-1] != body.dim:
        raise InvalidArgument("sample dimension does not match the body")
    dist = body.distance(x.reshape(-1, body.dim))
    dist = np.where(dist > MEMBERSHIP_TOL, dist, 0.0)
    return float(np.mean(dist > 0)), float(dist.mean()), float(dist.max())


def mse_series(iterates, features, responses):
    """Mean squared residual ``1/n sum_j (y_j - x^T a_j)^2`` for each iterate row."""
    A = np.asarray(features, dtype=float)
    y = np.asarray(responses, dtype=float).reshape(-1)
    if A.ndim != 2 or A.shape[0] == 0:
        raise InvalidArgument("need a nonempty (n, d) feature matrix")
    X = np.atleast_2d(np.asarray(iterates, dtype=float))
    if X.shape[-1] != A.shape[1]:
        raise InvalidArgument("iterate dimension does not match the data")
    resid = y - X @ A.T
    return np.mean(resid**2, axis=-1)


def freedman_diaconis_bins(x, max_bins=1000):
    x = np.asarray(x, dtype=float)
    q75, q25 = np.percentile(x, [75, 25])
    width = 2 * (q75 - q25) / np.cbrt(x.size)
    span = x.max() - x.min()
    if width <= 0 or span <= 0:
        return 1
    return int(min(max_bins, max(1, np.ceil(span / width))))


def tv_histogram(a, b, n_bins=None, value_range=None):
    """Histogram estimate ``1/2 sum |p_bin - q_bin|`` of total variation.

    Defaults: range spanning both samples, Freedman-Diaconis bin count on the
    pooled sample.
    """
    a = _as_1d(a, "a")
    b = _as_1d(b, "b")
    pooled = np.concatenate([a, b])
    if value_range is None:
        value_range = (pooled.min(), pooled.max())
        if value_range[0] == value_range[1]:
            value_range = (value_range[0] - 0.5, value_range[1] + 0.5)
    if n_bins is None:
        n_bins = freedman_diaconis_bins(pooled)
    if n_bins < 1:
        raise InvalidArgument("n_bins must be >= 1")
    p, _ = np.histogram(a, bins=n_bins, range=value_range)
    q, _ = np.histogram(b, bins=n_bins, range=value_range)
    return float(0.5 * np.abs(p / a.size - q / b.size).sum())


def smoothed(series, window):
    """Trailing moving average (valid part only)."""
    series = np.asarray(series, dtype=float)
    if window <= 1:
        return series.copy()
    kernel = np.ones(window) / window
    return np.convolve(series, kernel, mode="valid")


def projected_gradient_map(grad, body, x0, step, max_iter=100_000, tol=1e-12):
    """Minimizer of a smooth convex potential over ``body`` by projected gradient descent.

    ``step`` should be at most ``1/L``. Stops when an iteration moves less
    than ``tol * max(1, |x|)``.
    """
    x = body.project(np.asarray(x0, dtype=float))
    for _ in range(max_iter):
        nxt = body.project(x - step * grad(x))
        if np.linalg.norm(nxt - x) <= tol * max(1.0, np.linalg.norm(x)):
            return nxt
        x = nxt
    return x
