"""Regression datasets, CSV ingestion and reference samplers."""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DataParseError, InvalidArgument, SchemaError


@dataclass
class Dataset:
    features: np.ndarray  # (n, d)
    responses: np.ndarray  # (n,)
    provenance: str = ""

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.responses = np.asarray(self.responses, dtype=float).reshape(-1)
        if self.features.ndim != 2:
            raise InvalidArgument("features must be a 2-D array")
        if self.features.shape[0] != self.responses.shape[0]:
            raise InvalidArgument("one response per feature row is required")
        if not (np.all(np.isfinite(self.features)) and np.all(np.isfinite(self.responses))):
            raise InvalidArgument("dataset values must be finite")

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    def ols(self):
        """Least-squares solution from the normal equations."""
        A, y = self.features, self.responses
        return np.linalg.solve(A.T @ A, A.T @ y)


def gen_linear(n=10_000, x_star=(1.0, 1.0), noise_var=0.25, seed=0):
    """Rows ``a_j ~ N(0, I)``, ``y_j = x_star^T a_j + e_j`` with ``e_j ~ N(0, noise_var)``."""
    if n < 1:
        raise InvalidArgument("n must be >= 1")
    if noise_var < 0:
        raise InvalidArgument("noise_var must be nonnegative")
    x_star = np.asarray(x_star, dtype=float)
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, x_star.size))
    y = A @ x_star + math.sqrt(noise_var) * rng.standard_normal(n)
    return Dataset(A, y, provenance=f"gen_linear(n={n}, x_star={x_star.tolist()}, noise_var={noise_var}, seed={seed})")


def gen_regression_fixture(n=442, dim=2, seed=2024):
    """Small correlated regression problem standing in for a real tabular dataset.

    Features are correlated Gaussians; responses are on an arbitrary positive
    scale (mean 150, sd about 75) as for clinical outcome data.
    """
    rng = np.random.default_rng(seed)
    corr = 0.4
    cov = np.full((dim, dim), corr) + (1 - corr) * np.eye(dim)
    A = rng.multivariate_normal(np.zeros(dim), cov, size=n)
    coef = np.linspace(30.0, 15.0, dim)
    y = 150.0 + A @ coef + 55.0 * rng.standard_normal(n)
    return Dataset(A, y, provenance=f"gen_regression_fixture(n={n}, dim={dim}, seed={seed})")


def standardize(dataset, center_response=True, scaling="unit_variance"):
    """Centre feature columns and rescale them, optionally centring the response.

    ``scaling="unit_variance"`` divides by the column standard deviation;
    ``"unit_norm"`` gives every centred column unit Euclidean norm (the
    convention of common packaged copies of clinical regression datasets).
    """
    if scaling not in ("unit_variance", "unit_norm"):
        raise InvalidArgument("scaling must be 'unit_variance' or 'unit_norm'")
    A = dataset.features - dataset.features.mean(axis=0)
    scale = A.std(axis=0) if scaling == "unit_variance" else np.linalg.norm(A, axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    y = dataset.responses - dataset.responses.mean() if center_response else dataset.responses.copy()
    note = f"standardized features ({scaling})" + (", centred response" if center_response else "")
    prov = f"{dataset.provenance}; {note}" if dataset.provenance else note
    return Dataset(A / scale, y, provenance=prov)


def save_csv(dataset, path):
    """Header ``a_0,...,a_{d-1},y``; values written with 17 significant digits."""
    d = dataset.dim
    with open(path, "w", newline="") as fh:
        fh.write(",".join([f"a_{i}" for i in range(d)] + ["y"]) + "\n")
        for row, y in zip(dataset.features, dataset.responses):
            fh.write(",".join(format(v, ".17g") for v in (*row, y)) + "\n")


def load_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError("file is empty; expected a header row", path=str(path))
        header = [h.strip() for h in header]
        d = len(header) - 1
        expected = [f"a_{i}" for i in range(d)] + ["y"]
        if d < 1 or header != expected:
            raise SchemaError(f"header must be {','.join(expected) if d >= 1 else 'a_0,...,y'}",
                              path=str(path))
        rows = []
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != d + 1:
                raise SchemaError(f"line {line_no}: expected {d + 1} fields, got {len(row)}",
                                  path=str(path))
            try:
                rows.append([float(cell) for cell in row])
            except ValueError as exc:
                raise DataParseError(f"non-numeric token ({exc})", line=line_no) from None
    values = np.array(rows, dtype=float).reshape(-1, d + 1)
    return Dataset(values[:, :d], values[:, d], provenance=f"csv:{path}")


def dirichlet_oracle(alpha, n, seed=0):
    """I.i.d. Dirichlet(alpha) draws via normalized gamma variates, shape ``(n, K)``."""
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0):
        raise InvalidArgument("alpha entries must be positive")
    rng = np.random.default_rng(seed)
    g = rng.standard_gamma(alpha, size=(n, alpha.size))
    return g / g.sum(axis=1, keepdims=True)


def uniform_simplex(dim, n, rng):
    """Uniform points in ``{x >= 0, sum x <= 1}`` of ``R^dim``."""
    return rng.dirichlet(np.ones(dim + 1), size=n)[:, :dim]


def uniform_l1_ball(dim, radius, n, rng):
    """Uniform points in the l1 ball of the given radius."""
    mags = uniform_simplex(dim, n, rng)
    signs = rng.choice((-1.0, 1.0), size=(n, dim))
    return radius * mags * signs
