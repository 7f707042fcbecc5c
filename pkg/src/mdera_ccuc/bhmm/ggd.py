"""Multivariate generalized Gaussian components bounded to a reduced simplex."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp
from scipy.stats import qmc

from ..special import gammaln

SHAPE_MIN, SHAPE_MAX = 0.05, 20.0
MIN_EIGENVALUE = 1e-10


class DegenerateComponent(ArithmeticError):
    """Component density vanishes over the whole integration sample."""


@dataclass
class Ggdc:
    mean: np.ndarray
    covariance: np.ndarray
    shape: float = 1.0
    weight: float = 1.0

    def __post_init__(self):
        self.mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        self.covariance = np.atleast_2d(np.asarray(self.covariance, dtype=float))

    @property
    def dim(self) -> int:
        return self.mean.size

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "covariance": self.covariance.tolist(),
            "shape": float(self.shape),
            "weight": float(self.weight),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Ggdc":
        return cls(d["mean"], d["covariance"], d["shape"], d["weight"])


@dataclass(frozen=True)
class ReducedSimplex:
    """{x in R^dim : x >= 0, sum(x) <= 1}."""

    dim: int

    @property
    def volume(self) -> float:
        return 1.0 / math.factorial(self.dim)

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.all(x >= -tol, axis=1) & (x.sum(axis=1) <= 1.0 + tol)

    def uniform(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Plain Monte Carlo: flat Dirichlet via normalized exponentials."""
        e = rng.exponential(size=(n, self.dim + 1))
        return e[:, :-1] / e.sum(axis=1, keepdims=True)

    def uniform_qmc(self, n: int, seed: int) -> np.ndarray:
        """Scrambled Sobol points pushed through the sorted-spacings map."""
        m = max(0, math.ceil(math.log2(max(n, 2))))
        u = qmc.Sobol(self.dim, scramble=True, seed=seed).random_base2(m)
        if self.dim == 1:
            return u
        s = np.sort(u, axis=1)
        return np.diff(np.concatenate([np.zeros((s.shape[0], 1)), s], axis=1), axis=1)


def log_normalizing_constant(dim: int, shape: float) -> float:
    """Log of the Gamma-function factor (without the covariance determinant)."""
    b = shape
    return (gammaln(dim / 2) - dim / 2 * math.log(math.pi) - gammaln(dim / (2 * b))
            - dim / (2 * b) * math.log(2.0) + math.log(b))


def cholesky(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise ValueError("covariance is not symmetric positive-definite") from exc


def mahalanobis(X, mean, chol) -> np.ndarray:
    diff = np.atleast_2d(X) - mean
    w = solve_triangular(chol, diff.T, lower=True, check_finite=False)
    return np.einsum("ij,ij->j", w, w)


def log_ggd(X, mean, cov, shape, chol=None):
    """Log-density of the unbounded component and the Mahalanobis values y."""
    mean = np.atleast_1d(mean)
    chol = cholesky(cov) if chol is None else chol
    y = mahalanobis(X, mean, chol)
    half_logdet = np.log(np.diag(chol)).sum()
    with np.errstate(over="ignore"):  # far points: y**shape -> inf, density -> 0
        logf = log_normalizing_constant(mean.size, shape) - half_logdet - 0.5 * y ** shape
    return logf, y


def ggd_pdf_unbounded(x, g: Ggdc):
    logf, _ = log_ggd(x, g.mean, g.covariance, g.shape)
    out = np.exp(logf)
    return out if np.ndim(x) > 1 else float(out[0])


def log_mc_normalizer(g: Ggdc, region: ReducedSimplex, samples: np.ndarray) -> float:
    """Log of the integral of the unbounded density over the region.

    Samples are uniform on the region, so the integral is vol * mean(f).
    """
    logf, _ = log_ggd(samples, g.mean, g.covariance, g.shape)
    total = logsumexp(logf)
    if not np.isfinite(total):
        raise DegenerateComponent("component density is zero on every integration sample")
    return math.log(region.volume) + float(total) - math.log(len(samples))


def mc_normalizer(g: Ggdc, region: ReducedSimplex, samples: np.ndarray) -> float:
    return math.exp(log_mc_normalizer(g, region, samples))


def bounded_logpdf(x, g: Ggdc, region: ReducedSimplex, log_norm: float) -> np.ndarray:
    x = np.atleast_2d(x)
    logf, _ = log_ggd(x, g.mean, g.covariance, g.shape)
    return np.where(region.contains(x), logf - log_norm, -np.inf)


def bounded_pdf(x, g: Ggdc, region: ReducedSimplex, normalizer: float):
    if not normalizer > 0:
        raise ValueError("normalizer estimate must be positive")
    out = np.exp(bounded_logpdf(x, g, region, math.log(normalizer)))
    return out if np.ndim(x) > 1 else float(out[0])


def mixture_logpdf(x, mixture: list[Ggdc], region: ReducedSimplex, log_norms) -> np.ndarray:
    x = np.atleast_2d(x)
    parts = [math.log(g.weight) + bounded_logpdf(x, g, region, ln)
             for g, ln in zip(mixture, log_norms) if g.weight > 0]
    return logsumexp(np.vstack(parts), axis=0)


def sample_unbounded(g: Ggdc, n: int, rng: np.random.Generator) -> np.ndarray:
    """Stochastic representation: y**shape ~ Gamma(dim / (2 shape), scale=2), direction uniform."""
    K = g.dim
    r = rng.gamma(K / (2 * g.shape), 2.0, size=n) ** (1.0 / (2 * g.shape))
    u = rng.standard_normal((n, K))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return g.mean + (r[:, None] * u) @ cholesky(g.covariance).T
