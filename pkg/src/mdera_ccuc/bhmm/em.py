"""EM fitting of a bounded multivariate generalized Gaussian mixture.

The integration sample (uniform over the region) is drawn once per run and
reused by every normalizer and every correction integral, so the objective
being climbed is a fixed deterministic function. Each M-step proposal for a
component is accepted only if it does not lower that component's expected
complete-data log-likelihood (step halving otherwise), which keeps the
observed log-likelihood monotone.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp, softmax
from sklearn.mixture import GaussianMixture

from ..special import digamma, trigamma
from .ggd import (SHAPE_MAX, SHAPE_MIN, DegenerateComponent, Ggdc, ReducedSimplex,
                  cholesky, log_ggd)

log = logging.getLogger(__name__)

_TINY_Y = 1e-12
_LN2 = math.log(2.0)


class EmptyComponent(ArithmeticError):
    pass


@dataclass(frozen=True)
class EmConfig:
    convergence_eps: float = 1e-7  # change in per-record mean log-likelihood
    max_iter: int = 300
    mc_sample_count: int = 8192
    rng_seed: int = 0
    components_range: tuple[int, int] = (1, 4)
    qmc: bool = True
    min_eigenvalue: float = 1e-4  # DF resolution the integration sample can resolve
    init_reg: float = 1e-4
    fix_shape: bool = False
    max_halvings: int = 10
    gmm_restarts: int = 3

    def __post_init__(self):
        lo, hi = self.components_range
        if not (1 <= lo <= hi) or self.max_iter < 1 or self.mc_sample_count < 1000 or self.convergence_eps <= 0:
            raise ValueError(f"invalid EmConfig {self}")


@dataclass
class EmState:
    X: np.ndarray
    R: np.ndarray
    region: ReducedSimplex
    mixture: list[Ggdc]
    posteriors: np.ndarray | None = None
    loglik: float = -np.inf
    iter: int = 0
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_components(self) -> int:
        return len(self.mixture)


@dataclass
class FitResult:
    mixture: list[Ggdc]
    log_norms: np.ndarray
    loglik: float
    history: list[float]
    n_iter: int
    converged: bool
    region: ReducedSimplex
    n_records: int
    fixed_shape: bool = False

    @property
    def n_params(self) -> int:
        K = self.region.dim
        per = K + K * (K + 1) // 2 + (0 if self.fixed_shape else 1)
        return len(self.mixture) * per + len(self.mixture) - 1

    @property
    def bic(self) -> float:
        return -2.0 * self.loglik + self.n_params * math.log(self.n_records)


@dataclass
class _Terms:
    logf_x: np.ndarray
    y_x: np.ndarray
    logf_r: np.ndarray
    y_r: np.ndarray
    log_norm: float

    @property
    def w_r(self) -> np.ndarray:
        return softmax(self.logf_r)

    @property
    def logp_x(self) -> np.ndarray:
        return self.logf_x - self.log_norm


def _terms(state: EmState, g: Ggdc) -> _Terms:
    chol = cholesky(g.covariance)
    logf_x, y_x = log_ggd(state.X, g.mean, g.covariance, g.shape, chol)
    logf_r, y_r = log_ggd(state.R, g.mean, g.covariance, g.shape, chol)
    total = logsumexp(logf_r)
    if not np.isfinite(total):
        raise DegenerateComponent("component density vanishes on the integration sample")
    log_norm = math.log(state.region.volume) + float(total) - math.log(len(state.R))
    return _Terms(logf_x, np.maximum(y_x, _TINY_Y), logf_r, np.maximum(y_r, _TINY_Y), log_norm)


def _current(state: EmState, j: int) -> _Terms:
    """Terms of component j at its current parameters, cached by identity."""
    g = state.mixture[j]
    hit = state._cache.get(j)
    if hit is None or hit[0] is not g:
        hit = (g, _terms(state, g))
        state._cache[j] = hit
    return hit[1]


def component_log_norms(state: EmState) -> np.ndarray:
    return np.array([_current(state, j).log_norm for j in range(state.n_components)])


def _log_joint(state: EmState) -> np.ndarray:
    cols = [math.log(max(g.weight, 1e-300)) + _current(state, j).logp_x
            for j, g in enumerate(state.mixture)]
    return np.column_stack(cols)


def log_likelihood(state: EmState) -> float:
    """Observed-data log-likelihood of the bounded mixture."""
    return float(logsumexp(_log_joint(state), axis=1).sum())


def em_update_posteriors(state: EmState) -> np.ndarray:
    lj = _log_joint(state)
    norm = logsumexp(lj, axis=1, keepdims=True)
    bad = ~np.isfinite(norm[:, 0])
    z = np.exp(lj - np.where(np.isfinite(norm), norm, 0.0))
    if bad.any():
        log.warning("%d records have zero density under every component; using uniform posteriors", bad.sum())
        z[bad] = 1.0 / lj.shape[1]
    return z


def em_update_weights(state: EmState) -> np.ndarray:
    z = state.posteriors
    return z.sum(axis=0) / z.shape[0]


def _resp(state: EmState, j: int) -> np.ndarray:
    z = state.posteriors[:, j]
    if z.sum() < 1e-10:
        raise EmptyComponent(f"component {j} has no responsibility")
    return z


def em_update_means(state: EmState, j: int) -> np.ndarray:
    """Fixed-point mean update with the Monte-Carlo boundary correction."""
    z = _resp(state, j)
    g = state.mixture[j]
    t = _current(state, j)
    b = g.shape
    a = z * t.y_x ** (b - 1.0)
    correction = (t.w_r * t.y_r ** (b - 1.0)) @ (state.R - g.mean)
    return (a @ state.X - z.sum() * correction) / a.sum()


def _floor_eigs(S: np.ndarray, floor: float) -> np.ndarray:
    S = 0.5 * (S + S.T)
    vals, vecs = np.linalg.eigh(S)
    vals = np.maximum(vals, floor)
    out = (vecs * vals) @ vecs.T
    return 0.5 * (out + out.T)


def em_update_covariance(state: EmState, j: int, min_eigenvalue: float = 1e-10) -> np.ndarray:
    z = _resp(state, j)
    g = state.mixture[j]
    t = _current(state, j)
    b = g.shape
    dx = state.X - g.mean
    dr = state.R - g.mean
    data_term = (dx * (z * b * t.y_x ** (b - 1.0))[:, None]).T @ dx / z.sum()
    mc_term = (dr * (t.w_r * b * t.y_r ** (b - 1.0))[:, None]).T @ dr - g.covariance
    S = data_term - mc_term
    if not np.all(np.isfinite(S)):
        return g.covariance
    return _floor_eigs(S, min_eigenvalue)


def _q_component(state: EmState, j: int, g: Ggdc | None = None) -> float:
    """Expected complete-data log-likelihood of one component (weights excluded).

    With ``g`` given, evaluates a candidate and caches its terms for adoption.
    """
    z = state.posteriors[:, j]
    if g is None:
        return float(z @ _current(state, j).logp_x)
    try:
        t = _terms(state, g)
    except (ValueError, DegenerateComponent):
        return -np.inf
    state._cache[("cand", j)] = (g, t)
    return float(z @ t.logp_x)


def _adopt(state: EmState, j: int, g: Ggdc) -> None:
    state.mixture[j] = g
    cand = state._cache.pop(("cand", j), None)
    if cand is not None and cand[0] is g:
        state._cache[j] = cand


def shape_derivatives(state: EmState, j: int) -> tuple[float, float]:
    z = state.posteriors[:, j]
    g = state.mixture[j]
    t = _current(state, j)
    b, K = g.shape, g.dim
    arg = K / (2 * b)
    psi, psi1 = digamma(arg), trigamma(arg)
    q1 = 1 / b + psi * K / (2 * b * b) + _LN2 * K / (2 * b * b)
    q2 = -1 / b ** 2 - psi1 * (K / (2 * b * b)) ** 2 - psi * K / b ** 3 - _LN2 * K / b ** 3
    w = t.w_r
    # points with zero weight may have y**b overflow; they contribute nothing
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        ln_x, ln_r = np.log(t.y_x), np.log(t.y_r)
        yb_x, yb_r = t.y_x ** b, t.y_r ** b
        g_x = np.where(z > 0, q1 - 0.5 * yb_x * ln_x, 0.0)
        h_x = np.where(z > 0, q2 - 0.5 * yb_x * ln_x ** 2, 0.0)
        g_r = np.where(w > 0, q1 - 0.5 * yb_r * ln_r, 0.0)
        h_r = np.where(w > 0, q2 - 0.5 * yb_r * ln_r ** 2, 0.0)
    eg, eg2, eh = w @ g_r, w @ g_r ** 2, w @ h_r
    d1 = float(z @ (g_x - eg))
    d2 = float(z.sum() * (-eg2 - eh + eg * eg) + z @ h_x)
    return d1, d2


def em_update_shape(state: EmState, j: int, max_halvings: int = 10) -> float:
    """Damped, clamped Newton step on the shape parameter."""
    g = state.mixture[j]
    try:
        d1, d2 = shape_derivatives(state, j)
    except (ValueError, DegenerateComponent):
        return g.shape
    if not (np.isfinite(d1) and np.isfinite(d2)):
        return g.shape
    step = -d1 / d2 if d2 < 0 else math.copysign(0.1 * g.shape, d1)
    base = _q_component(state, j)
    for _ in range(max_halvings + 1):
        trial = float(np.clip(g.shape + step, SHAPE_MIN, SHAPE_MAX))
        cand = replace(g, shape=trial)
        if _q_component(state, j, cand) >= base:
            _adopt(state, j, cand)
            return trial
        step *= 0.5
    return g.shape


def _damped(state: EmState, j: int, field_name: str, proposal, max_halvings: int) -> None:
    """Move component j toward ``proposal``, halving until its Q term does not drop."""
    g = state.mixture[j]
    old = getattr(g, field_name)
    base = _q_component(state, j)
    step = proposal - old
    for _ in range(max_halvings + 1):
        cand = replace(g, **{field_name: old + step})
        if _q_component(state, j, cand) >= base:
            _adopt(state, j, cand)
            return
        step = 0.5 * step


def integration_sample(region: ReducedSimplex, cfg: EmConfig) -> np.ndarray:
    if cfg.qmc:
        return region.uniform_qmc(cfg.mc_sample_count, cfg.rng_seed)
    return region.uniform(cfg.mc_sample_count, np.random.default_rng(cfg.rng_seed))


def initial_mixture(X: np.ndarray, n_components: int, cfg: EmConfig) -> list[Ggdc]:
    N, K = X.shape
    if N == 1 or n_components == 1 and N < 3:
        return [Ggdc(X.mean(axis=0), np.eye(K) * cfg.init_reg, 1.0, 1.0)]
    gm = GaussianMixture(n_components, covariance_type="full", reg_covar=cfg.init_reg,
                         random_state=cfg.rng_seed, n_init=cfg.gmm_restarts, max_iter=200)
    gm.fit(X)
    return [Ggdc(m, c, 1.0, w) for m, c, w in zip(gm.means_, gm.covariances_, gm.weights_)]


def _drop_components(state: EmState, keep: list[int]) -> None:
    state.mixture = [state.mixture[j] for j in keep]
    state._cache.clear()
    total = sum(g.weight for g in state.mixture)
    for g in state.mixture:
        g.weight /= total


def fit_bmggmm(X, cfg: EmConfig = EmConfig(), n_components: int = 1,
               initial: list[Ggdc] | None = None) -> FitResult:
    """Run EM on reduced-dimension records lying inside the reduced simplex."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N, K = X.shape
    if K < 1:
        raise ValueError("zero-dimensional data is a point mass, not a mixture")
    region = ReducedSimplex(K)
    n_components = max(1, min(n_components, N))
    mixture = initial if initial is not None else initial_mixture(X, n_components, cfg)
    state = EmState(X, integration_sample(region, cfg), region, [replace(g) for g in mixture])

    # components whose density vanishes on the integration sample cannot be normalized
    keep = []
    for j, g in enumerate(state.mixture):
        try:
            _terms(state, g)
            keep.append(j)
        except DegenerateComponent:
            log.warning("dropping initial component %d: not integrable over the region", j)
    if not keep:
        raise DegenerateComponent("no initial component is integrable over the region")
    _drop_components(state, keep)

    state.loglik = log_likelihood(state)
    history = [state.loglik]
    converged = False
    for it in range(1, cfg.max_iter + 1):
        state.iter = it
        state.posteriors = em_update_posteriors(state)
        alive = [j for j in range(state.n_components) if state.posteriors[:, j].sum() >= 1e-8]
        if len(alive) < state.n_components:
            _drop_components(state, alive)
            state.posteriors = em_update_posteriors(state)

        for j in range(state.n_components):
            mu = em_update_means(state, j)
            if np.all(np.isfinite(mu)):
                _damped(state, j, "mean", mu, cfg.max_halvings)
            cov = em_update_covariance(state, j, cfg.min_eigenvalue)
            _damped(state, j, "covariance", cov, cfg.max_halvings)
            if not cfg.fix_shape:
                em_update_shape(state, j, cfg.max_halvings)
        for g, w in zip(state.mixture, em_update_weights(state)):
            g.weight = float(w)

        new_ll = log_likelihood(state)
        history.append(new_ll)
        change = abs(new_ll - state.loglik) / N
        state.loglik = new_ll
        if change < cfg.convergence_eps:
            converged = True
            break

    return FitResult(state.mixture, component_log_norms(state), state.loglik, history, state.iter,
                     converged, region, N, cfg.fix_shape)


def select_component_count(X, cfg: EmConfig = EmConfig()) -> tuple[int, FitResult]:
    """Pick the number of components by BIC over ``cfg.components_range``.

    The scan stops at the first count whose BIC is worse than its predecessor.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    N, K = X.shape
    lo, hi = cfg.components_range
    hi = min(hi, N)
    if N < 10 * K:
        lo = hi = 1
    best = None
    for J in range(min(lo, hi), hi + 1):
        fit = fit_bmggmm(X, cfg, J)
        if len(fit.mixture) < J:
            continue
        if best is not None and fit.bic >= best.bic:
            break
        best = fit
    if best is None:
        best = fit_bmggmm(X, cfg, 1)
    return len(best.mixture), best
