"""Gaussian-mixture density over a reduced embedding space and quantile extremes.

EM with full covariances, log-sum-exp responsibilities, a k-means++-style
seeded init, and a ridge on every covariance. The fitted log-density is cut at
its 2.5th/97.5th percentiles to flag sparse and hypersaturated samples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import ReducedMatrix

DEFAULT_K = 16
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 200
COV_RIDGE = 1e-6


@dataclass(frozen=True)
class GmmModel:
    weights: np.ndarray  # K, sums to 1
    means: np.ndarray  # K x p
    covariances: np.ndarray  # K x p x p, SPD after ridge
    converged: bool
    n_iter: int
    log_likelihood_trace: np.ndarray  # one total log-likelihood per iteration

    @property
    def K(self) -> int:
        return self.weights.shape[0]

    @property
    def final_log_likelihood(self) -> float:
        return float(self.log_likelihood_trace[-1])


@dataclass(frozen=True)
class DensityReport:
    log_density: np.ndarray
    low_threshold: float
    high_threshold: float
    sparse_ids: list[str]
    dense_ids: list[str]
    q_low: float
    q_high: float


def _as_points(points) -> np.ndarray:
    if isinstance(points, ReducedMatrix):
        points = points.values
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"points must be 2-d, got shape {x.shape}")
    return x


def _log_gaussians(x: np.ndarray, means: np.ndarray, covariances: np.ndarray) -> np.ndarray:
    """n x K matrix of log N(x_i | mu_k, S_k) via per-component Cholesky."""
    n, p = x.shape
    K = means.shape[0]
    out = np.empty((n, K), dtype=np.float64)
    const = -0.5 * p * math.log(2.0 * math.pi)
    for k in range(K):
        chol = np.linalg.cholesky(covariances[k])
        diff = x - means[k]
        # triangular solve: z = chol^-1 diff^T, mahalanobis = ||z||^2
        z = np.linalg.solve(chol, diff.T)
        maha = np.einsum("ij,ij->j", z, z)
        log_det = 2.0 * np.log(np.diag(chol)).sum()
        out[:, k] = const - 0.5 * (log_det + maha)
    return out


def _logsumexp(a: np.ndarray, axis: int = 1) -> np.ndarray:
    amax = np.max(a, axis=axis, keepdims=True)
    return (amax + np.log(np.exp(a - amax).sum(axis=axis, keepdims=True))).squeeze(axis)


def _kmeanspp_means(x: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: spread initial means proportionally to squared distance."""
    n = x.shape[0]
    means = np.empty((K, x.shape[1]), dtype=np.float64)
    means[0] = x[rng.integers(n)]
    d2 = np.sum((x - means[0]) ** 2, axis=1)
    for k in range(1, K):
        total = d2.sum()
        if total <= 0:
            means[k] = x[rng.integers(n)]
            continue
        probs = d2 / total
        means[k] = x[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, np.sum((x - means[k]) ** 2, axis=1))
    return means


def fit_gmm(
    points,
    K: int = DEFAULT_K,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> GmmModel:
    """EM until the total log-likelihood improves by less than tol, or max_iter."""
    x = _as_points(points)
    n, p = x.shape
    if n < K:
        raise ValueError(f"n={n} points cannot support K={K} components")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(K,)))
    weights = np.full(K, 1.0 / K)
    means = _kmeanspp_means(x, K, rng)
    base_cov = np.cov(x, rowvar=False).reshape(p, p) if n > 1 else np.eye(p)
    base_cov = base_cov + COV_RIDGE * np.eye(p)
    covariances = np.repeat(base_cov[None, :, :], K, axis=0)

    trace: list[float] = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        log_comp = _log_gaussians(x, means, covariances) + np.log(weights)[None, :]
        log_norm = _logsumexp(log_comp, axis=1)
        ll = float(log_norm.sum())
        if not math.isfinite(ll):
            raise ValueError(f"non-finite log-likelihood at EM iteration {it}")
        trace.append(ll)
        if len(trace) > 1 and ll - trace[-2] < tol:
            converged = True
            break
        resp = np.exp(log_comp - log_norm[:, None])  # n x K
        nk = resp.sum(axis=0)
        weights = nk / n
        means = (resp.T @ x) / nk[:, None]
        for k in range(K):
            diff = x - means[k]
            cov = (resp[:, k][:, None] * diff).T @ diff / nk[k]
            covariances[k] = (cov + cov.T) / 2.0 + COV_RIDGE * np.eye(p)
    return GmmModel(
        weights=weights,
        means=means,
        covariances=covariances,
        converged=converged,
        n_iter=it,
        log_likelihood_trace=np.array(trace),
    )


def log_density(model: GmmModel, points) -> np.ndarray:
    """Log mixture density per point, in log-sum-exp form (never underflows to -inf)."""
    x = _as_points(points)
    if x.shape[1] != model.means.shape[1]:
        raise ValueError(f"dimension mismatch: points {x.shape[1]} vs model {model.means.shape[1]}")
    log_comp = _log_gaussians(x, model.means, model.covariances) + np.log(model.weights)[None, :]
    return _logsumexp(log_comp, axis=1)


def bic_sweep(points, candidates: Sequence[int] = (4, 8, 16, 32), seed: int = 0) -> tuple[int, dict[int, float]]:
    """Pick K by Bayesian information criterion over the candidate list."""
    x = _as_points(points)
    n, p = x.shape
    scores: dict[int, float] = {}
    for K in candidates:
        if K > n:
            continue
        model = fit_gmm(x, K=K, seed=seed)
        n_params = K - 1 + K * p + K * p * (p + 1) / 2
        scores[K] = n_params * math.log(n) - 2.0 * model.final_log_likelihood
    if not scores:
        raise ValueError("no candidate K is feasible for the input size")
    best = min(scores, key=lambda k: (scores[k], k))
    return best, scores


def density_extremes(
    scores: np.ndarray,
    ids: Sequence[str],
    q_low: float = 0.025,
    q_high: float = 0.975,
) -> DensityReport:
    """Flag samples strictly below/above nearest-rank cut points.

    The cut boundary for the low side is the (ceil(q*n)+1)-th smallest score,
    so with continuous scores exactly ceil(q*n) samples fall strictly below
    it; ties at the boundary are excluded, so an all-equal input flags nobody.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    if n == 0:
        raise ValueError("scores must be non-empty")
    if len(ids) != n:
        raise ValueError("ids must align with scores")
    ordered = np.sort(scores)
    # ceil with a guard: 0.025 * n and (1 - 0.975) * n must agree at integers
    count = lambda q: math.ceil(q * n - 1e-9)
    lo_rank = min(count(q_low), n - 1)
    hi_rank = max(n - 1 - count(1.0 - q_high), 0)
    low_threshold = float(ordered[lo_rank])
    high_threshold = float(ordered[hi_rank])
    sparse = [ids[i] for i in range(n) if scores[i] < low_threshold]
    dense = [ids[i] for i in range(n) if scores[i] > high_threshold]
    return DensityReport(
        log_density=scores,
        low_threshold=low_threshold,
        high_threshold=high_threshold,
        sparse_ids=sparse,
        dense_ids=dense,
        q_low=q_low,
        q_high=q_high,
    )
