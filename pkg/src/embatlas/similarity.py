"""Per-dataset Gaussian fingerprints and pairwise Fréchet distances.

Each dataset is summarized by the empirical mean and covariance of its
normalized embeddings (optionally in a shared PCA space, since small datasets
cannot support a full-dimensional covariance), and dataset pairs are compared
with FD(a,b) = ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)).
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .corpus import Corpus
from .geometry import ReducedMatrix, pca_reduce

logger = logging.getLogger(__name__)

COV_EPSILON = 1e-6
DEFAULT_REDUCE_TO = 64
_NEG_EIG_WARN = 1e-6


@dataclass(frozen=True)
class GaussianSummary:
    dataset: str
    n: int
    mu: np.ndarray
    sigma: np.ndarray  # symmetric, ridge-regularized, unbiased 1/(n-1)


@dataclass(frozen=True)
class SimilarityMatrix:
    datasets: list[str]
    fd: np.ndarray  # symmetric, zero diagonal
    reduced_to: Optional[int]  # shared PCA dimension, or None for raw space
    excluded: list[str]  # datasets with < 2 samples


def _moments(points: np.ndarray, dataset: str, n_total: int) -> GaussianSummary:
    mu = points.mean(axis=0)
    centered = points - mu
    sigma = centered.T @ centered / (points.shape[0] - 1)
    sigma = (sigma + sigma.T) / 2.0 + COV_EPSILON * np.eye(points.shape[1])
    return GaussianSummary(dataset=dataset, n=n_total, mu=mu, sigma=sigma)


def shared_reduction(corpus: Corpus, reduce_to: Optional[int]) -> Optional[ReducedMatrix]:
    """Fit one PCA on the full corpus so all dataset summaries share a basis."""
    if reduce_to is None:
        return None
    x = corpus.embeddings.values
    p = min(reduce_to, x.shape[0], x.shape[1])
    return pca_reduce(x, p)


def dataset_moments(
    corpus: Corpus,
    dataset: str,
    reduce_to: Optional[int] = DEFAULT_REDUCE_TO,
    reduction: Optional[ReducedMatrix] = None,
) -> GaussianSummary:
    """Empirical first and second moments of one dataset's normalized embeddings."""
    idx = corpus.dataset_indices(dataset)
    if idx.size < 2:
        raise ValueError(f"dataset {dataset!r} has {idx.size} samples; moments need >= 2")
    if reduction is None:
        reduction = shared_reduction(corpus, reduce_to)
    if reduction is not None:
        points = reduction.values[idx]
    else:
        points = corpus.embeddings.values[idx].astype(np.float64)
    return _moments(points, dataset, int(idx.size))


def _sqrt_spd(sigma: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition; small negatives clamped."""
    eigvals, eigvecs = np.linalg.eigh(sigma)
    if eigvals.min() < -_NEG_EIG_WARN:
        logger.warning("clamping negative eigenvalue %.3e in covariance sqrt", eigvals.min())
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def trace_sqrt_product(sigma_a: np.ndarray, sigma_b: np.ndarray) -> float:
    """Tr((S_a S_b)^(1/2)) via the symmetric conjugation A^(1/2) S_b A^(1/2)."""
    a_half = _sqrt_spd(sigma_a)
    inner = a_half @ sigma_b @ a_half
    inner = (inner + inner.T) / 2.0
    eigvals = np.linalg.eigvalsh(inner)
    if eigvals.min() < -_NEG_EIG_WARN:
        logger.warning("clamping negative eigenvalue %.3e in trace-sqrt", eigvals.min())
    return float(np.sqrt(np.clip(eigvals, 0.0, None)).sum())


def frechet_distance(a: GaussianSummary, b: GaussianSummary) -> float:
    """Fréchet distance between two Gaussian summaries; tiny negative roundoff clamps to 0."""
    if a.mu.shape != b.mu.shape:
        raise ValueError(f"dimension mismatch: {a.mu.shape} vs {b.mu.shape}")
    mean_term = float(np.sum((a.mu - b.mu) ** 2))
    cov_term = float(np.trace(a.sigma) + np.trace(b.sigma)) - 2.0 * trace_sqrt_product(a.sigma, b.sigma)
    fd = mean_term + cov_term
    if fd < 0:
        if fd < -_NEG_EIG_WARN:
            logger.warning("clamping negative Fréchet distance %.3e to 0", fd)
        fd = 0.0
    return fd


def pairwise_fd(corpus: Corpus, reduce_to: Optional[int] = DEFAULT_REDUCE_TO) -> SimilarityMatrix:
    """Complete symmetric FD matrix over all datasets with >= 2 samples."""
    reduction = shared_reduction(corpus, reduce_to)
    eligible: list[str] = []
    excluded: list[str] = []
    summaries: dict[str, GaussianSummary] = {}
    for name in corpus.datasets():
        idx = corpus.dataset_indices(name)
        if idx.size < 2:
            excluded.append(name)
            continue
        eligible.append(name)
        summaries[name] = dataset_moments(corpus, name, reduce_to=reduce_to, reduction=reduction)
    if excluded:
        warnings.warn(f"excluding datasets with < 2 samples: {excluded}")
    if len(eligible) < 2:
        raise ValueError(f"need >= 2 eligible datasets, got {len(eligible)}")
    m = len(eligible)
    fd = np.zeros((m, m), dtype=np.float64)
    for i in range(m):
        for j in range(i + 1, m):
            value = frechet_distance(summaries[eligible[i]], summaries[eligible[j]])
            fd[i, j] = fd[j, i] = value
    return SimilarityMatrix(
        datasets=eligible,
        fd=fd,
        reduced_to=reduction.p if reduction is not None else None,
        excluded=excluded,
    )


def uniqueness_scores(sm: SimilarityMatrix) -> list[tuple[str, float]]:
    """Mean off-diagonal FD per dataset, descending: high scores mark distributional outliers."""
    m = len(sm.datasets)
    scores = []
    for i, name in enumerate(sm.datasets):
        off = np.delete(sm.fd[i], i)
        scores.append((name, float(off.mean())))
    scores.sort(key=lambda t: (-t[1], t[0]))
    return scores


def high_overlap_pairs(
    sm: SimilarityMatrix,
    threshold: Optional[float] = None,
    quantile: Optional[float] = None,
) -> list[tuple[str, str, float]]:
    """Dataset pairs with FD below an absolute threshold or an off-diagonal quantile."""
    if (threshold is None) == (quantile is None):
        raise ValueError("give exactly one of threshold or quantile")
    m = len(sm.datasets)
    iu = np.triu_indices(m, k=1)
    values = sm.fd[iu]
    if quantile is not None:
        if not (0.0 <= quantile <= 1.0):
            raise ValueError("quantile must be in [0, 1]")
        threshold = float(np.quantile(values, quantile)) if values.size else 0.0
        keep = values <= threshold if quantile >= 1.0 else values < threshold
    else:
        keep = values < threshold
    pairs = [
        (sm.datasets[i], sm.datasets[j], float(sm.fd[i, j]))
        for i, j, ok in zip(iu[0], iu[1], keep)
        if ok
    ]
    pairs.sort(key=lambda t: (t[2], t[0], t[1]))
    return pairs
