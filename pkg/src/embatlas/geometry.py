"""Distance primitives, exact k-nearest-neighbor search, and PCA reduction.

All search here is exact brute force with a documented tie-break (ascending
pool index), so results can serve as the reference for any faster backend.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_CHUNK = 2048  # query rows per distance-matrix block


@dataclass(frozen=True)
class NeighborList:
    query_index: int  # pool index of the query, or -1 for an external vector
    neighbors: list[tuple[int, float]]  # (pool index, distance), distances non-decreasing


@dataclass(frozen=True)
class ReducedMatrix:
    values: np.ndarray  # n x p projected coordinates
    basis: np.ndarray  # p x d orthonormal rows
    explained_variance: np.ndarray  # p non-increasing values
    mean: np.ndarray  # d-vector subtracted before projection

    @property
    def p(self) -> int:
        return self.basis.shape[0]

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Project new rows into the fitted space."""
        return (np.asarray(points, dtype=np.float64) - self.mean) @ self.basis.T


def cosine_distance(u: np.ndarray, v: np.ndarray) -> float:
    """1 - <u, v> for unit vectors; 0 when identical, 2 when antipodal."""
    return float(1.0 - np.dot(np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64)))


def cosine_distance_matrix(queries: np.ndarray, pool: np.ndarray) -> np.ndarray:
    """Pairwise 1 - Q P^T over unit rows, in float64."""
    q = np.asarray(queries, dtype=np.float64)
    p = np.asarray(pool, dtype=np.float64)
    return 1.0 - q @ p.T


def knn(
    queries: np.ndarray,
    pool: np.ndarray,
    k: int,
    exclude_self: bool = False,
    query_indices: np.ndarray | None = None,
    metric: str = "cosine",
) -> list[NeighborList]:
    """Exact brute-force kNN with deterministic tie-break by ascending pool index.

    ``exclude_self`` masks the pool row identified by ``query_indices[i]`` for
    query i; pass the pool indices when queries are themselves pool rows.
    """
    pool = np.asarray(pool, dtype=np.float64)
    queries = np.asarray(queries, dtype=np.float64)
    if queries.ndim == 1:
        queries = queries[None, :]
    n_pool = pool.shape[0]
    available = n_pool - (1 if exclude_self else 0)
    if k < 1 or k > available:
        raise ValueError(f"k={k} out of range; pool holds {n_pool} rows ({available} available)")
    if exclude_self:
        if query_indices is None:
            raise ValueError("exclude_self requires query_indices into the pool")
        query_indices = np.asarray(query_indices, dtype=int)
        if query_indices.shape[0] != queries.shape[0]:
            raise ValueError("query_indices must align with queries")

    out: list[NeighborList] = []
    for start in range(0, queries.shape[0], _CHUNK):
        block = queries[start : start + _CHUNK]
        if metric == "cosine":
            dist = cosine_distance_matrix(block, pool)
        elif metric == "euclidean":
            diff = block[:, None, :] - pool[None, :, :]
            dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        else:
            raise ValueError(f"unknown metric {metric!r}")
        for row in range(block.shape[0]):
            i = start + row
            d = dist[row].copy()
            self_idx = int(query_indices[i]) if exclude_self else -1
            if exclude_self:
                d[self_idx] = np.inf
            # stable argsort keeps ties in ascending pool-index order
            order = np.argsort(d, kind="stable")[:k]
            out.append(
                NeighborList(
                    query_index=self_idx,
                    neighbors=[(int(j), float(d[j])) for j in order],
                )
            )
    return out


def mean_knn_distances(
    queries: np.ndarray,
    pool: np.ndarray,
    k: int,
    exclude_self_indices: np.ndarray | None = None,
) -> np.ndarray:
    """Per-query mean of the k smallest cosine distances to the pool.

    Vectorized scoring path shared by the novelty metrics; when
    ``exclude_self_indices`` is given, entry i masks pool column
    exclude_self_indices[i] (the trivial self-match).
    """
    pool = np.asarray(pool, dtype=np.float64)
    queries = np.asarray(queries, dtype=np.float64)
    n_pool = pool.shape[0]
    available = n_pool - (1 if exclude_self_indices is not None else 0)
    if k < 1 or k > available:
        raise ValueError(f"k={k} out of range; pool offers {available} neighbors")
    scores = np.empty(queries.shape[0], dtype=np.float64)
    for start in range(0, queries.shape[0], _CHUNK):
        block = queries[start : start + _CHUNK]
        dist = cosine_distance_matrix(block, pool)
        if exclude_self_indices is not None:
            rows = np.arange(block.shape[0])
            dist[rows, exclude_self_indices[start : start + block.shape[0]]] = np.inf
        smallest = np.partition(dist, k - 1, axis=1)[:, :k]
        scores[start : start + block.shape[0]] = smallest.mean(axis=1)
    return scores


def pca_reduce(values: np.ndarray, p: int) -> ReducedMatrix:
    """Principal-component reduction to p dimensions via SVD of centered rows.

    Basis rows are orthonormal with a fixed sign convention (largest-magnitude
    loading positive) so repeated fits are bit-identical.
    """
    x = np.asarray(values, dtype=np.float64)
    n, d = x.shape
    if n < 2:
        raise ValueError("pca_reduce requires at least 2 rows")
    if not (1 <= p <= min(n, d)):
        raise ValueError(f"target dimension p={p} must satisfy 1 <= p <= min(n, d)={min(n, d)}")
    mean = x.mean(axis=0)
    centered = x - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    basis = vt[:p].copy()
    # sign convention: make the largest-|.| loading of each component positive
    for i in range(p):
        j = int(np.argmax(np.abs(basis[i])))
        if basis[i, j] < 0:
            basis[i] = -basis[i]
    explained = (s[:p] ** 2) / (n - 1)
    return ReducedMatrix(
        values=centered @ basis.T,
        basis=basis,
        explained_variance=explained,
        mean=mean,
    )
