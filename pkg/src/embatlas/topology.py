"""Spectral persistent homology: resistance geometry and H1 hole detection.

Pipeline: symmetrized kNN graph -> graph Laplacian pseudoinverse -> effective
resistance distances (with the von Luxburg degree correction) -> Vietoris-Rips
filtration restricted to simplices of dimension <= 2 -> exact H1 persistence
via GF(2) boundary-matrix reduction with representative cycles -> hole
geometry (center, radius, hypersphere volume, boundary samples).

Everything here is deterministic: the simplex order is (filtration value,
dimension, lexicographic vertices) and the reduction is the standard
left-to-right column algorithm with no clearing shortcuts.
"""
from __future__ import annotations

import dataclasses
import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .geometry import knn

logger = logging.getLogger(__name__)

DEFAULT_GRAPH_K = 15
DEFAULT_EPS_REL = 1e-10
DEFAULT_K_B = 20
DEFAULT_BOUNDARY_ALPHA = 1.5
DEFAULT_MAX_POINTS = 2000

UNREACHABLE = np.inf  # sentinel for cross-component resistance


@dataclass(frozen=True)
class KnnGraph:
    adjacency: np.ndarray  # n x n symmetric 0/1, zero diagonal
    degrees: np.ndarray
    component_labels: np.ndarray  # n ints, 0-based component index

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_components(self) -> int:
        return int(self.component_labels.max()) + 1 if self.n else 0

    def components(self) -> list[np.ndarray]:
        return [np.nonzero(self.component_labels == c)[0] for c in range(self.n_components)]


@dataclass(frozen=True)
class ResistanceMatrix:
    naive: np.ndarray
    corrected: np.ndarray
    component_mask: np.ndarray  # True where the pair is in one component


@dataclass(frozen=True)
class PersistencePair:
    dimension: int
    birth: float
    death: float  # inf for essential classes
    birth_simplex: tuple[int, ...]
    death_simplex: Optional[tuple[int, ...]]
    representative: tuple[tuple[int, int], ...] = ()  # edges, dimension-1 pairs only

    @property
    def persistence(self) -> float:
        return self.death - self.birth


@dataclass(frozen=True)
class Hole:
    rank: int
    persistence: float
    birth: float
    death: float
    vertices: tuple[int, ...]  # indices into the point array used for detection
    center: np.ndarray
    size: int
    radius: float
    volume: float
    ambient_dim: int
    boundary_ids: tuple[str, ...] = ()


def build_knn_graph(points: np.ndarray, k: int, metric: str = "euclidean") -> KnnGraph:
    """Symmetrized kNN graph: edge (i, j) iff either point ranks the other in its top k.

    Euclidean and cosine orderings coincide on unit rows; euclidean is the
    default so reduced-space and planar inputs behave geometrically.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < 2:
        raise ValueError("graph needs at least 2 points")
    if not (1 <= k <= n - 1):
        raise ValueError(f"k={k} out of range for {n} points")
    neigh = knn(points, points, k, exclude_self=True, query_indices=np.arange(n), metric=metric)
    adj = np.zeros((n, n), dtype=np.int8)
    for nl in neigh:
        i = nl.query_index
        for j, _ in nl.neighbors:
            adj[i, j] = 1
            adj[j, i] = 1
    np.fill_diagonal(adj, 0)
    labels = _component_labels(adj)
    return KnnGraph(adjacency=adj, degrees=adj.sum(axis=1).astype(int), component_labels=labels)


def graph_from_adjacency(adjacency: np.ndarray) -> KnnGraph:
    """Wrap an explicit symmetric 0/1 adjacency matrix (no self-loops) as a graph."""
    adj = np.asarray(adjacency, dtype=np.int8)
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise ValueError("adjacency must be square")
    if (adj != adj.T).any():
        raise ValueError("adjacency must be symmetric")
    if np.diag(adj).any():
        raise ValueError("self-loops are not allowed")
    return KnnGraph(
        adjacency=adj,
        degrees=adj.sum(axis=1).astype(int),
        component_labels=_component_labels(adj),
    )


def _component_labels(adj: np.ndarray) -> np.ndarray:
    n = adj.shape[0]
    labels = np.full(n, -1, dtype=int)
    current = 0
    for start in range(n):
        if labels[start] >= 0:
            continue
        stack = [start]
        labels[start] = current
        while stack:
            v = stack.pop()
            for w in np.nonzero(adj[v])[0]:
                if labels[w] < 0:
                    labels[w] = current
                    stack.append(int(w))
        current += 1
    return labels


def laplacian_pseudoinverse(g: KnnGraph, eps_rel: float = DEFAULT_EPS_REL) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-component Moore-Penrose pseudoinverse of L = D - A via eigendecomposition.

    Eigenvalues at or below eps_rel * lambda_max are treated as the zero mode
    and inverted to 0. Returns (vertex index array, pinv block) per component
    with >= 2 vertices; singletons carry an empty 1x1 block.
    """
    out: list[tuple[np.ndarray, np.ndarray]] = []
    for comp in g.components():
        if comp.size < 2:
            out.append((comp, np.zeros((comp.size, comp.size))))
            continue
        sub = g.adjacency[np.ix_(comp, comp)].astype(np.float64)
        lap = np.diag(sub.sum(axis=1)) - sub
        eigvals, eigvecs = np.linalg.eigh(lap)
        cutoff = eps_rel * float(eigvals.max())
        inv = np.where(eigvals > cutoff, 1.0 / np.where(eigvals > cutoff, eigvals, 1.0), 0.0)
        pinv = (eigvecs * inv) @ eigvecs.T
        out.append((comp, (pinv + pinv.T) / 2.0))
    return out


def effective_resistance(g: KnnGraph, lpinv: Optional[list[tuple[np.ndarray, np.ndarray]]] = None) -> np.ndarray:
    """Naive effective resistance d_ij = L+_ii + L+_jj - 2 L+_ij; inf across components."""
    if lpinv is None:
        lpinv = laplacian_pseudoinverse(g)
    naive = np.full((g.n, g.n), UNREACHABLE, dtype=np.float64)
    for comp, pinv in lpinv:
        if comp.size == 0:
            continue
        diag = np.diag(pinv)
        block = diag[:, None] + diag[None, :] - 2.0 * pinv
        np.fill_diagonal(block, 0.0)
        naive[np.ix_(comp, comp)] = np.maximum(block, 0.0)
    np.fill_diagonal(naive, 0.0)
    return naive


def corrected_resistance(naive: np.ndarray, g: KnnGraph) -> np.ndarray:
    """von Luxburg degree correction, removing the 1/d_i + 1/d_j large-graph limit.

    d~_ij = d_ij - 1/d_i - 1/d_j + 2 A_ij / (d_i d_j); the self-loop terms of
    the published form vanish because A_ii = 0 here. The correction applies to
    distinct pairs, so the diagonal stays 0; cross-component pairs stay inf.
    """
    deg = g.degrees.astype(np.float64)
    if (deg == 0).any():
        bad = int(np.argmin(deg))
        raise ValueError(f"vertex {bad} is isolated; remove isolated vertices first")
    inv = 1.0 / deg
    corrected = naive - inv[:, None] - inv[None, :] + 2.0 * g.adjacency / np.outer(deg, deg)
    corrected[~np.isfinite(naive)] = UNREACHABLE
    np.fill_diagonal(corrected, 0.0)
    return corrected


def resistance_matrix(g: KnnGraph, eps_rel: float = DEFAULT_EPS_REL) -> ResistanceMatrix:
    lpinv = laplacian_pseudoinverse(g, eps_rel)
    naive = effective_resistance(g, lpinv)
    corrected = corrected_resistance(naive, g)
    mask = g.component_labels[:, None] == g.component_labels[None, :]
    return ResistanceMatrix(naive=naive, corrected=corrected, component_mask=mask)


def _build_filtration(dist: np.ndarray):
    """All simplices of dimension <= 2, ordered by (filtration, dimension, lex vertices)."""
    n = dist.shape[0]
    simplices: list[tuple[float, int, tuple[int, ...]]] = [(0.0, 0, (i,)) for i in range(n)]
    iu, ju = np.triu_indices(n, k=1)
    for i, j in zip(iu, ju):
        simplices.append((float(dist[i, j]), 1, (int(i), int(j))))
    if n >= 3:
        tri = np.array(list(itertools.combinations(range(n), 3)), dtype=int)
        filt = np.maximum(
            np.maximum(dist[tri[:, 0], tri[:, 1]], dist[tri[:, 0], tri[:, 2]]),
            dist[tri[:, 1], tri[:, 2]],
        )
        for row, f in zip(tri, filt):
            simplices.append((float(f), 2, (int(row[0]), int(row[1]), int(row[2]))))
    simplices.sort(key=lambda s: (s[0], s[1], s[2]))
    return simplices


def rips_persistence(dist: np.ndarray) -> list[PersistencePair]:
    """Exact persistence (dimensions 0 and 1) of the Rips filtration of a distance matrix.

    Standard GF(2) boundary-matrix reduction, columns processed left to right.
    Finite dimension-1 pairs carry the reduced death column as representative
    cycle; essential classes carry the creating cycle from the change-of-basis
    column. Zero-persistence pairs are included here; callers filter.
    """
    dist = np.asarray(dist, dtype=np.float64)
    n = dist.shape[0]
    if dist.ndim != 2 or dist.shape[0] != dist.shape[1]:
        raise ValueError("distance matrix must be square")
    if not np.isfinite(dist).all():
        raise ValueError("distance matrix must be finite; split components first")
    if not np.allclose(dist, dist.T, atol=1e-12):
        raise ValueError("distance matrix must be symmetric")
    if (dist < 0).any():
        raise ValueError("distance matrix must be non-negative")

    simplices = _build_filtration(dist)
    m = len(simplices)
    index_of_vertex = {}
    index_of_edge = {}
    for idx, (_, dim, verts) in enumerate(simplices):
        if dim == 0:
            index_of_vertex[verts[0]] = idx
        elif dim == 1:
            index_of_edge[verts] = idx

    columns: list[Optional[frozenset[int]]] = [None] * m
    cycle_basis: dict[int, frozenset[int]] = {}  # V columns, tracked for edges only
    low_of: dict[int, int] = {}
    creators_dim1: list[int] = []

    for j, (_, dim, verts) in enumerate(simplices):
        if dim == 0:
            columns[j] = frozenset()
            continue
        if dim == 1:
            col = {index_of_vertex[verts[0]], index_of_vertex[verts[1]]}
            basis = {j}
        else:
            col = {
                index_of_edge[(verts[0], verts[1])],
                index_of_edge[(verts[0], verts[2])],
                index_of_edge[(verts[1], verts[2])],
            }
            basis = None
        while col:
            low = max(col)
            k = low_of.get(low)
            if k is None:
                break
            col ^= columns[k]
            if basis is not None:
                basis ^= cycle_basis[k]
        columns[j] = frozenset(col)
        if basis is not None:
            cycle_basis[j] = frozenset(basis)
        if col:
            low_of[max(col)] = j
        elif dim == 1:
            creators_dim1.append(j)

    pairs: list[PersistencePair] = []
    for low, j in sorted(low_of.items()):
        birth_f, birth_dim, birth_verts = simplices[low]
        death_f, death_dim, death_verts = simplices[j]
        if birth_dim == 0:
            pairs.append(PersistencePair(0, birth_f, death_f, birth_verts, death_verts))
        elif birth_dim == 1:
            rep = tuple(sorted(simplices[e][2] for e in columns[j]))
            pairs.append(PersistencePair(1, birth_f, death_f, birth_verts, death_verts, rep))
    paired_births = set(low_of.keys())
    for i in range(n):
        vi = index_of_vertex[i]
        if vi not in paired_births:
            pairs.append(PersistencePair(0, 0.0, math.inf, (i,), None))
    for j in creators_dim1:
        if j not in paired_births:
            rep = tuple(sorted(simplices[e][2] for e in cycle_basis[j]))
            pairs.append(PersistencePair(1, simplices[j][0], math.inf, simplices[j][2], None, rep))
    pairs.sort(key=lambda p: (p.dimension, p.birth, p.death, p.birth_simplex))
    return pairs


def rips_persistence_h1(dist: np.ndarray, include_zero_persistence: bool = False) -> list[PersistencePair]:
    """H1 pairs of the Rips filtration; zero-persistence pairs suppressed by default."""
    pairs = [p for p in rips_persistence(dist) if p.dimension == 1]
    if not include_zero_persistence:
        pairs = [p for p in pairs if p.death > p.birth]
    return pairs


def hypersphere_volume(radius: float, dim: int) -> float:
    return math.pi ** (dim / 2.0) / math.gamma(dim / 2.0 + 1.0) * radius ** dim


def top_holes(
    pairs: Sequence[PersistencePair],
    distance_source: str,
    points: np.ndarray,
    k_top: int,
) -> list[Hole]:
    """Rank H1 pairs by persistence and attach latent-space geometry.

    Center is the mean position of the representative cycle's vertices, radius
    the median distance to that center, volume the hypersphere of that radius
    in the ambient dimension of ``points``. Returns all pairs when fewer than
    k_top exist.
    """
    del distance_source  # recorded by callers in their reports
    points = np.asarray(points, dtype=np.float64)
    finite = [p for p in pairs if p.dimension == 1 and math.isfinite(p.death)]
    infinite = [p for p in pairs if p.dimension == 1 and not math.isfinite(p.death)]
    # essential classes have infinite persistence, so they outrank every finite pair
    ranked = sorted(infinite, key=lambda p: (p.birth, p.birth_simplex)) + sorted(
        finite, key=lambda p: (-p.persistence, p.birth, p.birth_simplex)
    )
    if len(ranked) < k_top:
        logger.info("only %d H1 features available (k_top=%d)", len(ranked), k_top)
    holes: list[Hole] = []
    for rank, pair in enumerate(ranked[:k_top], start=1):
        verts = sorted({v for edge in pair.representative for v in edge})
        coords = points[verts]
        center = coords.mean(axis=0)
        radius = float(np.median(np.linalg.norm(coords - center, axis=1)))
        holes.append(
            Hole(
                rank=rank,
                persistence=float(pair.persistence) if math.isfinite(pair.death) else math.inf,
                birth=pair.birth,
                death=pair.death,
                vertices=tuple(verts),
                center=center,
                size=len(verts),
                radius=radius,
                volume=hypersphere_volume(radius, points.shape[1]),
                ambient_dim=points.shape[1],
            )
        )
    return holes


def boundary_points(
    hole: Hole,
    points: np.ndarray,
    ids: Sequence[str],
    k_b: int = DEFAULT_K_B,
    alpha: float = DEFAULT_BOUNDARY_ALPHA,
) -> list[str]:
    """Samples surrounding a hole: the alpha-filtered union of each hole vertex's k_b neighbors.

    The cut radius is alpha times the median (over hole vertices) of the
    distance to their k_b-th neighbor; hole vertices are always included.
    """
    if k_b < 1:
        raise ValueError("k_b must be >= 1")
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    k_eff = min(k_b, n - 1)
    hole_idx = np.array(hole.vertices, dtype=int)
    neigh = knn(
        points[hole_idx], points, k_eff, exclude_self=True, query_indices=hole_idx, metric="euclidean"
    )
    kth = np.array([nl.neighbors[-1][1] for nl in neigh])
    cut = alpha * float(np.median(kth))
    selected = set(int(v) for v in hole_idx)
    for nl in neigh:
        for j, d in nl.neighbors:
            if d <= cut:
                selected.add(j)
    return [ids[i] for i in sorted(selected)]


@dataclass(frozen=True)
class HoleDetection:
    holes: list[Hole]
    n_points_used: int
    n_points_total: int
    subsampled: bool
    distance_source: str
    graph_k: int
    components: int
    n_h1_features: int
    subsample_indices: Optional[np.ndarray] = field(default=None)


def detect_holes(
    points: np.ndarray,
    ids: Sequence[str],
    graph_k: int = DEFAULT_GRAPH_K,
    k_top: int = 5,
    k_b: int = DEFAULT_K_B,
    alpha: float = DEFAULT_BOUNDARY_ALPHA,
    eps_rel: float = DEFAULT_EPS_REL,
    use_corrected: bool = True,
    max_points: int = DEFAULT_MAX_POINTS,
    seed: int = 0,
    metric: str = "euclidean",
) -> HoleDetection:
    """Full hole-detection pass: graph, resistances, per-component H1, top-k geometry.

    Components with fewer than 3 vertices carry no H1 and are skipped. Inputs
    above ``max_points`` are reduced by a seeded uniform subsample, recorded
    in the result.
    """
    points = np.asarray(points, dtype=np.float64)
    ids = list(ids)
    n_total = points.shape[0]
    sub_idx = None
    if n_total > max_points:
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(n_total,)))
        sub_idx = np.sort(rng.choice(n_total, size=max_points, replace=False))
        points = points[sub_idx]
        ids = [ids[i] for i in sub_idx]
    n = points.shape[0]
    g = build_knn_graph(points, min(graph_k, n - 1), metric=metric)
    res = resistance_matrix(g, eps_rel)
    dist_full = res.corrected if use_corrected else res.naive
    source = "corrected" if use_corrected else "naive"

    all_pairs: list[PersistencePair] = []
    for comp in g.components():
        if comp.size < 3:
            continue
        block = dist_full[np.ix_(comp, comp)].copy()
        neg = block < 0
        if neg.any():
            worst = float(block.min())
            if worst < -1e-9:
                logger.warning("clamping negative %s resistance %.3e to 0", source, worst)
            block[neg] = 0.0
        local_pairs = rips_persistence_h1(block)
        for p in local_pairs:
            rep = tuple(
                (int(comp[a]), int(comp[b])) for a, b in p.representative
            )
            all_pairs.append(
                PersistencePair(
                    1,
                    p.birth,
                    p.death,
                    tuple(int(comp[v]) for v in p.birth_simplex),
                    tuple(int(comp[v]) for v in p.death_simplex) if p.death_simplex else None,
                    rep,
                )
            )
    holes = [
        dataclasses.replace(
            h, boundary_ids=tuple(boundary_points(h, points, ids, k_b=k_b, alpha=alpha))
        )
        for h in top_holes(all_pairs, source, points, k_top)
    ]
    return HoleDetection(
        holes=holes,
        n_points_used=n,
        n_points_total=n_total,
        subsampled=sub_idx is not None,
        distance_source=source,
        graph_k=min(graph_k, n - 1),
        components=g.n_components,
        n_h1_features=len(all_pairs),
        subsample_indices=sub_idx,
    )
