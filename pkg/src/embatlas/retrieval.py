"""Nearest-neighbor case retrieval with metadata filters, and retrieval-quality metrics.

Search ranks the filtered pool by cosine distance with a deterministic
tie-break on sample id; evaluation replays every labeled sample of a dataset
as a query and reports precision/recall/AP at k for same-dataset and
atlas-wide pools.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .corpus import Corpus, MetadataRecord

POOL_ALL = "all"


@dataclass(frozen=True)
class RetrievalQuery:
    k: int
    vector: Optional[np.ndarray] = None
    sample_id: Optional[str] = None
    filters: dict[str, set] = field(default_factory=dict)
    pool: Union[str, set[str]] = POOL_ALL  # "all", a dataset name, or an explicit id set

    def __post_init__(self):
        if (self.vector is None) == (self.sample_id is None):
            raise ValueError("set exactly one of vector or sample_id")
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass(frozen=True)
class RetrievalHit:
    id: str
    distance: float
    record: MetadataRecord


@dataclass(frozen=True)
class QueryMetrics:
    precision: float
    recall: Optional[float]  # None when the pool holds no relevant items
    recall_capped: Optional[float]  # hits / min(R, k)
    ap: Optional[float]


@dataclass(frozen=True)
class RetrievalEvalReport:
    dataset: str
    mode: str  # "same-dataset" | "atlas"
    k: int
    label_field: str
    n_queries: int
    n_no_relevant: int  # queries with no same-label candidate in the pool, excluded from means
    precision_at_k: float
    recall_at_k: float
    recall_capped_at_k: float
    ap_at_k: float


def _pool_indices(corpus: Corpus, query: RetrievalQuery) -> np.ndarray:
    if isinstance(query.pool, str) and query.pool != POOL_ALL:
        idx = corpus.dataset_indices(query.pool)
        if idx.size == 0:
            raise ValueError(f"pool dataset {query.pool!r} is empty or unknown")
    elif isinstance(query.pool, str):
        idx = np.arange(len(corpus))
    else:
        wanted = set(query.pool)
        idx = np.array([i for i, r in enumerate(corpus.records) if r.id in wanted], dtype=int)
    if query.filters:
        # values match on their string form: clients discover filterable values
        # through JSON summaries, where every value is a string key
        wanted = {f: {str(a) for a in allowed} for f, allowed in query.filters.items()}
        keep = []
        for i in idx:
            r = corpus.records[int(i)]
            values = ((getattr(r, f), allowed) for f, allowed in wanted.items())
            if all(v is not None and str(v) in allowed for v, allowed in values):
                keep.append(int(i))
        idx = np.array(keep, dtype=int)
    return idx


def search(corpus: Corpus, query: RetrievalQuery) -> list[RetrievalHit]:
    """Top-k by cosine distance over the filtered pool; the query sample never returns itself."""
    if query.sample_id is not None:
        try:
            self_idx = corpus.index_of(query.sample_id)
        except KeyError:
            raise KeyError(f"unknown sample id {query.sample_id!r}") from None
        vector = corpus.embeddings.values[self_idx].astype(np.float64)
    else:
        self_idx = -1
        vector = np.asarray(query.vector, dtype=np.float64)
        if vector.shape != (corpus.embeddings.d,):
            raise ValueError(
                f"query vector has dimension {vector.shape}, corpus expects ({corpus.embeddings.d},)"
            )
        norm = np.linalg.norm(vector)
        if norm == 0:
            raise ValueError("query vector must be non-zero")
        vector = vector / norm

    idx = _pool_indices(corpus, query)
    idx = idx[idx != self_idx]
    if idx.size == 0:
        detail = f" under filters {sorted(query.filters)}" if query.filters else ""
        raise ValueError(f"filtered pool is empty{detail}")
    pool = corpus.embeddings.values[idx].astype(np.float64)
    dist = 1.0 - pool @ vector
    ids = [corpus.records[int(i)].id for i in idx]
    order = sorted(range(idx.size), key=lambda r: (dist[r], ids[r]))[: query.k]
    return [
        RetrievalHit(id=ids[r], distance=float(dist[r]), record=corpus.records[int(idx[r])])
        for r in order
    ]


def retrieval_metrics(ranked_labels: Sequence[bool], R: int, k: int) -> QueryMetrics:
    """precision@k, recall@k = hits/R, and AP@k normalized by min(R, k).

    recall and AP are None when R = 0 (no relevant candidates exist); that
    case is reported separately by the evaluator, never averaged as 0.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if R < 0:
        raise ValueError("R must be >= 0")
    top = list(ranked_labels)[:k]
    hits = sum(1 for rel in top if rel)
    precision = hits / k
    if R == 0:
        return QueryMetrics(precision=precision, recall=None, recall_capped=None, ap=None)
    running = 0
    ap_sum = 0.0
    for rank, rel in enumerate(top, start=1):
        if rel:
            running += 1
            ap_sum += running / rank
    return QueryMetrics(
        precision=precision,
        recall=hits / R,
        recall_capped=hits / min(R, k),
        ap=ap_sum / min(R, k),
    )


def eval_retrieval(
    corpus: Corpus,
    eval_dataset: str,
    label_field: str = "label",
    mode: str = "atlas",
    k: int = 10,
) -> RetrievalEvalReport:
    """Replay every labeled sample of a dataset as a query; relevance = same label value."""
    if mode not in ("same-dataset", "atlas"):
        raise ValueError(f"mode must be 'same-dataset' or 'atlas', got {mode!r}")
    eval_idx = corpus.dataset_indices(eval_dataset)
    if eval_idx.size == 0:
        raise ValueError(f"dataset {eval_dataset!r} not present in corpus")
    labels = corpus.field_values(label_field)
    queries = [int(i) for i in eval_idx if labels[int(i)] is not None]
    if not queries:
        raise ValueError(f"no samples in {eval_dataset!r} carry {label_field!r}")

    pool: Union[str, set[str]] = eval_dataset if mode == "same-dataset" else POOL_ALL
    per_query: list[QueryMetrics] = []
    n_no_relevant = 0
    for qi in queries:
        label = labels[qi]
        query = RetrievalQuery(k=k, sample_id=corpus.records[qi].id, pool=pool)
        pool_idx = _pool_indices(corpus, query)
        pool_idx = pool_idx[pool_idx != qi]
        R = sum(1 for i in pool_idx if labels[int(i)] == label)
        hits = search(corpus, query)
        ranked = [labels[corpus.index_of(h.id)] == label for h in hits]
        metrics = retrieval_metrics(ranked, R, k)
        if metrics.recall is None:
            n_no_relevant += 1
        else:
            per_query.append(metrics)
    if per_query:
        precision = float(np.mean([m.precision for m in per_query]))
        recall = float(np.mean([m.recall for m in per_query]))
        recall_capped = float(np.mean([m.recall_capped for m in per_query]))
        ap = float(np.mean([m.ap for m in per_query]))
    else:
        precision = recall = recall_capped = ap = 0.0
    return RetrievalEvalReport(
        dataset=eval_dataset,
        mode=mode,
        k=k,
        label_field=label_field,
        n_queries=len(per_query),
        n_no_relevant=n_no_relevant,
        precision_at_k=precision,
        recall_at_k=recall,
        recall_capped_at_k=recall_capped,
        ap_at_k=ap,
    )
