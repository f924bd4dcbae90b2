"""HTTP query service over an immutable loaded corpus.

Endpoints are pure functions of (index, request): nearest-neighbor queries,
the 2-D PCA map, per-dataset summaries, cached audit reports, and single-sample
metadata. The index is built once at startup and never mutated, so any number
of concurrent readers see identical results.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import __version__
from .corpus import Corpus, OPTIONAL_FIELDS
from .geometry import pca_reduce
from .retrieval import RetrievalQuery, search

DEFAULT_MAP_LIMIT = 50_000
MAX_FILTER_VALUES = 50  # per-field distinct values advertised in the summary


@dataclass(frozen=True)
class AtlasIndex:
    corpus: Corpus
    map2d: np.ndarray  # n x 2 PCA coordinates
    cached_reports: dict[str, dict] = field(default_factory=dict)
    map_method: str = "pca"


def build_index(corpus: Corpus, reports_dir: Optional[str | Path] = None) -> AtlasIndex:
    """Compute map coordinates once and load any cached audit reports."""
    reduced = pca_reduce(corpus.embeddings.values, 2)
    reports: dict[str, dict] = {}
    if reports_dir is not None:
        for path in sorted(Path(reports_dir).glob("*.json")):
            if path.stem == "manifest":
                continue
            reports[path.stem] = json.loads(path.read_text(encoding="utf-8"))
    return AtlasIndex(corpus=corpus, map2d=reduced.values, cached_reports=reports)


class QueryBody(BaseModel):
    vector: Optional[list[float]] = None
    sample_id: Optional[str] = None
    k: int = 10
    filters: Optional[dict[str, list]] = None
    pool: Optional[str] = None  # "all" (default) or a dataset name


def _record_payload(record) -> dict:
    out = {"id": record.id}
    for name in OPTIONAL_FIELDS:
        value = getattr(record, name)
        if value is not None and value != "":
            out[name] = value
    return out


def corpus_summary(index: AtlasIndex) -> dict:
    corpus = index.corpus
    n = len(corpus)
    datasets = {name: int(corpus.dataset_indices(name).size) for name in corpus.datasets()}
    fields: dict[str, dict] = {}
    for name in OPTIONAL_FIELDS:
        values = corpus.field_values(name)
        present = [v for v in values if v is not None and v != ""]
        info: dict = {"coverage": len(present) / n if n else 0.0}
        distinct = sorted({str(v) for v in present})
        if 0 < len(distinct) <= MAX_FILTER_VALUES:
            counts: dict[str, int] = {}
            for v in present:
                counts[str(v)] = counts.get(str(v), 0) + 1
            info["values"] = {k: counts[k] for k in distinct}
        fields[name] = info
    return {"n_samples": n, "datasets": datasets, "fields": fields}


def build_app(index: AtlasIndex) -> FastAPI:
    app = FastAPI(title="embatlas", version=__version__)
    corpus = index.corpus
    summary = corpus_summary(index)  # immutable corpus: compute once

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "version": __version__,
            "n_samples": len(corpus),
            "n_datasets": len(summary["datasets"]),
        }

    @app.get("/corpus/summary")
    def get_summary():
        return summary

    @app.post("/query")
    def post_query(body: QueryBody):
        if (body.vector is None) == (body.sample_id is None):
            raise HTTPException(status_code=400, detail="set exactly one of vector or sample_id")
        if body.k < 1:
            raise HTTPException(status_code=400, detail="k must be >= 1")
        vector = None
        if body.vector is not None:
            vector = np.asarray(body.vector, dtype=np.float64)
            if vector.ndim != 1 or vector.shape[0] != corpus.embeddings.d:
                raise HTTPException(
                    status_code=400,
                    detail=f"vector must have dimension {corpus.embeddings.d}",
                )
            if not np.isfinite(vector).all():
                raise HTTPException(status_code=400, detail="vector entries must be finite numbers")
        filters = {f: set(v) for f, v in (body.filters or {}).items()}
        for f in filters:
            if f not in OPTIONAL_FIELDS:
                raise HTTPException(status_code=400, detail=f"unknown filter field {f!r}")
        k = min(body.k, len(corpus))
        query = RetrievalQuery(
            k=k,
            vector=vector,
            sample_id=body.sample_id,
            filters=filters,
            pool=body.pool or "all",
        )
        try:
            hits = search(corpus, query)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except ValueError as exc:
            if "empty" in str(exc):
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return {
            "k": k,
            "results": [
                {"id": h.id, "distance": h.distance, "metadata": _record_payload(h.record)}
                for h in hits
            ],
        }

    @app.get("/map")
    def get_map(
        fields: str = Query(default=""),
        offset: int = Query(default=0, ge=0),
        limit: int = Query(default=DEFAULT_MAP_LIMIT, ge=1),
    ):
        wanted = [f for f in fields.split(",") if f]
        for f in wanted:
            if f not in OPTIONAL_FIELDS:
                raise HTTPException(status_code=400, detail=f"unknown metadata field {f!r}")
        n = len(corpus)
        stop = min(offset + limit, n)
        points = []
        for i in range(offset, stop):
            row = {
                "id": corpus.records[i].id,
                "x": float(index.map2d[i, 0]),
                "y": float(index.map2d[i, 1]),
            }
            for f in wanted:
                value = getattr(corpus.records[i], f)
                if value is not None:
                    row[f] = value
            points.append(row)
        return {
            "points": points,
            "total": n,
            "offset": offset,
            "limit": limit,
            "method": index.map_method,
        }

    @app.get("/report/{section}")
    def get_report(section: str):
        if section not in index.cached_reports:
            raise HTTPException(status_code=404, detail=f"no cached report for section {section!r}")
        return JSONResponse(content=index.cached_reports[section])

    @app.get("/sample/{sample_id}")
    def get_sample(sample_id: str):
        try:
            i = corpus.index_of(sample_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown sample id {sample_id!r}") from None
        return _record_payload(corpus.records[i])

    return app


def serve(index: AtlasIndex, host: str = "127.0.0.1", port: int = 8700) -> None:
    """Run the service until interrupted; uvicorn handles graceful shutdown on signal."""
    import uvicorn

    uvicorn.run(build_app(index), host=host, port=port, log_level="info")
