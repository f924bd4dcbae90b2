from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from embatlas.corpus import Corpus, EmbeddingMatrix, MetadataRecord


def unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    x = rng.normal(size=(n, d))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def make_corpus(vectors: np.ndarray, **field_lists) -> Corpus:
    """Corpus from raw unit rows plus parallel per-field value lists."""
    n = vectors.shape[0]
    records = []
    for i in range(n):
        kwargs = {"id": field_lists.get("ids", [f"s{j:05d}" for j in range(n)])[i]}
        for name, values in field_lists.items():
            if name == "ids":
                continue
            kwargs[name] = values[i]
        kwargs.setdefault("dataset", "main")
        records.append(MetadataRecord(**kwargs))
    return Corpus(
        embeddings=EmbeddingMatrix(vectors.astype(np.float32)),
        records=tuple(records),
        normalized=True,
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240813)
