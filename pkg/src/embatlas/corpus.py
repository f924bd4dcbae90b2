"""Corpus loading: embedding matrices, aligned metadata, deduplication, row normalization.

The on-disk contract is a little-endian binary embedding file (magic ``SKMB``,
u32 version, u64 row count, u32 dimension, float32 row-major payload) plus a
JSON Lines metadata file whose i-th line describes embedding row i. Everything
downstream consumes the immutable :class:`Corpus` built here.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

MAGIC = b"SKMB"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIQI")  # magic, version, n, d

UNIT_NORM_TOL = 1e-6


class CorpusError(ValueError):
    """Base class for corpus construction and I/O failures."""


class BadMagicError(CorpusError):
    pass


class VersionMismatchError(CorpusError):
    pass


class TruncatedPayloadError(CorpusError):
    pass


class NonFiniteValueError(CorpusError):
    pass


class MetadataError(CorpusError):
    pass


@dataclass(frozen=True)
class EmbeddingMatrix:
    """An n x d float32 matrix of embedding vectors, one sample per row."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise CorpusError(f"embedding matrix must be 2-d and non-empty, got shape {v.shape}")
        if not np.isfinite(v).all():
            bad = int(np.argwhere(~np.isfinite(v))[0][0])
            raise NonFiniteValueError(f"non-finite embedding value in row {bad}")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


# Metadata fields that may appear in a JSONL record besides the mandatory id.
OPTIONAL_FIELDS = (
    "dataset",
    "year",
    "label",
    "icd",
    "fst",
    "age",
    "gender",
    "origin",
    "body_region",
    "modality",
)


@dataclass(frozen=True)
class MetadataRecord:
    """Sparse per-sample metadata; ``None`` marks an absent value, never a sentinel."""

    id: str
    dataset: str = ""
    year: Optional[int] = None
    label: Optional[str] = None
    icd: Optional[str] = None
    fst: Optional[int] = None
    age: Optional[float] = None
    gender: Optional[str] = None
    origin: Optional[str] = None
    body_region: Optional[str] = None
    modality: Optional[str] = None

    def __post_init__(self):
        if not self.id:
            raise MetadataError("record id must be non-empty")
        if self.fst is not None and self.fst not in (1, 2, 3, 4, 5, 6):
            raise MetadataError(f"record {self.id!r}: fst must be in 1..6, got {self.fst}")
        if self.age is not None and self.age < 0:
            raise MetadataError(f"record {self.id!r}: age must be >= 0, got {self.age}")
        if self.year is not None and not (1000 <= self.year <= 9999):
            raise MetadataError(f"record {self.id!r}: year must be a 4-digit year, got {self.year}")


@dataclass(frozen=True)
class DedupReport:
    kept: int
    removed: int
    removed_ids: list[tuple[str, int]] = field(default_factory=list)
    # removed_ids holds (id, row index of the removed duplicate) in pre-dedup order.


@dataclass(frozen=True)
class Corpus:
    """Aligned embeddings and metadata with unique ids; immutable after construction."""

    embeddings: EmbeddingMatrix
    records: tuple[MetadataRecord, ...]
    normalized: bool = False

    def __post_init__(self):
        records = tuple(self.records)
        object.__setattr__(self, "records", records)
        if len(records) != self.embeddings.n:
            raise CorpusError(
                f"record count {len(records)} != embedding row count {self.embeddings.n}"
            )
        seen: set[str] = set()
        for r in records:
            if r.id in seen:
                raise CorpusError(f"duplicate record id {r.id!r}; deduplicate before construction")
            seen.add(r.id)
        if self.normalized:
            norms = np.linalg.norm(self.embeddings.values, axis=1)
            if not np.allclose(norms, 1.0, atol=UNIT_NORM_TOL):
                bad = int(np.argmax(np.abs(norms - 1.0)))
                raise CorpusError(f"normalized corpus has non-unit row {bad} (norm {norms[bad]})")

    def __len__(self) -> int:
        return self.embeddings.n

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    def index_of(self, sample_id: str) -> int:
        try:
            return self._id_index[sample_id]
        except AttributeError:
            object.__setattr__(self, "_id_index", {r.id: i for i, r in enumerate(self.records)})
            return self._id_index[sample_id]

    def datasets(self) -> list[str]:
        out: list[str] = []
        for r in self.records:
            if r.dataset not in out:
                out.append(r.dataset)
        return out

    def dataset_indices(self, dataset: str) -> np.ndarray:
        return np.array([i for i, r in enumerate(self.records) if r.dataset == dataset], dtype=int)

    def field_values(self, field_name: str) -> list:
        if field_name not in ("id",) + OPTIONAL_FIELDS:
            raise MetadataError(
                f"unknown metadata field {field_name!r}; valid fields: "
                + ", ".join(("id",) + OPTIONAL_FIELDS)
            )
        return [getattr(r, field_name) for r in self.records]


def save_embeddings(path: str | Path, values: np.ndarray) -> None:
    """Write an embedding matrix in the binary wire format (bit-exact round-trip)."""
    m = EmbeddingMatrix(np.asarray(values, dtype=np.float32))
    payload = np.ascontiguousarray(m.values, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, FORMAT_VERSION, m.n, m.d))
        fh.write(payload)


def load_embeddings(path: str | Path) -> EmbeddingMatrix:
    """Load an embedding file, validating magic, version, and payload size."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise TruncatedPayloadError(f"{path}: file shorter than header ({len(raw)} bytes)")
    magic, version, n, d = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"{path}: unsupported version {version}, expected {FORMAT_VERSION}")
    expected = n * d * 4
    body = raw[_HEADER.size:]
    if len(body) != expected:
        raise TruncatedPayloadError(
            f"{path}: header declares {n}x{d} ({expected} bytes) but payload holds {len(body)} bytes"
        )
    values = np.frombuffer(body, dtype="<f4").reshape(n, d)
    return EmbeddingMatrix(values.copy())


def load_metadata(path: str | Path) -> list[MetadataRecord]:
    """Parse a JSON Lines metadata file, one record per embedding row."""
    records: list[MetadataRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MetadataError(f"{path}:{lineno}: invalid JSON ({exc})") from exc
            if not isinstance(obj, dict) or "id" not in obj:
                raise MetadataError(f"{path}:{lineno}: each line must be an object with an 'id'")
            known = {k: v for k, v in obj.items() if k == "id" or k in OPTIONAL_FIELDS}
            try:
                records.append(MetadataRecord(**known))
            except MetadataError as exc:
                raise MetadataError(f"{path}:{lineno}: {exc}") from exc
    return records


def save_metadata(path: str | Path, records: Iterable[MetadataRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            obj = {"id": r.id}
            for name in OPTIONAL_FIELDS:
                value = getattr(r, name)
                if value is not None and value != "":
                    obj[name] = value
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def deduplicate(
    records: Sequence[MetadataRecord], embeddings: EmbeddingMatrix
) -> tuple[list[MetadataRecord], EmbeddingMatrix, DedupReport]:
    """Drop repeated ids, keeping the first occurrence in file order.

    Rows are removed from the embedding matrix in lockstep; relative order of
    survivors is preserved and their values are untouched.
    """
    if len(records) != embeddings.n:
        raise CorpusError(f"records ({len(records)}) and embeddings ({embeddings.n}) misaligned")
    seen: set[str] = set()
    keep_idx: list[int] = []
    removed: list[tuple[str, int]] = []
    for i, r in enumerate(records):
        if r.id in seen:
            removed.append((r.id, i))
        else:
            seen.add(r.id)
            keep_idx.append(i)
    # The first row is always kept, so keep_idx is non-empty whenever records is.
    kept_records = [records[i] for i in keep_idx]
    kept_values = embeddings.values[np.array(keep_idx, dtype=int)]
    report = DedupReport(kept=len(keep_idx), removed=len(removed), removed_ids=removed)
    return kept_records, EmbeddingMatrix(kept_values), report


def normalize_rows(m: EmbeddingMatrix) -> EmbeddingMatrix:
    """Scale every row to unit Euclidean norm; errors on an all-zero row."""
    norms = np.linalg.norm(m.values.astype(np.float64), axis=1)
    zero = np.nonzero(norms == 0.0)[0]
    if zero.size:
        raise CorpusError(f"cannot normalize zero-norm row {int(zero[0])}")
    return EmbeddingMatrix((m.values.astype(np.float64) / norms[:, None]).astype(np.float32))


def load_corpus(
    embeddings_path: str | Path,
    metadata_path: str | Path,
    normalize: bool = True,
) -> tuple[Corpus, DedupReport]:
    """Load, align, deduplicate, and (optionally) row-normalize a corpus."""
    matrix = load_embeddings(embeddings_path)
    records = load_metadata(metadata_path)
    if len(records) != matrix.n:
        raise CorpusError(
            f"metadata rows ({len(records)}) do not match embedding rows ({matrix.n})"
        )
    kept_records, kept_matrix, report = deduplicate(records, matrix)
    if normalize:
        kept_matrix = normalize_rows(kept_matrix)
    corpus = Corpus(embeddings=kept_matrix, records=tuple(kept_records), normalized=normalize)
    return corpus, report


def with_records(corpus: Corpus, records: Sequence[MetadataRecord]) -> Corpus:
    """Same embeddings, replaced metadata (used by imputation); revalidates alignment."""
    return Corpus(embeddings=corpus.embeddings, records=tuple(records), normalized=corpus.normalized)
