from __future__ import annotations

import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from embatlas.corpus import (
    BadMagicError,
    Corpus,
    CorpusError,
    EmbeddingMatrix,
    MetadataError,
    MetadataRecord,
    NonFiniteValueError,
    TruncatedPayloadError,
    VersionMismatchError,
    deduplicate,
    load_corpus,
    load_embeddings,
    load_metadata,
    normalize_rows,
    save_embeddings,
    save_metadata,
)


class TestEmbeddingFile:
    def test_identity_payload(self, tmp_path):
        values = np.array([[1, 0, 0], [0, 1, 0]], dtype=np.float32)
        path = tmp_path / "e.bin"
        save_embeddings(path, values)
        loaded = load_embeddings(path)
        assert loaded.n == 2 and loaded.d == 3
        np.testing.assert_array_equal(loaded.values, values)

    def test_round_trip_bit_exact(self, tmp_path, rng):
        values = rng.normal(size=(100, 16)).astype(np.float32)
        path = tmp_path / "e.bin"
        save_embeddings(path, values)
        loaded = load_embeddings(path)
        assert loaded.values.tobytes() == values.tobytes()

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "e.bin"
        # header declares 5 rows but payload holds 4
        header = struct.pack("<4sIQI", b"SKMB", 1, 5, 3)
        body = np.zeros((4, 3), dtype="<f4").tobytes()
        path.write_bytes(header + body)
        with pytest.raises(TruncatedPayloadError):
            load_embeddings(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "e.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 32)
        with pytest.raises(BadMagicError):
            load_embeddings(path)

    def test_version_mismatch(self, tmp_path):
        path = tmp_path / "e.bin"
        header = struct.pack("<4sIQI", b"SKMB", 9, 1, 1)
        path.write_bytes(header + np.zeros(1, dtype="<f4").tobytes())
        with pytest.raises(VersionMismatchError):
            load_embeddings(path)

    def test_nan_entry_rejected(self, tmp_path):
        path = tmp_path / "e.bin"
        header = struct.pack("<4sIQI", b"SKMB", 1, 1, 2)
        path.write_bytes(header + np.array([[np.nan, 0]], dtype="<f4").tobytes())
        with pytest.raises(NonFiniteValueError):
            load_embeddings(path)

    def test_short_header(self, tmp_path):
        path = tmp_path / "e.bin"
        path.write_bytes(b"SK")
        with pytest.raises(TruncatedPayloadError):
            load_embeddings(path)


class TestMetadata:
    def test_jsonl_round_trip(self, tmp_path):
        records = [
            MetadataRecord(id="a", dataset="d1", year=2020, fst=3, age=41.5),
            MetadataRecord(id="b", dataset="d2", label="x"),
        ]
        path = tmp_path / "m.jsonl"
        save_metadata(path, records)
        assert load_metadata(path) == records

    def test_absent_keys_are_none(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text('{"id": "a", "dataset": "d"}\n')
        (rec,) = load_metadata(path)
        assert rec.year is None and rec.fst is None

    @pytest.mark.parametrize(
        "line",
        [
            '{"id": "a", "fst": 7}',
            '{"id": "a", "age": -1}',
            '{"id": "a", "year": 99}',
            '{"id": ""}',
            '{"dataset": "d"}',
        ],
    )
    def test_invalid_records_rejected(self, tmp_path, line):
        path = tmp_path / "m.jsonl"
        path.write_text(line + "\n")
        with pytest.raises(MetadataError):
            load_metadata(path)


class TestDeduplicate:
    def _records(self, ids):
        return [MetadataRecord(id=i, dataset="d") for i in ids]

    def test_duplicate_id_keeps_first(self, rng):
        m = EmbeddingMatrix(rng.normal(size=(3, 4)).astype(np.float32))
        kept, kept_m, report = deduplicate(self._records(["a", "b", "a"]), m)
        assert [r.id for r in kept] == ["a", "b"]
        assert report.kept == 2 and report.removed == 1
        assert report.removed_ids == [("a", 2)]
        np.testing.assert_array_equal(kept_m.values, m.values[:2])

    def test_all_unique(self, rng):
        m = EmbeddingMatrix(rng.normal(size=(4, 2)).astype(np.float32))
        _, _, report = deduplicate(self._records(list("abcd")), m)
        assert report.removed == 0 and report.kept == 4

    def test_planted_duplicates_counted(self, rng):
        ids = [f"u{i}" for i in range(900)] + [f"u{i}" for i in range(100)]
        m = EmbeddingMatrix(rng.normal(size=(1000, 3)).astype(np.float32))
        kept, _, report = deduplicate(self._records(ids), m)
        assert report.kept == 900 and report.removed == 100
        assert report.kept + report.removed == 1000

    @given(st.lists(st.sampled_from("abcdef"), min_size=1, max_size=30))
    @settings(max_examples=50, deadline=None)
    def test_order_preserved_and_values_untouched(self, ids):
        rng = np.random.default_rng(len(ids))
        m = EmbeddingMatrix(rng.normal(size=(len(ids), 3)).astype(np.float32))
        kept, kept_m, report = deduplicate(self._records(ids), m)
        # first occurrences in original order
        expected = list(dict.fromkeys(ids))
        assert [r.id for r in kept] == expected
        assert report.kept + report.removed == len(ids)
        for row, rec in zip(kept_m.values, kept):
            src = ids.index(rec.id)
            np.testing.assert_array_equal(row, m.values[src])


class TestNormalize:
    def test_three_four_five(self):
        m = EmbeddingMatrix(np.array([[3.0, 4.0]], dtype=np.float32))
        out = normalize_rows(m)
        np.testing.assert_allclose(out.values, [[0.6, 0.8]], atol=1e-6)

    def test_idempotent(self, rng):
        m = EmbeddingMatrix(rng.normal(size=(20, 5)).astype(np.float32))
        once = normalize_rows(m)
        twice = normalize_rows(once)
        np.testing.assert_allclose(once.values, twice.values, atol=1e-6)

    def test_zero_row_names_index(self):
        m = EmbeddingMatrix(np.array([[1.0, 0.0], [0.0, 0.0]], dtype=np.float32))
        with pytest.raises(CorpusError, match="row 1"):
            normalize_rows(m)


class TestCorpusConstruction:
    def test_count_mismatch_rejected(self, rng):
        m = EmbeddingMatrix(rng.normal(size=(3, 2)).astype(np.float32))
        with pytest.raises(CorpusError):
            Corpus(embeddings=m, records=(MetadataRecord(id="a"),))

    def test_id_collision_rejected(self, rng):
        x = rng.normal(size=(2, 2))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        m = EmbeddingMatrix(x.astype(np.float32))
        with pytest.raises(CorpusError):
            Corpus(embeddings=m, records=(MetadataRecord(id="a"), MetadataRecord(id="a")))

    @given(st.integers(2, 12), st.integers(0, 5))
    @settings(max_examples=30, deadline=None)
    def test_fuzzed_collisions_always_raise(self, n, dup_pos):
        rng = np.random.default_rng(n * 7 + dup_pos)
        x = rng.normal(size=(n, 3)).astype(np.float32)
        ids = [f"r{i}" for i in range(n)]
        ids[min(dup_pos, n - 2) + 1] = ids[0]
        with pytest.raises(CorpusError):
            Corpus(
                embeddings=EmbeddingMatrix(x),
                records=tuple(MetadataRecord(id=i) for i in ids),
            )

    def test_load_corpus_end_to_end(self, tmp_path, rng):
        values = rng.normal(size=(5, 4)).astype(np.float32)
        save_embeddings(tmp_path / "e.bin", values)
        records = [MetadataRecord(id=f"r{i}", dataset="d", year=2020) for i in range(4)]
        records.append(MetadataRecord(id="r0", dataset="d"))  # duplicate of row 0
        save_metadata(tmp_path / "m.jsonl", records)
        corpus, report = load_corpus(tmp_path / "e.bin", tmp_path / "m.jsonl")
        assert len(corpus) == 4
        assert report.removed_ids == [("r0", 4)]
        np.testing.assert_allclose(np.linalg.norm(corpus.embeddings.values, axis=1), 1.0, atol=1e-6)
