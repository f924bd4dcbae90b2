from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from embatlas.cli import main
from embatlas.corpus import MetadataRecord, save_embeddings, save_metadata

from conftest import unit_rows


def write_mini_corpus(tmp_path: Path, rng) -> Path:
    """Two-year, two-dataset corpus small enough for every subcommand."""
    a = unit_rows(rng, 30, 6)
    b = unit_rows(rng, 20, 6)
    vectors = np.vstack([a, b]).astype(np.float32)
    records = []
    for i in range(30):
        records.append(
            MetadataRecord(
                id=f"a{i:03d}", dataset="alpha", year=2019, label=("x", "y")[i % 2],
                icd=("C43.9", "D22.9")[i % 2], fst=(i % 4) + 1, age=float(30 + i % 40),
                gender=("male", "female")[i % 2],
            )
        )
    for i in range(20):
        records.append(
            MetadataRecord(
                id=f"b{i:03d}", dataset="beta", year=2020, label=("x", "y")[i % 2],
                icd="L40.0", fst=(i % 3) + 2 if i % 4 else None, age=float(20 + i),
                gender=("male", "female")[i % 2],
            )
        )
    save_embeddings(tmp_path / "e.bin", vectors)
    save_metadata(tmp_path / "m.jsonl", records)
    config = {
        "embeddings_path": "e.bin",
        "metadata_path": "m.jsonl",
        "seed": 7,
        "k_novelty": 3,
        "B": 25,
        "pca_similarity": 4,
        "pca_density": 3,
        "gmm_K": 2,
        "graph_k": 4,
        "k_b": 3,
        "k_top_holes": 2,
        "holes_max_points": 50,
        "retrieval_k": [1, 3],
        "eval_dataset": "beta",
        "impute_fields": ["fst"],
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    return path


class TestSubcommands:
    def test_ingest_reports_counts(self, tmp_path, rng, capsys):
        config = write_mini_corpus(tmp_path, rng)
        assert main(["ingest", "--config", str(config), "--out-dir", str(tmp_path / "out")]) == 0
        doc = json.loads((tmp_path / "out" / "corpus.json").read_text())
        assert doc["raw_count"] == 50 and doc["kept"] == 50
        assert doc["datasets"] == {"alpha": 30, "beta": 20}

    def test_novelty_two_year_fixture_single_entry(self, tmp_path, rng):
        config = write_mini_corpus(tmp_path, rng)
        assert main(["novelty", "--config", str(config), "--out-dir", str(tmp_path / "out")]) == 0
        doc = json.loads((tmp_path / "out" / "novelty.json").read_text())
        assert len(doc["series"]) == 1
        assert doc["series"][0]["year"] == 2020
        assert (tmp_path / "out" / "novelty.csv").exists()

    def test_all_sections_run(self, tmp_path, rng):
        config = write_mini_corpus(tmp_path, rng)
        out = tmp_path / "out"
        for command in ("similarity", "density", "impute", "retrieve-eval"):
            assert main([command, "--config", str(config), "--out-dir", str(out)]) == 0
        assert (out / "similarity.json").exists()
        assert (out / "density.json").exists()
        assert (out / "probes.json").exists()
        assert (out / "imputed_metadata.jsonl").exists()
        assert (out / "retrieval.json").exists()

    def test_inputs_never_mutated(self, tmp_path, rng):
        config = write_mini_corpus(tmp_path, rng)
        before = (tmp_path / "e.bin").read_bytes(), (tmp_path / "m.jsonl").read_bytes()
        main(["audit-all", "--config", str(config), "--out-dir", str(tmp_path / "out")])
        after = (tmp_path / "e.bin").read_bytes(), (tmp_path / "m.jsonl").read_bytes()
        assert before == after

    def test_flags_override_config(self, tmp_path, rng):
        config = write_mini_corpus(tmp_path, rng)
        out = tmp_path / "out"
        assert main(["novelty", "--config", str(config), "--out-dir", str(out), "--k-novelty", "5"]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["parameters"]["k_novelty"] == 5


class TestExitCodes:
    def test_usage_error_on_bad_flag_value(self, tmp_path, rng, capsys):
        config = write_mini_corpus(tmp_path, rng)
        code = main(["novelty", "--config", str(config), "--alpha", "0.9"])
        assert code == 1
        err = capsys.readouterr().err
        assert json.loads(err.strip().splitlines()[-1])["error"] == "usage"

    def test_usage_error_on_unknown_flag(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["novelty", "--no-such-flag"])
        assert excinfo.value.code == 1

    def test_input_error_on_missing_file(self, tmp_path, capsys):
        code = main(
            [
                "ingest",
                "--embeddings-path", str(tmp_path / "missing.bin"),
                "--metadata-path", str(tmp_path / "missing.jsonl"),
                "--out-dir", str(tmp_path / "out"),
            ]
        )
        assert code == 2
        assert "missing.bin" in capsys.readouterr().err

    def test_input_error_on_corrupt_embeddings(self, tmp_path, rng, capsys):
        config = write_mini_corpus(tmp_path, rng)
        (tmp_path / "e.bin").write_bytes(b"JUNKJUNKJUNKJUNKJUNKJUNK")
        assert main(["ingest", "--config", str(config), "--out-dir", str(tmp_path / "out")]) == 2

    def test_compute_error_on_impossible_request(self, tmp_path, rng, capsys):
        config = write_mini_corpus(tmp_path, rng)
        code = main(
            ["retrieve-eval", "--config", str(config), "--out-dir", str(tmp_path / "out"),
             "--eval-dataset", "nonexistent"]
        )
        assert code == 3
        message = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert "nonexistent" in message["message"]


class TestBundledFixtures:
    def test_circle_holes_match_committed_golden(self, tmp_path):
        fixture_dir = tmp_path / "circle"
        out = tmp_path / "out"
        assert main(["make-fixture", "circle", str(fixture_dir)]) == 0
        assert main(["holes", "--config", str(fixture_dir / "config.json"), "--out-dir", str(out)]) == 0
        doc = json.loads((out / "holes.json").read_text())
        golden = json.loads((Path(__file__).parent / "data" / "circle_golden.json").read_text())
        assert doc["holes"], "circle fixture must yield a hole"
        top = doc["holes"][0]["persistence"]
        assert abs(top - golden["top_persistence"]) <= 0.05 * golden["top_persistence"]
        assert doc["n_h1_features"] == golden["n_h1_features"]

    def test_audit_fixture_deterministic(self, tmp_path):
        fixture_dir = tmp_path / "audit"
        assert main(["make-fixture", "audit", str(fixture_dir), "--seed", "42"]) == 0
        assert main(["make-fixture", "audit", str(tmp_path / "audit2"), "--seed", "42"]) == 0
        assert (fixture_dir / "embeddings.bin").read_bytes() == (tmp_path / "audit2" / "embeddings.bin").read_bytes()
        assert (fixture_dir / "metadata.jsonl").read_bytes() == (tmp_path / "audit2" / "metadata.jsonl").read_bytes()
