"""Deterministic synthetic corpora for tests, demos, and the bundled CLI fixtures.

Geometry lives on the unit sphere so load-time row normalization is the
identity: clusters are von Mises-Fisher-style blobs around axis directions,
and ring fixtures are genuine circles of the sphere (the hole-detection
target). Every generator is a pure function of its seed.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .corpus import MetadataRecord, save_embeddings, save_metadata

AUDIT_DIM = 32


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def sphere_cluster(rng: np.random.Generator, center: np.ndarray, spread: float, n: int) -> np.ndarray:
    """n unit rows scattered around a unit center direction."""
    noise = rng.normal(0.0, spread, size=(n, center.shape[0]))
    return _unit(center[None, :] + noise)


def sphere_ring(
    rng: np.random.Generator,
    n: int,
    d: int,
    axis: int = 0,
    plane: tuple[int, int] = (1, 2),
    angular_radius: float = 0.9,
    jitter: float = 0.03,
) -> np.ndarray:
    """n unit rows on a circle of the sphere around a basis axis, with angular jitter."""
    theta = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    theta = theta + rng.normal(0.0, jitter, size=n)
    rho = angular_radius + rng.normal(0.0, jitter, size=n)
    points = np.zeros((n, d))
    points[:, axis] = np.cos(rho)
    points[:, plane[0]] = np.sin(rho) * np.cos(theta)
    points[:, plane[1]] = np.sin(rho) * np.sin(theta)
    return _unit(points)


def _axis(d: int, i: int) -> np.ndarray:
    v = np.zeros(d)
    v[i] = 1.0
    return v


def make_audit_corpus(seed: int = 42) -> tuple[np.ndarray, list[MetadataRecord]]:
    """The bundled multi-dataset, multi-year fixture exercising every audit section.

    Narrative: 2018/2019 "coast" releases sample one region twice (saturation),
    2020 "ridge" opens a distant region and carries orphan codes, 2021 "ring"
    is an annulus (a real topological hole), "probe2019" plants a linear
    skin-type/age signal for imputation, and 40 trailing rows repeat coast2018
    ids to exercise deduplication.
    """
    d = AUDIT_DIM
    rng = np.random.default_rng(seed)
    blocks: list[np.ndarray] = []
    records: list[MetadataRecord] = []

    def add(dataset: str, vectors: np.ndarray, make_record) -> None:
        blocks.append(vectors)
        for i in range(vectors.shape[0]):
            records.append(make_record(f"{dataset}-{i:04d}", i))

    coast_labels = ("nevus", "melanoma", "basal cell carcinoma")
    coast_icd = ("D22.9", "C43.9", "C44.91")
    regions = ("trunk", "head", "arm", "leg")

    def coast_record(year: int):
        def build(rid: str, i: int) -> MetadataRecord:
            return MetadataRecord(
                id=rid,
                dataset=f"coast{year}",
                year=year,
                label=coast_labels[i % 3],
                icd=coast_icd[i % 3],
                fst=(i % 4) + 1 if i % 5 != 0 else None,
                age=float(np.clip(rng.normal(55, 15), 0, 95)) if i % 10 != 9 else None,
                gender=("male", "female")[i % 2] if i % 7 != 6 else None,
                origin=("europe", "north_america")[i % 2],
                body_region=regions[i % 4],
                modality="dermoscopy",
            )

        return build

    coast2018 = sphere_cluster(rng, _unit(_axis(d, 0) * 3.0 + _axis(d, 5)), 0.18, 170)
    add("coast2018", coast2018, coast_record(2018))
    add("coast2019", sphere_cluster(rng, _unit(_axis(d, 0) * 3.0 + _axis(d, 5)), 0.18, 140), coast_record(2019))

    ridge_labels = ("psoriasis", "eczema", "tinea corporis")
    ridge_icd = ("L40.0", "L20.9", "B35.4")
    orphan_icd = ("B09", "A64")

    def ridge_record(dataset: str):
        def build(rid: str, i: int) -> MetadataRecord:
            return MetadataRecord(
                id=rid,
                dataset=dataset,
                year=2020,
                label=ridge_labels[i % 3],
                icd=orphan_icd[i % 2] if i % 11 == 10 else ridge_icd[i % 3],
                fst=(i % 4) + 3 if i % 6 != 0 else None,
                age=float(np.clip(rng.normal(35, 12), 0, 95)),
                gender=("female", "male")[i % 2],
                origin=("asia", "africa")[i % 2],
                body_region=("hand", "scalp", "foot")[i % 3],
                modality="clinical",
            )

        return build

    ridge = sphere_cluster(rng, _axis(d, 1), 0.15, 110)
    add("ridge2020", ridge, ridge_record("ridge2020"))
    # near-duplicates of the first 60 ridge samples under a different dataset:
    # the atlas-wide retrieval pool gains same-label neighbors
    echo = _unit(ridge[:60] + rng.normal(0.0, 1e-3, size=(60, d)))
    add("ridge2020echo", echo, ridge_record("ridge2020echo"))

    ring = sphere_ring(rng, 100, d, axis=2, plane=(3, 4), angular_radius=0.9, jitter=0.03)
    add(
        "ring2021",
        ring,
        lambda rid, i: MetadataRecord(
            id=rid,
            dataset="ring2021",
            year=2021,
            label=("onychodystrophy", "nail psoriasis")[i % 2],
            icd="L60.3",
            fst=(i % 6) + 1,
            age=float(np.clip(rng.normal(45, 18), 0, 95)),
            gender=("male", "female")[i % 2],
            origin="south_america",
            body_region="nail",
            modality="clinical",
        ),
    )

    # planted linear signal: skin type shifts the e4 coordinate, age tracks it
    probe_vectors = np.empty((120, d))
    probe_records: list[MetadataRecord] = []
    for i in range(120):
        fst = (i % 6) + 1
        center = _unit(_axis(d, 3) * 2.0 + _axis(d, 4) * (fst - 3.5) * 0.8)
        probe_vectors[i] = sphere_cluster(rng, center, 0.1, 1)[0]
        probe_records.append(
            MetadataRecord(
                id=f"probe2019-{i:04d}",
                dataset="probe2019",
                year=2019,
                label="healthy skin",
                fst=fst if i % 3 != 2 else None,
                age=float(np.clip(20 + 10 * (fst - 1) + rng.normal(0, 2), 0, 95)) if i % 3 != 1 else None,
                gender=("male", "female")[i % 2] if i % 4 != 3 else None,
                origin="europe",
                body_region="trunk",
                modality="clinical",
            )
        )
    blocks.append(probe_vectors)
    records.extend(probe_records)

    # trailing duplicates: repeat 40 coast2018 rows verbatim (same ids)
    dup_idx = np.arange(0, 80, 2)
    blocks.append(coast2018[dup_idx])
    records.extend(MetadataRecord(id=f"coast2018-{i:04d}", dataset="coast2018", year=2018) for i in dup_idx)

    values = np.vstack(blocks).astype(np.float32)
    return values, records


def make_circle_corpus(seed: int = 7, n: int = 30) -> tuple[np.ndarray, list[MetadataRecord]]:
    """The hole-detection fixture: n points on a circle of the 2-sphere."""
    rng = np.random.default_rng(seed)
    points = sphere_ring(rng, n, 3, axis=0, plane=(1, 2), angular_radius=1.0, jitter=0.01)
    records = [
        MetadataRecord(
            id=f"circle-{i:04d}",
            dataset="circle",
            year=2020,
            label="ring",
            body_region="nail",
        )
        for i in range(n)
    ]
    return points.astype(np.float32), records


AUDIT_CONFIG = {
    "seed": 42,
    "k_novelty": 10,
    "B": 200,
    "alpha": 0.05,
    "pca_similarity": 16,
    "pca_density": 8,
    "gmm_K": 8,
    "graph_k": 6,
    "k_b": 15,
    "boundary_alpha": 1.5,
    "k_top_holes": 3,
    "holes_dataset": "ring2021",
    "holes_max_points": 2000,
    "retrieval_k": [1, 5, 10],
    "eval_dataset": "ridge2020",
    "eval_label_field": "label",
    "impute_fields": ["fst", "age", "gender"],
    "coverage_stratify": "fst_group",
    "baseline": {
        "field": "fst",
        "source_note": "example visit-prevalence mixture; V-VI share from global statistics, remainder split illustratively",
        "bins": [
            {"name": "I-II", "values": [1, 2]},
            {"name": "III-IV", "values": [3, 4]},
            {"name": "V-VI", "values": [5, 6]},
        ],
        "baseline_fractions": [0.159, 0.403, 0.438],
    },
}

CIRCLE_CONFIG = {
    "seed": 42,
    "graph_k": 3,
    "k_b": 5,
    "boundary_alpha": 1.5,
    "k_top_holes": 1,
    "holes_max_points": 2000,
}


def write_fixture(kind: str, out_dir: str | Path, seed: int = 42) -> dict:
    """Write embeddings.bin + metadata.jsonl + config.json for a named fixture."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if kind == "audit":
        values, records = make_audit_corpus(seed)
        config = dict(AUDIT_CONFIG, seed=seed)
    elif kind == "circle":
        values, records = make_circle_corpus(seed=7)
        config = dict(CIRCLE_CONFIG, seed=seed)
    else:
        raise ValueError(f"unknown fixture kind {kind!r}; available: audit, circle")
    save_embeddings(out / "embeddings.bin", values)
    save_metadata(out / "metadata.jsonl", records)
    config["embeddings_path"] = "embeddings.bin"
    config["metadata_path"] = "metadata.jsonl"
    (out / "config.json").write_text(json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return config
