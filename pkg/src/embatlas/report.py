"""Report aggregation: demographic baseline comparison and deterministic emission.

Every section is written as canonical JSON (sorted keys, fixed separators, one
trailing newline) so identical inputs and seed produce byte-identical files;
the manifest records tool version, seed, parameters, and SHA-256 digests of
inputs and emitted sections. CSV mirrors round percentages to one decimal,
JSON keeps full precision.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .corpus import MetadataRecord

OTHER_BIN = "other"

SCHEMA_SECTIONS = (
    "corpus",
    "density",
    "divergence",
    "holes",
    "manifest",
    "novelty",
    "probes",
    "retrieval",
    "similarity",
)


def load_schema(section: str) -> dict:
    """Checked-in JSON Schema for a report section; every emitted file validates."""
    if section not in SCHEMA_SECTIONS:
        raise ValueError(f"no schema for section {section!r}; known: {SCHEMA_SECTIONS}")
    text = resources.files("embatlas.schemas").joinpath(f"{section}.json").read_text("utf-8")
    return json.loads(text)


@dataclass(frozen=True)
class BaselineBin:
    name: str
    values: Optional[list] = None  # categorical membership
    lo: Optional[float] = None  # numeric range, inclusive
    hi: Optional[float] = None

    def matches(self, value) -> bool:
        if self.values is not None:
            return value in self.values
        if self.lo is not None or self.hi is not None:
            try:
                x = float(value)
            except (TypeError, ValueError):
                return False
            return (self.lo is None or x >= self.lo) and (self.hi is None or x <= self.hi)
        return str(value) == self.name


@dataclass(frozen=True)
class BaselineConfig:
    field: str
    bins: list[BaselineBin]
    baseline_fractions: list[float]
    source_note: str = ""

    def __post_init__(self):
        if len(self.bins) != len(self.baseline_fractions):
            raise ValueError("bins and baseline_fractions must align")
        total = float(sum(self.baseline_fractions))
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"baseline fractions must sum to 1, got {total}")


@dataclass(frozen=True)
class DivergenceRow:
    bin: str
    corpus_fraction: float
    baseline_fraction: float

    @property
    def delta_pp(self) -> float:
        return 100.0 * (self.corpus_fraction - self.baseline_fraction)


def baseline_config_from_dict(obj: dict) -> BaselineConfig:
    bins = [
        BaselineBin(
            name=b["name"],
            values=b.get("values"),
            lo=b.get("lo"),
            hi=b.get("hi"),
        )
        for b in obj["bins"]
    ]
    return BaselineConfig(
        field=obj["field"],
        bins=bins,
        baseline_fractions=[float(x) for x in obj["baseline_fractions"]],
        source_note=obj.get("source_note", ""),
    )


def compare_to_baseline(
    records: Sequence[MetadataRecord], config: BaselineConfig
) -> list[DivergenceRow]:
    """Corpus fractions over the config bins vs the external baseline, in percentage points.

    Values matching no bin land in an "other" row (baseline fraction 0); rows
    always sum to 1 over the records where the field is present.
    """
    values = [getattr(r, config.field) for r in records]
    present = [v for v in values if v is not None]
    if not present:
        raise ValueError(f"field {config.field!r} is absent on every record")
    counts = {b.name: 0 for b in config.bins}
    other = 0
    for v in present:
        for b in config.bins:
            if b.matches(v):
                counts[b.name] += 1
                break
        else:
            other += 1
    n = len(present)
    rows = [
        DivergenceRow(
            bin=b.name,
            corpus_fraction=counts[b.name] / n,
            baseline_fraction=float(f),
        )
        for b, f in zip(config.bins, config.baseline_fractions)
    ]
    if other:
        rows.append(DivergenceRow(bin=OTHER_BIN, corpus_fraction=other / n, baseline_fraction=0.0))
    return rows


def term_frequencies(
    records: Sequence[MetadataRecord],
    fields: Sequence[str] = ("label", "body_region", "modality"),
) -> list[list]:
    """Ranked word counts over selected metadata fields (feeds the UI's hole term list)."""
    counts: dict[str, int] = {}
    for r in records:
        for name in fields:
            value = getattr(r, name)
            if value is None:
                continue
            for token in str(value).lower().split():
                counts[token] = counts.get(token, 0) + 1
    return [[term, n] for term, n in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))]


def to_jsonable(obj):
    """Recursively convert dataclasses, numpy values, and paths to plain JSON types.

    Non-finite floats become null: strict JSON has no Infinity/NaN and every
    consumer (CSV mirror, service, UI) treats null as absent.
    """
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        out = {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
        for name in dir(type(obj)):
            if isinstance(getattr(type(obj), name, None), property):
                out[name] = to_jsonable(getattr(obj, name))
        return out
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def canonical_dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _csv_mirror(name: str, section: dict, out_dir: Path) -> Optional[Path]:
    """Flat CSV views of the best-known sections; unknown shapes are skipped."""
    path = out_dir / f"{name}.csv"
    fmt = lambda x, nd=6: ("" if x is None else f"{x:.{nd}f}" if isinstance(x, float) else x)
    if name == "novelty" and "series" in section:
        rows = [
            [
                e["year"],
                e["n_new"],
                fmt(e["nu_observed"]),
                fmt(e["nu_baseline_mean"]),
                fmt(e["ci_low"]),
                fmt(e["ci_high"]),
                fmt(e["ratio"]),
            ]
            for e in section["series"]
        ]
        _write_csv(path, ["year", "n", "nu", "baseline", "ci_low", "ci_high", "ratio"], rows)
        return path
    if name == "similarity" and "datasets" in section:
        names = section["datasets"]
        rows = [[a] + [fmt(v) for v in row] for a, row in zip(names, section["fd"])]
        _write_csv(path, ["dataset"] + names, rows)
        return path
    if name == "divergence" and "rows" in section:
        rows = [
            [
                r["bin"],
                f"{100.0 * r['corpus_fraction']:.1f}",
                f"{100.0 * r['baseline_fraction']:.1f}",
                f"{r['delta_pp']:.1f}",
            ]
            for r in section["rows"]
        ]
        _write_csv(path, ["bin", "corpus_pct", "baseline_pct", "delta_pp"], rows)
        return path
    if name == "density" and "per_sample" in section:
        rows = [[r["id"], fmt(r["log_density"])] for r in section["per_sample"]]
        _write_csv(path, ["id", "log_density"], rows)
        return path
    if name == "holes" and "holes" in section:
        rows = [
            [
                h["rank"],
                fmt(h["persistence"]),
                fmt(h["birth"]),
                fmt(h["death"]),
                h["size"],
                fmt(h["radius"]),
                fmt(h["volume"]),
            ]
            for h in section["holes"]
        ]
        _write_csv(path, ["rank", "persistence", "birth", "death", "size", "radius", "volume"], rows)
        return path
    if name == "retrieval" and "reports" in section:
        rows = [
            [
                r["dataset"],
                r["mode"],
                r["k"],
                fmt(r["precision_at_k"]),
                fmt(r["recall_at_k"]),
                fmt(r["ap_at_k"]),
            ]
            for r in section["reports"]
        ]
        _write_csv(path, ["dataset", "mode", "k", "precision", "recall", "ap"], rows)
        return path
    if name == "probes" and "reports" in section:
        rows = [
            [r["target_field"], r["metric_name"], fmt(r["point"]), fmt(r["ci_low"]), fmt(r["ci_high"])]
            for r in section["reports"]
        ]
        _write_csv(path, ["field", "metric", "point", "ci_low", "ci_high"], rows)
        return path
    return None


@dataclass(frozen=True)
class Manifest:
    version: str
    seed: int
    parameters: dict
    inputs: dict[str, str]
    sections: dict[str, str] = field(default_factory=dict)


def emit_report(
    sections: dict[str, Optional[dict]],
    out_dir: str | Path,
    version: str,
    seed: int,
    parameters: dict,
    input_paths: Optional[dict[str, str | Path]] = None,
) -> dict:
    """Write one JSON file per non-empty section plus manifest.json and CSV mirrors.

    Re-running with identical inputs, parameters, and seed reproduces every
    file byte for byte; nothing time- or environment-dependent is recorded.
    """
    present = {k: v for k, v in sections.items() if v is not None}
    if not present:
        raise ValueError("emit_report needs at least one section")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    digests: dict[str, str] = {}
    for name in sorted(present):
        payload = to_jsonable(present[name])
        path = out / f"{name}.json"
        path.write_text(canonical_dumps(payload), encoding="utf-8")
        digests[name] = sha256_file(path)
        _csv_mirror(name, payload, out)
    manifest = {
        "tool": "embatlas",
        "version": version,
        "seed": seed,
        "parameters": to_jsonable(parameters),
        "inputs": {
            name: sha256_file(path) for name, path in sorted((input_paths or {}).items())
        },
        "sections": digests,
    }
    (out / "manifest.json").write_text(canonical_dumps(manifest), encoding="utf-8")
    return manifest
