"""Command-line entry point wiring corpus files to the audit modules.

Subcommands mirror the report sections (ingest, novelty, similarity, density,
holes, impute, retrieve-eval), `audit-all` runs every section into one output
directory, `serve` starts the query service, and `make-fixture` writes the
bundled synthetic corpora. Configuration comes from an optional JSON file plus
flags (flags win); all randomness flows from the single seed.

Exit codes: 0 success, 1 usage/config error, 2 input validation error,
3 computation failure. Failures print a machine-readable JSON object on
stderr.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .corpus import Corpus, CorpusError, DedupReport, OPTIONAL_FIELDS, load_corpus, save_metadata
from . import density as density_mod
from . import novelty as novelty_mod
from . import probes as probes_mod
from . import retrieval as retrieval_mod
from . import similarity as similarity_mod
from . import topology
from .fixtures import write_fixture
from .report import (
    BaselineConfig,
    baseline_config_from_dict,
    compare_to_baseline,
    emit_report,
    term_frequencies,
    to_jsonable,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_COMPUTE = 3

OUT_DIR_ENV = "EMBATLAS_OUT_DIR"


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    embeddings_path: str = ""
    metadata_path: str = ""
    out_dir: str = ""
    seed: int = 42
    k_novelty: int = 10
    B: int = 200
    alpha: float = 0.05
    pca_similarity: int = 64
    pca_density: int = 16
    gmm_K: int = 16
    graph_k: int = 15
    k_b: int = 20
    boundary_alpha: float = 1.5
    k_top_holes: int = 5
    holes_dataset: Optional[str] = None
    holes_max_points: int = 2000
    holes_distance: str = "corrected"
    overlap_quantile: float = 0.25
    retrieval_k: list[int] = field(default_factory=lambda: [1, 5, 10])
    eval_dataset: Optional[str] = None
    eval_label_field: str = "label"
    impute_fields: list[str] = field(default_factory=lambda: ["fst", "age", "gender", "origin", "body_region"])
    coverage_stratify: Optional[str] = None
    baseline: Optional[dict] = None
    workers: int = 1

    def validate(self) -> None:
        positive = (
            "k_novelty",
            "B",
            "pca_similarity",
            "pca_density",
            "gmm_K",
            "graph_k",
            "k_b",
            "k_top_holes",
            "holes_max_points",
            "workers",
        )
        for name in positive:
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be a positive integer")
        if not (0.0 < self.alpha < 0.5):
            raise UsageError(f"alpha must be in (0, 0.5), got {self.alpha}")
        if self.boundary_alpha <= 0:
            raise UsageError("boundary_alpha must be positive")
        if self.holes_distance not in ("corrected", "naive"):
            raise UsageError("holes_distance must be 'corrected' or 'naive'")
        if not self.retrieval_k or any(k < 1 for k in self.retrieval_k):
            raise UsageError("retrieval_k must be a list of positive integers")


_CONFIG_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def load_config(path: Optional[str], overrides: dict) -> RunConfig:
    cfg = RunConfig()
    if path:
        config_dir = Path(path).parent
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        unknown = set(data) - _CONFIG_FIELDS
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        for key, value in data.items():
            setattr(cfg, key, value)
        # paths in a config file resolve relative to the file
        for key in ("embeddings_path", "metadata_path"):
            value = getattr(cfg, key)
            if value and not Path(value).is_absolute():
                setattr(cfg, key, str(config_dir / value))
    for key, value in overrides.items():
        if value is not None:
            setattr(cfg, key, value)
    if not cfg.out_dir:
        cfg.out_dir = os.environ.get(OUT_DIR_ENV, "embatlas-out")
    cfg.validate()
    return cfg


def _require_inputs(cfg: RunConfig) -> None:
    if not cfg.embeddings_path or not cfg.metadata_path:
        raise UsageError("embeddings_path and metadata_path are required (flag or config)")
    for p in (cfg.embeddings_path, cfg.metadata_path):
        if not Path(p).is_file():
            raise CorpusError(f"input file not found: {p}")


def _load(cfg: RunConfig) -> tuple[Corpus, DedupReport, int]:
    _require_inputs(cfg)
    corpus, report = load_corpus(cfg.embeddings_path, cfg.metadata_path, normalize=True)
    return corpus, report, report.kept + report.removed


def section_ingest(cfg: RunConfig, corpus: Corpus, dedup: DedupReport, raw_count: int) -> dict:
    n = len(corpus)
    coverage = {}
    for name in OPTIONAL_FIELDS:
        values = corpus.field_values(name)
        coverage[name] = sum(1 for v in values if v is not None and v != "") / n
    return {
        "raw_count": raw_count,
        "kept": dedup.kept,
        "removed": dedup.removed,
        "removed_ids": [[rid, idx] for rid, idx in dedup.removed_ids],
        "d": corpus.embeddings.d,
        "normalized": corpus.normalized,
        "datasets": {name: int(corpus.dataset_indices(name).size) for name in corpus.datasets()},
        "field_coverage": coverage,
    }


def section_novelty(cfg: RunConfig, corpus: Corpus) -> dict:
    report = novelty_mod.novelty_series(corpus, k=cfg.k_novelty, B=cfg.B, alpha=cfg.alpha, seed=cfg.seed)
    grouped = novelty_mod.grouped_novelty(corpus, "icd_block", k=cfg.k_novelty)
    coverage = novelty_mod.cumulative_coverage(corpus, "icd", cfg.coverage_stratify)
    orphans = novelty_mod.orphan_labels(corpus, "icd")
    return {
        "series": [to_jsonable(e) for e in report.series],
        "k": report.k,
        "B": report.B,
        "alpha": report.alpha,
        "seed": report.seed,
        "n_missing_year": report.n_missing_year,
        "warning": report.warning,
        "grouped": [to_jsonable(g) for g in grouped],
        "coverage": [to_jsonable(c) for c in coverage],
        "orphans": [to_jsonable(o) for o in orphans],
    }


def section_similarity(cfg: RunConfig, corpus: Corpus) -> dict:
    sm = similarity_mod.pairwise_fd(corpus, reduce_to=cfg.pca_similarity)
    uniq = similarity_mod.uniqueness_scores(sm)
    overlap = similarity_mod.high_overlap_pairs(sm, quantile=cfg.overlap_quantile)
    return {
        "datasets": sm.datasets,
        "fd": to_jsonable(sm.fd),
        "reduced_to": sm.reduced_to,
        "excluded": sm.excluded,
        "uniqueness": [[name, score] for name, score in uniq],
        "high_overlap": [[a, b, v] for a, b, v in overlap],
        "overlap_quantile": cfg.overlap_quantile,
    }


def section_density(cfg: RunConfig, corpus: Corpus) -> dict:
    from .geometry import pca_reduce

    x = corpus.embeddings.values
    p = min(cfg.pca_density, x.shape[0], x.shape[1])
    reduced = pca_reduce(x, p)
    model = density_mod.fit_gmm(reduced.values, K=min(cfg.gmm_K, len(corpus)), seed=cfg.seed)
    scores = density_mod.log_density(model, reduced.values)
    report = density_mod.density_extremes(scores, corpus.ids)
    return {
        "pca_dims": p,
        "K": model.K,
        "seed": cfg.seed,
        "converged": model.converged,
        "n_iter": model.n_iter,
        "final_log_likelihood": model.final_log_likelihood,
        "low_threshold": report.low_threshold,
        "high_threshold": report.high_threshold,
        "q_low": report.q_low,
        "q_high": report.q_high,
        "sparse_ids": report.sparse_ids,
        "dense_ids": report.dense_ids,
        "per_sample": [
            {"id": sid, "log_density": float(s)} for sid, s in zip(corpus.ids, scores)
        ],
    }


def section_holes(cfg: RunConfig, corpus: Corpus) -> dict:
    if cfg.holes_dataset is not None:
        idx = corpus.dataset_indices(cfg.holes_dataset)
        if idx.size == 0:
            raise CorpusError(f"holes_dataset {cfg.holes_dataset!r} not present in corpus")
    else:
        idx = np.arange(len(corpus))
    points = corpus.embeddings.values[idx]
    ids = [corpus.records[int(i)].id for i in idx]
    detection = topology.detect_holes(
        points,
        ids,
        graph_k=cfg.graph_k,
        k_top=cfg.k_top_holes,
        k_b=cfg.k_b,
        alpha=cfg.boundary_alpha,
        use_corrected=cfg.holes_distance == "corrected",
        max_points=cfg.holes_max_points,
        seed=cfg.seed,
    )
    by_id = {r.id: r for r in corpus.records}
    holes = []
    for h in detection.holes:
        payload = to_jsonable(h)
        payload["boundary_terms"] = term_frequencies([by_id[b] for b in h.boundary_ids])
        holes.append(payload)
    return {
        "holes": holes,
        "distance_source": detection.distance_source,
        "n_points_used": detection.n_points_used,
        "n_points_total": detection.n_points_total,
        "subsampled": detection.subsampled,
        "graph_k": detection.graph_k,
        "components": detection.components,
        "n_h1_features": detection.n_h1_features,
        "dataset_filter": cfg.holes_dataset,
    }


def section_impute(cfg: RunConfig, corpus: Corpus, out_dir: Optional[Path]) -> tuple[dict, Corpus]:
    result = probes_mod.impute_missing(
        corpus, cfg.impute_fields, ci_B=cfg.B, alpha=cfg.alpha, seed=cfg.seed
    )
    imputed = Corpus(embeddings=corpus.embeddings, records=tuple(result.records), normalized=corpus.normalized)
    if out_dir is not None:
        provenance: dict[str, dict[str, str]] = {}
        for item in result.provenance:
            provenance.setdefault(item.sample_id, {})[item.field] = item.provenance
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "imputed_metadata.jsonl", "w", encoding="utf-8") as fh:
            for r in result.records:
                obj = {"id": r.id}
                for name in OPTIONAL_FIELDS:
                    value = getattr(r, name)
                    if value is not None and value != "":
                        obj[name] = value
                obj["provenance"] = provenance.get(r.id, {})
                fh.write(json.dumps(to_jsonable(obj), sort_keys=True) + "\n")
    section = {
        "reports": [to_jsonable(r) for r in result.reports],
        "coverage": [to_jsonable(c) for c in result.coverage],
        "skipped_fields": result.skipped_fields,
        "fields": list(cfg.impute_fields),
    }
    return section, imputed


def section_retrieval(cfg: RunConfig, corpus: Corpus) -> Optional[dict]:
    if cfg.eval_dataset is None:
        return None
    reports = []
    for mode in ("same-dataset", "atlas"):
        for k in cfg.retrieval_k:
            reports.append(
                to_jsonable(
                    retrieval_mod.eval_retrieval(
                        corpus, cfg.eval_dataset, label_field=cfg.eval_label_field, mode=mode, k=k
                    )
                )
            )
    return {"reports": reports, "eval_dataset": cfg.eval_dataset, "label_field": cfg.eval_label_field}


def section_divergence(cfg: RunConfig, corpus: Corpus) -> Optional[dict]:
    if cfg.baseline is None:
        return None
    config = baseline_config_from_dict(cfg.baseline)
    rows = compare_to_baseline(corpus.records, config)
    return {
        "field": config.field,
        "source_note": config.source_note,
        "rows": [to_jsonable(r) for r in rows],
    }


# run-local environment, not computation parameters; inputs are identified by digest
_NON_PARAMETER_FIELDS = ("embeddings_path", "metadata_path", "out_dir", "baseline")


def _emit(cfg: RunConfig, sections: dict[str, Optional[dict]]) -> None:
    emit_report(
        sections,
        cfg.out_dir,
        version=__version__,
        seed=cfg.seed,
        parameters={
            k: v for k, v in dataclasses.asdict(cfg).items() if k not in _NON_PARAMETER_FIELDS
        },
        input_paths={
            "embeddings": cfg.embeddings_path,
            "metadata": cfg.metadata_path,
        },
    )


def cmd_ingest(cfg: RunConfig) -> None:
    corpus, dedup, raw = _load(cfg)
    _emit(cfg, {"corpus": section_ingest(cfg, corpus, dedup, raw)})


def cmd_novelty(cfg: RunConfig) -> None:
    corpus, _, _ = _load(cfg)
    _emit(cfg, {"novelty": section_novelty(cfg, corpus)})


def cmd_similarity(cfg: RunConfig) -> None:
    corpus, _, _ = _load(cfg)
    _emit(cfg, {"similarity": section_similarity(cfg, corpus)})


def cmd_density(cfg: RunConfig) -> None:
    corpus, _, _ = _load(cfg)
    _emit(cfg, {"density": section_density(cfg, corpus)})


def cmd_holes(cfg: RunConfig) -> None:
    corpus, _, _ = _load(cfg)
    _emit(cfg, {"holes": section_holes(cfg, corpus)})


def cmd_impute(cfg: RunConfig) -> None:
    corpus, _, _ = _load(cfg)
    section, _ = section_impute(cfg, corpus, Path(cfg.out_dir))
    _emit(cfg, {"probes": section})


def cmd_retrieve_eval(cfg: RunConfig) -> None:
    if cfg.eval_dataset is None:
        raise UsageError("retrieve-eval requires eval_dataset (flag or config)")
    corpus, _, _ = _load(cfg)
    _emit(cfg, {"retrieval": section_retrieval(cfg, corpus)})


def cmd_audit_all(cfg: RunConfig) -> None:
    corpus, dedup, raw = _load(cfg)
    sections: dict[str, Optional[dict]] = {}
    sections["corpus"] = section_ingest(cfg, corpus, dedup, raw)
    sections["novelty"] = section_novelty(cfg, corpus)
    sections["similarity"] = section_similarity(cfg, corpus)
    sections["density"] = section_density(cfg, corpus)
    sections["holes"] = section_holes(cfg, corpus)
    probe_section, imputed = section_impute(cfg, corpus, Path(cfg.out_dir))
    sections["probes"] = probe_section
    sections["retrieval"] = section_retrieval(cfg, corpus)
    sections["divergence"] = section_divergence(cfg, imputed)
    _emit(cfg, sections)


def cmd_serve(cfg: RunConfig, host: str, port: int) -> None:
    from .service import build_index, serve

    corpus, _, _ = _load(cfg)
    reports_dir = Path(cfg.out_dir) if Path(cfg.out_dir).is_dir() else None
    index = build_index(corpus, reports_dir)
    serve(index, host=host, port=port)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2; the contract wants 1
        self.print_usage(sys.stderr)
        print(json.dumps({"error": "usage", "message": message}), file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="embatlas", description=__doc__)
    parser.add_argument("--version", action="version", version=f"embatlas {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--embeddings-path", dest="embeddings_path")
        p.add_argument("--metadata-path", dest="metadata_path")
        p.add_argument("--out-dir", dest="out_dir", help=f"default ${OUT_DIR_ENV} or ./embatlas-out")
        p.add_argument("--seed", type=int)
        p.add_argument("--k-novelty", dest="k_novelty", type=int)
        p.add_argument("--B", dest="B", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--pca-similarity", dest="pca_similarity", type=int)
        p.add_argument("--pca-density", dest="pca_density", type=int)
        p.add_argument("--gmm-K", dest="gmm_K", type=int)
        p.add_argument("--graph-k", dest="graph_k", type=int)
        p.add_argument("--k-b", dest="k_b", type=int)
        p.add_argument("--boundary-alpha", dest="boundary_alpha", type=float)
        p.add_argument("--k-top-holes", dest="k_top_holes", type=int)
        p.add_argument("--holes-dataset", dest="holes_dataset")
        p.add_argument("--holes-max-points", dest="holes_max_points", type=int)
        p.add_argument("--holes-distance", dest="holes_distance", choices=("corrected", "naive"))
        p.add_argument("--overlap-quantile", dest="overlap_quantile", type=float)
        p.add_argument(
            "--retrieval-k",
            dest="retrieval_k",
            type=lambda s: [int(x) for x in s.split(",")],
            help="comma-separated list, e.g. 1,5,10",
        )
        p.add_argument("--eval-dataset", dest="eval_dataset")
        p.add_argument("--eval-label-field", dest="eval_label_field")
        p.add_argument(
            "--impute-fields",
            dest="impute_fields",
            type=lambda s: [x for x in s.split(",") if x],
        )
        p.add_argument("--coverage-stratify", dest="coverage_stratify")
        p.add_argument("--workers", type=int)

    for name in ("ingest", "novelty", "similarity", "density", "holes", "impute", "retrieve-eval", "audit-all"):
        add_common(sub.add_parser(name))

    serve_p = sub.add_parser("serve")
    add_common(serve_p)
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8700)

    fixture_p = sub.add_parser("make-fixture", help="write a bundled synthetic fixture")
    fixture_p.add_argument("kind", choices=("audit", "circle"))
    fixture_p.add_argument("out_dir")
    fixture_p.add_argument("--seed", type=int, default=42)
    return parser


_COMMANDS = {
    "ingest": cmd_ingest,
    "novelty": cmd_novelty,
    "similarity": cmd_similarity,
    "density": cmd_density,
    "holes": cmd_holes,
    "impute": cmd_impute,
    "retrieve-eval": cmd_retrieve_eval,
    "audit-all": cmd_audit_all,
}


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "make-fixture":
            write_fixture(args.kind, args.out_dir, seed=args.seed)
            return EXIT_OK
        overrides = {
            k: v for k, v in vars(args).items() if k in _CONFIG_FIELDS and v is not None
        }
        cfg = load_config(args.config, overrides)
        if args.command == "serve":
            cmd_serve(cfg, args.host, args.port)
        else:
            _COMMANDS[args.command](cfg)
        return EXIT_OK
    except UsageError as exc:
        print(json.dumps({"error": "usage", "message": str(exc)}), file=sys.stderr)
        return EXIT_USAGE
    except (CorpusError, FileNotFoundError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # computation failure: report, never traceback-spam
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
