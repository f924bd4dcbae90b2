"""embatlas: audit engine and atlas service for multi-dataset embedding corpora."""

__version__ = "0.1.0"

from .corpus import (  # noqa: E402
    Corpus,
    DedupReport,
    EmbeddingMatrix,
    MetadataRecord,
    deduplicate,
    load_corpus,
    load_embeddings,
    load_metadata,
    normalize_rows,
    save_embeddings,
    save_metadata,
)
from .geometry import NeighborList, ReducedMatrix, cosine_distance, knn, pca_reduce  # noqa: E402
from .novelty import (  # noqa: E402
    NoveltyReport,
    YearlyNovelty,
    bootstrap_baseline,
    cumulative_coverage,
    grouped_novelty,
    novelty_series,
    orphan_labels,
    yearly_novelty,
)
from .similarity import (  # noqa: E402
    GaussianSummary,
    SimilarityMatrix,
    dataset_moments,
    frechet_distance,
    high_overlap_pairs,
    pairwise_fd,
    uniqueness_scores,
)
from .density import DensityReport, GmmModel, density_extremes, fit_gmm, log_density  # noqa: E402
from .topology import (  # noqa: E402
    Hole,
    KnnGraph,
    PersistencePair,
    ResistanceMatrix,
    build_knn_graph,
    corrected_resistance,
    detect_holes,
    effective_resistance,
    laplacian_pseudoinverse,
    rips_persistence_h1,
    top_holes,
)
from .probes import (  # noqa: E402
    ProbeModel,
    ProbeReport,
    bootstrap_ci,
    evaluate_probe,
    impute_missing,
    train_classifier_probe,
    train_regressor_probe,
)
from .retrieval import (  # noqa: E402
    RetrievalEvalReport,
    RetrievalQuery,
    eval_retrieval,
    retrieval_metrics,
    search,
)
from .report import BaselineConfig, DivergenceRow, compare_to_baseline, emit_report  # noqa: E402

__all__ = [
    "__version__",
    "Corpus", "DedupReport", "EmbeddingMatrix", "MetadataRecord",
    "deduplicate", "load_corpus", "load_embeddings", "load_metadata",
    "normalize_rows", "save_embeddings", "save_metadata",
    "NeighborList", "ReducedMatrix", "cosine_distance", "knn", "pca_reduce",
    "NoveltyReport", "YearlyNovelty", "bootstrap_baseline",
    "cumulative_coverage", "grouped_novelty", "novelty_series",
    "orphan_labels", "yearly_novelty",
    "GaussianSummary", "SimilarityMatrix", "dataset_moments",
    "frechet_distance", "high_overlap_pairs", "pairwise_fd", "uniqueness_scores",
    "DensityReport", "GmmModel", "density_extremes", "fit_gmm", "log_density",
    "Hole", "KnnGraph", "PersistencePair", "ResistanceMatrix",
    "build_knn_graph", "corrected_resistance", "detect_holes",
    "effective_resistance", "laplacian_pseudoinverse", "rips_persistence_h1", "top_holes",
    "ProbeModel", "ProbeReport", "bootstrap_ci", "evaluate_probe",
    "impute_missing", "train_classifier_probe", "train_regressor_probe",
    "RetrievalEvalReport", "RetrievalQuery", "eval_retrieval",
    "retrieval_metrics", "search",
    "BaselineConfig", "DivergenceRow", "compare_to_baseline", "emit_report",
]
