"""Linear probes over frozen embeddings: training, evaluation, CIs, imputation.

Classifier probes are multinomial (softmax) logistic regression with an L2
penalty on everything but the bias row, minimized by L-BFGS from zero
initialization; regressor probes are closed-form ridge with the bias handled
by centering. Evaluation is macro-F1 / R^2 with percentile bootstrap CIs, and
imputation fills only absent metadata fields, flagging provenance.
"""
from __future__ import annotations

import dataclasses
import logging
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .corpus import Corpus, MetadataRecord

logger = logging.getLogger(__name__)

DEFAULT_LAMBDA = 1.0
DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 1000
DEFAULT_B = 1000
DEFAULT_ALPHA = 0.05


@dataclass(frozen=True)
class ProbeModel:
    target_field: str
    kind: str  # "classifier" | "regressor"
    weights: np.ndarray  # (d+1) x C for classifiers, (d+1,) for regressors; row 0 is bias
    regularization: float
    classes: Optional[list] = None
    n_iter: int = 0
    final_grad_norm: float = 0.0

    def predict(self, X: np.ndarray):
        X = np.asarray(X, dtype=np.float64)
        if self.kind == "classifier":
            scores = X @ self.weights[1:] + self.weights[0]
            return [self.classes[i] for i in np.argmax(scores, axis=1)]
        return X @ self.weights[1:] + self.weights[0]

    def predict_scores(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if self.kind != "classifier":
            raise ValueError("scores are only defined for classifier probes")
        return X @ self.weights[1:] + self.weights[0]


@dataclass(frozen=True)
class ProbeReport:
    target_field: str
    metric_name: str  # "macro_f1" | "r2"
    point: float
    ci_low: float
    ci_high: float
    B: int
    alpha: float
    per_class: Optional[dict[str, float]] = None


@dataclass(frozen=True)
class ImputedField:
    sample_id: str
    field: str
    value: object
    provenance: str  # "original" | "imputed"


def _classifier_objective(w_flat, X1, y_onehot, lam, n_features, n_classes):
    """Penalized negative log-likelihood and gradient; bias row unpenalized."""
    W = w_flat.reshape(n_features + 1, n_classes)
    scores = X1 @ W
    scores -= scores.max(axis=1, keepdims=True)
    exp = np.exp(scores)
    probs = exp / exp.sum(axis=1, keepdims=True)
    log_probs = scores - np.log(exp.sum(axis=1, keepdims=True))
    loss = -float((y_onehot * log_probs).sum()) + 0.5 * lam * float((W[1:] ** 2).sum())
    grad = X1.T @ (probs - y_onehot)
    grad[1:] += lam * W[1:]
    return loss, grad.ravel()


def train_classifier_probe(
    X: np.ndarray,
    y: Sequence,
    target_field: str = "",
    lam: float = DEFAULT_LAMBDA,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> ProbeModel:
    """Softmax probe minimized to max-abs gradient < tol, deterministic from zero init."""
    X = np.asarray(X, dtype=np.float64)
    if not np.isfinite(X).all():
        raise ValueError("features must be finite")
    classes = sorted(set(y), key=str)
    if len(classes) < 2:
        raise ValueError(f"classifier needs >= 2 classes, got {classes}")
    class_index = {c: i for i, c in enumerate(classes)}
    n, d = X.shape
    C = len(classes)
    y_onehot = np.zeros((n, C))
    y_onehot[np.arange(n), [class_index[v] for v in y]] = 1.0
    X1 = np.hstack([np.ones((n, 1)), X])
    res = minimize(
        _classifier_objective,
        np.zeros((d + 1) * C),
        args=(X1, y_onehot, lam, d, C),
        method="L-BFGS-B",
        jac=True,
        options={"maxiter": max_iter, "gtol": tol, "ftol": 0.0},
    )
    grad_norm = float(np.abs(res.jac).max())
    if grad_norm > tol:
        logger.info("classifier probe for %r stopped at grad norm %.2e", target_field, grad_norm)
    return ProbeModel(
        target_field=target_field,
        kind="classifier",
        weights=res.x.reshape(d + 1, C),
        regularization=lam,
        classes=classes,
        n_iter=int(res.nit),
        final_grad_norm=grad_norm,
    )


def train_regressor_probe(
    X: np.ndarray,
    y: np.ndarray,
    target_field: str = "",
    lam: float = DEFAULT_LAMBDA,
) -> ProbeModel:
    """Closed-form ridge with an unpenalized bias via centering."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("features and targets must be finite")
    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    Xc = X - x_mean
    yc = y - y_mean
    gram = Xc.T @ Xc + lam * np.eye(X.shape[1])
    if lam == 0.0:
        cond = np.linalg.cond(gram)
        if not np.isfinite(cond) or cond > 1e12:
            raise ValueError("singular normal equations with lambda=0; use lambda > 0")
    coef = np.linalg.solve(gram, Xc.T @ yc)
    bias = y_mean - float(x_mean @ coef)
    weights = np.concatenate([[bias], coef])
    return ProbeModel(
        target_field=target_field,
        kind="regressor",
        weights=weights,
        regularization=lam,
    )


def macro_f1(y_true: Sequence, y_pred: Sequence) -> float:
    """Unweighted mean of per-class F1; classes absent from truth and prediction excluded."""
    if len(y_true) == 0:
        raise ValueError("empty evaluation set")
    classes = sorted(set(y_true) | set(y_pred), key=str)
    f1s = []
    for c in classes:
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
        if tp + fp + fn == 0:
            continue
        f1s.append(2 * tp / (2 * tp + fp + fn))
    return float(np.mean(f1s)) if f1s else 0.0


def per_class_f1(y_true: Sequence, y_pred: Sequence) -> dict[str, float]:
    out = {}
    for c in sorted(set(y_true) | set(y_pred), key=str):
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == c and p == c)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != c and p == c)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == c and p != c)
        if tp + fp + fn == 0:
            continue
        out[str(c)] = 2 * tp / (2 * tp + fp + fn)
    return out


def r_squared(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """1 - SS_res / SS_tot; the mean predictor scores exactly 0."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.size == 0:
        raise ValueError("empty evaluation set")
    ss_res = float(((y_true - y_pred) ** 2).sum())
    ss_tot = float(((y_true - y_true.mean()) ** 2).sum())
    if ss_tot == 0.0:
        return 1.0 if ss_res == 0.0 else 0.0
    return 1.0 - ss_res / ss_tot


def evaluate_probe(model: ProbeModel, X: np.ndarray, y, metric: Optional[str] = None) -> float:
    if len(y) == 0:
        raise ValueError("empty evaluation set")
    if metric is None:
        metric = "macro_f1" if model.kind == "classifier" else "r2"
    if metric == "macro_f1":
        if model.kind != "classifier":
            raise ValueError("macro_f1 needs a classifier probe")
        return macro_f1(y, model.predict(X))
    if metric == "r2":
        if model.kind != "regressor":
            raise ValueError("r2 needs a regressor probe")
        return r_squared(y, model.predict(X))
    raise ValueError(f"unknown metric {metric!r}")


def bootstrap_ci(
    y_true,
    y_pred,
    metric: str,
    B: int = DEFAULT_B,
    alpha: float = DEFAULT_ALPHA,
    seed: int = 0,
    target_field: str = "",
) -> ProbeReport:
    """Percentile CI over B resamples of aligned (truth, prediction) pairs."""
    if B < 1:
        raise ValueError("B must be >= 1")
    if len(y_true) != len(y_pred):
        raise ValueError("truth and prediction vectors must align")
    n = len(y_true)
    if n == 0:
        raise ValueError("empty evaluation set")
    if metric == "macro_f1":
        score = lambda t, p: macro_f1(t, p)
        y_true_arr = np.asarray(y_true, dtype=object)
        y_pred_arr = np.asarray(y_pred, dtype=object)
        per_class = per_class_f1(y_true, y_pred)
    elif metric == "r2":
        score = lambda t, p: r_squared(t, p)
        y_true_arr = np.asarray(y_true, dtype=np.float64)
        y_pred_arr = np.asarray(y_pred, dtype=np.float64)
        per_class = None
    else:
        raise ValueError(f"unknown metric {metric!r}")
    point = score(list(y_true_arr), list(y_pred_arr)) if metric == "macro_f1" else score(y_true_arr, y_pred_arr)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(B,)))
    draws = np.empty(B)
    for b in range(B):
        idx = rng.integers(0, n, size=n)
        if metric == "macro_f1":
            draws[b] = score(list(y_true_arr[idx]), list(y_pred_arr[idx]))
        else:
            draws[b] = score(y_true_arr[idx], y_pred_arr[idx])
    lo, hi = np.quantile(draws, [alpha / 2.0, 1.0 - alpha / 2.0])
    return ProbeReport(
        target_field=target_field,
        metric_name=metric,
        point=float(point),
        ci_low=float(lo),
        ci_high=float(hi),
        B=B,
        alpha=alpha,
        per_class=per_class,
    )


CONTINUOUS_FIELDS = ("age",)


@dataclass(frozen=True)
class FieldCoverage:
    field: str
    before_fraction: float
    after_fraction: float
    n_imputed: int

    @property
    def delta_pp(self) -> float:
        return 100.0 * (self.after_fraction - self.before_fraction)


@dataclass(frozen=True)
class ImputationResult:
    records: list[MetadataRecord]
    provenance: list[ImputedField]
    coverage: list[FieldCoverage]
    reports: list[ProbeReport]
    skipped_fields: list[str] = field(default_factory=list)


def train_field_probe(
    corpus: Corpus,
    field_name: str,
    lam: float = DEFAULT_LAMBDA,
    train_indices: Optional[np.ndarray] = None,
) -> tuple[ProbeModel, np.ndarray]:
    """Train a probe for one metadata field on the samples where it is present.

    Returns the model and the indices it was trained on, so callers can keep
    held-out protocols honest (train/eval id sets must not intersect).
    """
    values = corpus.field_values(field_name)
    present = np.array([i for i, v in enumerate(values) if v is not None], dtype=int)
    if train_indices is not None:
        train_indices = np.asarray(train_indices, dtype=int)
        if any(values[i] is None for i in train_indices):
            raise ValueError(f"train indices include samples lacking {field_name!r}")
        present = train_indices
    if present.size == 0:
        raise ValueError(f"no training data for field {field_name!r}")
    X = corpus.embeddings.values[present]
    y = [values[i] for i in present]
    if field_name in CONTINUOUS_FIELDS:
        model = train_regressor_probe(X, np.asarray(y, dtype=np.float64), field_name, lam)
    else:
        model = train_classifier_probe(X, y, field_name, lam)
    return model, present


def impute_missing(
    corpus: Corpus,
    fields: Sequence[str],
    lam: float = DEFAULT_LAMBDA,
    ci_B: int = DEFAULT_B,
    alpha: float = DEFAULT_ALPHA,
    seed: int = 0,
) -> ImputationResult:
    """Fill absent metadata fields with probe predictions; originals are never touched.

    Each field's probe trains on the present subset; its report evaluates the
    training fit with a bootstrap CI (held-out evaluation is the caller's
    protocol via train_field_probe). Fields with too little signal are skipped
    with a warning.
    """
    records = list(corpus.records)
    provenance: list[ImputedField] = []
    coverage: list[FieldCoverage] = []
    reports: list[ProbeReport] = []
    skipped: list[str] = []
    n = len(records)
    for field_name in fields:
        values = corpus.field_values(field_name)
        present = [i for i, v in enumerate(values) if v is not None]
        absent = [i for i, v in enumerate(values) if v is None]
        before = len(present) / n
        if not present or (field_name not in CONTINUOUS_FIELDS and len(set(values[i] for i in present)) < 2):
            warnings.warn(f"skipping field {field_name!r}: insufficient training data")
            skipped.append(field_name)
            continue
        model, train_idx = train_field_probe(corpus, field_name, lam)
        y_true = [values[i] for i in train_idx]
        y_pred = model.predict(corpus.embeddings.values[train_idx])
        metric = "r2" if model.kind == "regressor" else "macro_f1"
        if metric == "r2":
            y_pred = list(np.asarray(y_pred, dtype=np.float64))
        reports.append(
            bootstrap_ci(y_true, y_pred, metric, B=ci_B, alpha=alpha, seed=seed, target_field=field_name)
        )
        for i in present:
            provenance.append(ImputedField(records[i].id, field_name, values[i], "original"))
        if absent:
            predictions = model.predict(corpus.embeddings.values[np.array(absent)])
            for i, value in zip(absent, predictions):
                if field_name in CONTINUOUS_FIELDS:
                    value = float(max(value, 0.0))  # ages cannot be negative
                elif field_name == "fst":
                    value = int(value)
                records[i] = dataclasses.replace(records[i], **{field_name: value})
                provenance.append(ImputedField(records[i].id, field_name, value, "imputed"))
        after = sum(1 for r in records if getattr(r, field_name) is not None) / n
        coverage.append(
            FieldCoverage(
                field=field_name,
                before_fraction=before,
                after_fraction=after,
                n_imputed=len(absent),
            )
        )
    return ImputationResult(
        records=records,
        provenance=provenance,
        coverage=coverage,
        reports=reports,
        skipped_fields=skipped,
    )
