from __future__ import annotations

import numpy as np
import pytest
from scipy.optimize import minimize

from embatlas.probes import (
    bootstrap_ci,
    evaluate_probe,
    impute_missing,
    macro_f1,
    r_squared,
    train_classifier_probe,
    train_field_probe,
    train_regressor_probe,
)

from conftest import make_corpus, unit_rows
from oracles import ridge_normal_equations


class TestClassifierProbe:
    def test_separable_two_class_perfect_f1(self):
        X = np.array([[1.0, 0.0], [2.0, 0.1], [-1.0, 0.0], [-2.0, -0.1]])
        y = ["a", "a", "b", "b"]
        model = train_classifier_probe(X, y, lam=0.01)
        assert evaluate_probe(model, X, y) == 1.0

    def test_huge_lambda_shrinks_to_prior(self, rng):
        X = rng.normal(size=(30, 3))
        y = ["a"] * 20 + ["b"] * 10
        model = train_classifier_probe(X, y, lam=1e6)
        assert np.abs(model.weights[1:]).max() < 1e-3
        # prior class "a" wins everywhere once weights vanish
        assert set(model.predict(rng.normal(size=(5, 3)))) == {"a"}

    def test_objective_matches_second_opinion_optimizer(self, rng):
        X = rng.normal(size=(20, 2))
        y = [("a", "b", "c")[i % 3] for i in range(20)]
        lam = 0.5
        model = train_classifier_probe(X, y, lam=lam)

        classes = model.classes
        X1 = np.hstack([np.ones((20, 1)), X])
        onehot = np.zeros((20, 3))
        onehot[np.arange(20), [classes.index(v) for v in y]] = 1.0

        def objective(w_flat):
            W = w_flat.reshape(3, 3)
            scores = X1 @ W
            scores -= scores.max(axis=1, keepdims=True)
            log_probs = scores - np.log(np.exp(scores).sum(axis=1, keepdims=True))
            return -float((onehot * log_probs).sum()) + 0.5 * lam * float((W[1:] ** 2).sum())

        mine = objective(model.weights.ravel())
        rng2 = np.random.default_rng(1)
        second = min(
            minimize(objective, rng2.normal(size=9) * 0.1, method="BFGS").fun
            for _ in range(3)
        )
        assert mine == pytest.approx(second, abs=1e-4)

    def test_single_class_rejected(self, rng):
        with pytest.raises(ValueError):
            train_classifier_probe(rng.normal(size=(5, 2)), ["a"] * 5)

    def test_non_finite_features_rejected(self):
        X = np.array([[1.0, np.nan], [0.0, 1.0]])
        with pytest.raises(ValueError):
            train_classifier_probe(X, ["a", "b"])

    def test_softmax_shift_invariance(self, rng):
        X = rng.normal(size=(12, 3))
        y = [("a", "b")[i % 2] for i in range(12)]
        model = train_classifier_probe(X, y)
        shifted = type(model)(
            target_field=model.target_field,
            kind=model.kind,
            weights=model.weights + 3.7,  # same constant into every class column
            regularization=model.regularization,
            classes=model.classes,
        )
        queries = rng.normal(size=(8, 3))
        assert model.predict(queries) == shifted.predict(queries)

    def test_deterministic(self, rng):
        X = rng.normal(size=(15, 2))
        y = [("a", "b")[i % 2] for i in range(15)]
        a = train_classifier_probe(X, y)
        b = train_classifier_probe(X, y)
        np.testing.assert_array_equal(a.weights, b.weights)


class TestRegressorProbe:
    def test_noiseless_line(self):
        X = np.linspace(-2, 2, 11)[:, None]
        y = 2.0 * X[:, 0]
        model = train_regressor_probe(X, y, lam=0.0)
        assert model.weights[1] == pytest.approx(2.0, abs=1e-10)
        assert r_squared(y, model.predict(X)) == pytest.approx(1.0, abs=1e-12)

    def test_constant_target(self, rng):
        X = rng.normal(size=(10, 2))
        y = np.full(10, 3.5)
        model = train_regressor_probe(X, y, lam=1.0)
        np.testing.assert_allclose(model.weights[1:], 0.0, atol=1e-10)
        assert model.weights[0] == pytest.approx(3.5, abs=1e-10)

    def test_matches_normal_equation_oracle(self, rng):
        X = rng.normal(size=(50, 4))
        y = rng.normal(size=50)
        model = train_regressor_probe(X, y, lam=1.0)
        bias, coef = ridge_normal_equations(X, y, 1.0)
        assert model.weights[0] == pytest.approx(bias, abs=1e-8)
        np.testing.assert_allclose(model.weights[1:], coef, atol=1e-8)

    def test_normal_equation_residual_small(self, rng):
        X = rng.normal(size=(40, 5))
        y = rng.normal(size=40)
        lam = 0.7
        model = train_regressor_probe(X, y, lam=lam)
        Xc = X - X.mean(axis=0)
        yc = y - y.mean()
        residual = (Xc.T @ Xc + lam * np.eye(5)) @ model.weights[1:] - Xc.T @ yc
        assert np.linalg.norm(residual) <= 1e-8

    def test_singular_without_ridge_advises_lambda(self):
        X = np.ones((5, 2))  # rank-deficient after centering
        with pytest.raises(ValueError, match="lambda"):
            train_regressor_probe(X, np.arange(5.0), lam=0.0)


class TestMetrics:
    def test_all_correct(self):
        assert macro_f1(["a", "b"], ["a", "b"]) == 1.0

    def test_predict_all_a_hand_case(self):
        y_true = ["a", "a", "b", "b"]
        y_pred = ["a", "a", "a", "a"]
        # F1_a = 2*2/(2*2+2+0) = 2/3, F1_b = 0
        assert macro_f1(y_true, y_pred) == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_r2_of_mean_predictor_is_zero(self, rng):
        y = rng.normal(size=20)
        assert r_squared(y, np.full(20, y.mean())) == pytest.approx(0.0, abs=1e-12)

    def test_empty_evaluation_rejected(self):
        with pytest.raises(ValueError):
            macro_f1([], [])


class TestBootstrapCi:
    def test_all_correct_degenerate_ci(self):
        report = bootstrap_ci(["a", "b"] * 5, ["a", "b"] * 5, "macro_f1", B=50, seed=0)
        assert (report.point, report.ci_low, report.ci_high) == (1.0, 1.0, 1.0)

    def test_seed_determinism(self, rng):
        y_true = [("a", "b")[i % 2] for i in range(30)]
        y_pred = [("a", "b")[(i // 3) % 2] for i in range(30)]
        a = bootstrap_ci(y_true, y_pred, "macro_f1", B=100, seed=9)
        b = bootstrap_ci(y_true, y_pred, "macro_f1", B=100, seed=9)
        assert (a.ci_low, a.ci_high) == (b.ci_low, b.ci_high)

    def test_point_inside_ci(self, rng):
        y_true = rng.normal(size=60)
        y_pred = y_true + rng.normal(0, 0.4, size=60)
        report = bootstrap_ci(y_true, y_pred, "r2", B=300, seed=4)
        assert report.ci_low <= report.point <= report.ci_high

    def test_coverage_simulation(self):
        # nominal 95% percentile CI covers the population metric in most trials
        hits = 0
        true_r2 = 0.75
        for trial in range(40):
            rng = np.random.default_rng(5000 + trial)
            x = rng.normal(size=400)
            noise_var = (1.0 - true_r2) / true_r2
            y = x + rng.normal(0, np.sqrt(noise_var), size=400)
            report = bootstrap_ci(y, x, "r2", B=200, seed=trial)
            hits += report.ci_low <= true_r2 <= report.ci_high
        assert hits >= 32

    def test_B_zero_rejected(self):
        with pytest.raises(ValueError):
            bootstrap_ci([1.0], [1.0], "r2", B=0)


def planted_corpus(rng, n=120, labelled_fraction=0.5):
    """Embeddings whose direction encodes the fst label; half the labels hidden."""
    d = 8
    fst_true = [(i % 3) * 2 + 1 for i in range(n)]  # 1, 3, 5
    centers = {1: np.eye(d)[0], 3: np.eye(d)[1], 5: np.eye(d)[2]}
    vectors = np.stack([centers[f] for f in fst_true]) + rng.normal(0, 0.15, size=(n, d))
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    visible = [f if i < int(n * labelled_fraction) else None for i, f in enumerate(fst_true)]
    corpus = make_corpus(vectors, fst=visible)
    return corpus, fst_true


class TestImputation:
    def test_fully_present_field_untouched(self, rng):
        corpus, _ = planted_corpus(rng, labelled_fraction=1.0)
        result = impute_missing(corpus, ["fst"], ci_B=20, seed=0)
        (coverage,) = result.coverage
        assert coverage.n_imputed == 0
        assert coverage.delta_pp == pytest.approx(0.0, abs=1e-12)

    def test_half_absent_reaches_full_coverage(self, rng):
        corpus, _ = planted_corpus(rng, labelled_fraction=0.5)
        result = impute_missing(corpus, ["fst"], ci_B=20, seed=0)
        (coverage,) = result.coverage
        assert coverage.after_fraction == 1.0
        assert coverage.delta_pp == pytest.approx(50.0, abs=1e-9)

    def test_planted_signal_recovered(self, rng):
        corpus, fst_true = planted_corpus(rng, labelled_fraction=0.5)
        result = impute_missing(corpus, ["fst"], ci_B=20, seed=0)
        imputed = [r.fst for r in result.records[60:]]
        assert macro_f1([str(v) for v in fst_true[60:]], [str(v) for v in imputed]) >= 0.95

    def test_originals_never_overwritten(self, rng):
        corpus, _ = planted_corpus(rng, labelled_fraction=0.5)
        result = impute_missing(corpus, ["fst"], ci_B=20, seed=0)
        for before, after in zip(corpus.records[:60], result.records[:60]):
            assert before.fst == after.fst
        originals = {p.sample_id for p in result.provenance if p.provenance == "original"}
        imputed = {p.sample_id for p in result.provenance if p.provenance == "imputed"}
        assert originals.isdisjoint(imputed)

    def test_field_without_signal_skipped(self, rng):
        vectors = unit_rows(rng, 10, 4)
        corpus = make_corpus(vectors, gender=[None] * 10)
        with pytest.warns(UserWarning, match="gender"):
            result = impute_missing(corpus, ["gender"], ci_B=10, seed=0)
        assert result.skipped_fields == ["gender"]

    def test_held_out_protocol_disjoint_ids(self, rng):
        corpus, fst_true = planted_corpus(rng, labelled_fraction=1.0)
        train_idx = np.arange(0, 80)
        eval_idx = np.arange(80, 120)
        model, used = train_field_probe(corpus, "fst", train_indices=train_idx)
        train_ids = {corpus.records[i].id for i in used}
        eval_ids = {corpus.records[i].id for i in eval_idx}
        assert train_ids & eval_ids == set()
        score = evaluate_probe(
            model,
            corpus.embeddings.values[eval_idx],
            [corpus.records[i].fst for i in eval_idx],
        )
        assert score >= 0.9
