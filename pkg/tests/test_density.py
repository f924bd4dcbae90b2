from __future__ import annotations

import math

import numpy as np
import pytest

from embatlas.density import COV_RIDGE, bic_sweep, density_extremes, fit_gmm, log_density


class TestFitGmm:
    def test_single_component_closed_form(self, rng):
        x = rng.normal(size=(40, 3))
        model = fit_gmm(x, K=1, seed=0)
        np.testing.assert_allclose(model.weights, [1.0], atol=1e-12)
        np.testing.assert_allclose(model.means[0], x.mean(axis=0), atol=1e-9)
        centered = x - x.mean(axis=0)
        mle_cov = centered.T @ centered / x.shape[0] + COV_RIDGE * np.eye(3)
        np.testing.assert_allclose(model.covariances[0], mle_cov, atol=1e-8)

    def test_two_planted_clusters_recovered(self, rng):
        a = rng.normal(0, 0.3, size=(150, 2)) + np.array([4.0, 0.0])
        b = rng.normal(0, 0.3, size=(150, 2)) + np.array([-4.0, 0.0])
        model = fit_gmm(np.vstack([a, b]), K=2, seed=1)
        recovered = sorted(model.means[:, 0])
        assert recovered[0] == pytest.approx(-4.0, abs=0.1)
        assert recovered[1] == pytest.approx(4.0, abs=0.1)

    def test_likelihood_trace_non_decreasing(self, rng):
        for trial in range(5):
            x = rng.normal(size=(60, 4)) * (1 + trial)
            model = fit_gmm(x, K=3, seed=trial)
            diffs = np.diff(model.log_likelihood_trace)
            assert (diffs >= -1e-8).all()

    def test_deterministic_given_seed(self, rng):
        x = rng.normal(size=(50, 3))
        a = fit_gmm(x, K=4, seed=11)
        b = fit_gmm(x, K=4, seed=11)
        np.testing.assert_array_equal(a.means, b.means)
        np.testing.assert_array_equal(a.log_likelihood_trace, b.log_likelihood_trace)

    def test_too_few_points_rejected(self, rng):
        with pytest.raises(ValueError):
            fit_gmm(rng.normal(size=(3, 2)), K=4)

    def test_bic_sweep_picks_planted_component_count(self, rng):
        a = rng.normal(0, 0.2, size=(120, 2)) + np.array([3.0, 0.0])
        b = rng.normal(0, 0.2, size=(120, 2)) + np.array([-3.0, 0.0])
        best, scores = bic_sweep(np.vstack([a, b]), candidates=(1, 2, 4), seed=0)
        assert best == 2
        assert set(scores) == {1, 2, 4}
        # infeasible candidates are skipped, empty candidate sets rejected
        with pytest.raises(ValueError):
            bic_sweep(rng.normal(size=(3, 2)), candidates=(8, 16))


class TestLogDensity:
    def test_standard_normal_closed_form(self, rng):
        # fit trivially, then overwrite with exact standard-normal parameters
        model = fit_gmm(rng.normal(size=(10, 1)), K=1, seed=0)
        model = type(model)(
            weights=np.array([1.0]),
            means=np.zeros((1, 1)),
            covariances=np.ones((1, 1, 1)),
            converged=True,
            n_iter=1,
            log_likelihood_trace=np.array([0.0]),
        )
        (value,) = log_density(model, np.zeros((1, 1)))
        assert value == pytest.approx(math.log(1.0 / math.sqrt(2 * math.pi)), abs=1e-12)

    def test_mean_scores_at_least_far_point(self, rng):
        x = rng.normal(size=(80, 2))
        model = fit_gmm(x, K=2, seed=0)
        at_mean = log_density(model, model.means[:1])
        far = log_density(model, model.means[:1] + 50.0)
        assert at_mean[0] >= far[0]

    def test_identical_components_collapse(self, rng):
        base = fit_gmm(rng.normal(size=(30, 2)), K=1, seed=0)
        doubled = type(base)(
            weights=np.array([0.5, 0.5]),
            means=np.repeat(base.means, 2, axis=0),
            covariances=np.repeat(base.covariances, 2, axis=0),
            converged=True,
            n_iter=1,
            log_likelihood_trace=np.array([0.0]),
        )
        pts = rng.normal(size=(9, 2))
        np.testing.assert_allclose(log_density(doubled, pts), log_density(base, pts), atol=1e-12)

    def test_dimension_mismatch(self, rng):
        model = fit_gmm(rng.normal(size=(20, 3)), K=1, seed=0)
        with pytest.raises(ValueError):
            log_density(model, rng.normal(size=(5, 2)))


class TestDensityExtremes:
    def test_thousand_scores_flags_25_per_side(self, rng):
        scores = rng.normal(size=1000)
        ids = [f"s{i}" for i in range(1000)]
        report = density_extremes(scores, ids)
        assert len(report.sparse_ids) == 25
        assert len(report.dense_ids) == 25

    def test_all_equal_flags_nothing(self):
        report = density_extremes(np.ones(100), [str(i) for i in range(100)])
        assert report.sparse_ids == [] and report.dense_ids == []

    def test_planted_outliers_land_in_sparse(self, rng):
        # scattered far points, not a tight cluster a component could adopt
        dense = rng.normal(0, 0.5, size=(990, 2))
        directions = rng.normal(size=(10, 2))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        outliers = directions * (30 + 20 * rng.random(10))[:, None]
        x = np.vstack([dense, outliers])
        model = fit_gmm(x, K=2, seed=0)
        scores = log_density(model, x)
        ids = [f"d{i}" for i in range(990)] + [f"o{i}" for i in range(10)]
        report = density_extremes(scores, ids)
        assert sum(1 for i in report.sparse_ids if i.startswith("o")) == 10

    def test_rotation_preserves_counts(self, rng):
        x = rng.normal(size=(400, 3)) @ np.diag([3.0, 1.0, 0.5])
        theta = 0.7
        rot = np.array(
            [
                [math.cos(theta), -math.sin(theta), 0.0],
                [math.sin(theta), math.cos(theta), 0.0],
                [0.0, 0.0, 1.0],
            ]
        )
        ids = [str(i) for i in range(400)]
        for data in (x, x @ rot.T):
            model = fit_gmm(data, K=3, seed=5)
            report = density_extremes(log_density(model, data), ids)
            assert len(report.sparse_ids) == 10
            assert len(report.dense_ids) == 10
