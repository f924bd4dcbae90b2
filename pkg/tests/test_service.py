from __future__ import annotations

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from embatlas.retrieval import RetrievalQuery, search
from embatlas.service import build_app, build_index

from conftest import make_corpus, unit_rows


@pytest.fixture
def corpus(rng):
    vectors = unit_rows(rng, 40, 6)
    return make_corpus(
        vectors,
        dataset=["alpha"] * 25 + ["beta"] * 15,
        year=[2019] * 25 + [2020] * 15,
        label=[("x", "y")[i % 2] for i in range(40)],
        fst=[(i % 6) + 1 for i in range(40)],
    )


@pytest.fixture
def client(corpus, tmp_path):
    reports = tmp_path / "reports"
    reports.mkdir()
    (reports / "novelty.json").write_text(json.dumps({"series": []}))
    index = build_index(corpus, reports)
    return TestClient(build_app(index))


class TestEndpoints:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body["n_samples"] == 40 and body["n_datasets"] == 2

    def test_summary_counts_and_coverage(self, client):
        body = client.get("/corpus/summary").json()
        assert body["datasets"] == {"alpha": 25, "beta": 15}
        assert body["fields"]["fst"]["coverage"] == 1.0
        # per-value counts back the UI's filter badges
        fst_counts = body["fields"]["fst"]["values"]
        assert sum(fst_counts.values()) == 40

    def test_query_by_own_vector_returns_self(self, client, corpus):
        vector = corpus.embeddings.values[3].tolist()
        body = client.post("/query", json={"vector": vector, "k": 1}).json()
        assert body["results"][0]["id"] == corpus.records[3].id
        assert body["results"][0]["distance"] == pytest.approx(0.0, abs=1e-6)

    def test_query_matches_library_search(self, client, corpus):
        body = client.post(
            "/query", json={"sample_id": corpus.records[0].id, "k": 5, "filters": {"dataset": ["beta"]}}
        ).json()
        hits = search(
            corpus,
            RetrievalQuery(k=5, sample_id=corpus.records[0].id, filters={"dataset": {"beta"}}),
        )
        assert [r["id"] for r in body["results"]] == [h.id for h in hits]
        np.testing.assert_allclose(
            [r["distance"] for r in body["results"]], [h.distance for h in hits], atol=1e-12
        )

    def test_wrong_vector_dimension_400(self, client):
        response = client.post("/query", json={"vector": [1.0, 0.0], "k": 1})
        assert response.status_code == 400

    def test_unknown_sample_404(self, client):
        assert client.post("/query", json={"sample_id": "ghost", "k": 1}).status_code == 404
        assert client.get("/sample/ghost").status_code == 404

    def test_empty_filtered_pool_422(self, client, corpus):
        response = client.post(
            "/query",
            json={"sample_id": corpus.records[0].id, "k": 1, "filters": {"label": ["nothing"]}},
        )
        assert response.status_code == 422

    def test_map_pagination_and_fields(self, client):
        body = client.get("/map", params={"fields": "dataset,fst", "limit": 10}).json()
        assert body["total"] == 40 and len(body["points"]) == 10
        assert body["method"] == "pca"
        assert body["points"][0]["dataset"] == "alpha"
        rest = client.get("/map", params={"offset": 30, "limit": 100}).json()
        assert len(rest["points"]) == 10

    def test_report_served_or_404(self, client):
        assert client.get("/report/novelty").json() == {"series": []}
        response = client.get("/report/holes")
        assert response.status_code == 404
        assert "holes" in response.json()["detail"]

    def test_sample_metadata(self, client, corpus):
        body = client.get(f"/sample/{corpus.records[7].id}").json()
        assert body["dataset"] == "alpha" and body["year"] == 2019

    def test_identical_requests_identical_bodies(self, client, corpus):
        payload = {"sample_id": corpus.records[5].id, "k": 4}
        first = client.post("/query", json=payload).content
        second = client.post("/query", json=payload).content
        assert first == second

    def test_malformed_body_400(self, client):
        assert client.post("/query", json={"k": 2}).status_code == 400
        assert (
            client.post("/query", json={"vector": [0.1] * 6, "sample_id": "x", "k": 2}).status_code
            == 400
        )
