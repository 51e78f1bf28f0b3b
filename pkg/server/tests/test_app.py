import math

import numpy as np
import pytest
from fastapi.testclient import TestClient

from fecs_server.app import create_app
from fecs_server.service import ServerConfig


@pytest.fixture(scope="module")
def client(toy_service):
    app = create_app(toy_service, ServerConfig(model="inline"))
    return TestClient(app, raise_server_exceptions=False)


def test_info_fields(client, toy_service):
    doc = client.get("/info").json()
    assert doc == {
        "vocab_size": toy_service.vocab_size,
        "hidden_dim": toy_service.hidden_dim,
        "eos_id": toy_service.eos_id,
        "max_context": toy_service.max_context,
        "name": toy_service.name,
        "protocol_version": 1,
    }


def test_tokenize_detokenize_round_trip(client):
    text = "Article: the mayor opened the bridge\nSummary:"
    ids = client.post("/tokenize", json={"text": text}).json()["ids"]
    back = client.post("/detokenize", json={"ids": ids}).json()["text"]
    assert back == text


def test_next_sorted_and_full_mass(client, toy_service):
    ids = toy_service.encode("Article: the mayor opened")
    doc = client.post("/next", json={"ids": ids, "top_m": toy_service.vocab_size}).json()
    probs = [item["prob"] for item in doc["top"]]
    assert all(p > 0 for p in probs)
    assert all(a >= b for a, b in zip(probs, probs[1:]))
    assert abs(doc["truncation_mass"] - 1.0) <= 1e-6
    assert abs(math.fsum(probs) - doc["truncation_mass"]) <= 1e-9


def test_next_top_m_defaults(client):
    doc = client.post("/next", json={"ids": [5, 6, 7]}).json()
    assert len(doc["top"]) >= 1


def test_next_rejects_bad_top_m(client, toy_service):
    resp = client.post("/next", json={"ids": [5], "top_m": toy_service.vocab_size + 1})
    assert resp.status_code == 400
    assert "error" in resp.json()


def test_context_hiddens_shape(client, toy_service):
    ids = toy_service.encode("the mayor opened the bridge")
    doc = client.post("/context_hiddens", json={"ids": ids}).json()
    arr = np.asarray(doc["hiddens"])
    assert arr.shape == (len(ids), toy_service.hidden_dim)
    assert np.all(np.isfinite(arr))


def test_candidate_hiddens_batch(client, toy_service):
    ids = toy_service.encode("the mayor opened")
    cands = [3, 9, 20, 31]
    doc = client.post("/candidate_hiddens", json={"ids": ids, "candidates": cands}).json()
    arr = np.asarray(doc["hiddens"])
    assert arr.shape == (4, toy_service.hidden_dim)


def test_empty_ids_is_400(client):
    for path, body in [
        ("/next", {"ids": [], "top_m": 4}),
        ("/context_hiddens", {"ids": []}),
        ("/candidate_hiddens", {"ids": [], "candidates": [1]}),
    ]:
        resp = client.post(path, json=body)
        assert resp.status_code == 400
        assert "error" in resp.json()


def test_unknown_token_is_400(client, toy_service):
    resp = client.post("/context_hiddens", json={"ids": [toy_service.vocab_size + 5]})
    assert resp.status_code == 400


def test_overflow_is_413(client, toy_service):
    ids = [5] * (toy_service.max_context + 1)
    resp = client.post("/context_hiddens", json={"ids": ids})
    assert resp.status_code == 413
    assert "error" in resp.json()


def test_malformed_json_is_400(client):
    resp = client.post(
        "/next", content=b"{not json", headers={"Content-Type": "application/json"}
    )
    assert resp.status_code == 400


def test_duplicate_candidates_rejected(client):
    resp = client.post("/candidate_hiddens", json={"ids": [5], "candidates": [1, 1]})
    assert resp.status_code == 400


def test_identical_requests_identical_responses(client, toy_service):
    ids = toy_service.encode("the mayor opened the bridge on friday")
    a = client.post("/next", json={"ids": ids, "top_m": 8}).json()
    b = client.post("/next", json={"ids": ids, "top_m": 8}).json()
    assert a == b
    ha = client.post("/context_hiddens", json={"ids": ids}).json()
    hb = client.post("/context_hiddens", json={"ids": ids}).json()
    assert ha == hb
