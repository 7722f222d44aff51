import numpy as np
import pytest
from fastapi.testclient import TestClient

import bdlab
from bdlab.service import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


def test_health(client):
    assert client.get("/health").json() == {"status": "ok"}


def test_classify_endpoint(client):
    r = client.post("/classify", json={"matrix": [[0, 0.5], [0.5, 0]]})
    assert r.status_code == 200
    assert r.json()["tag"] == "OppositeSignDyad"


def test_classify_validation(client):
    assert client.post("/classify", json={"matrix": [[0, 0.5]]}).status_code == 422
    assert client.post("/classify", json={}).status_code == 422


def test_evaluate_endpoint(client):
    u = bdlab.staircase_field()
    r = client.post("/evaluate", json={"field": u.to_json(),
                                       "integrand": "norm(A)",
                                       "include_boundary": False})
    assert r.status_code == 200
    doc = r.json()
    assert doc["total"] == pytest.approx(2 * np.sqrt(2), abs=1e-9)
    assert doc["area"] == pytest.approx(4 + 2 * np.sqrt(2), abs=1e-9)


def test_evaluate_parse_error_422(client):
    u = bdlab.staircase_field(n=17)
    r = client.post("/evaluate", json={"field": u.to_json(),
                                       "integrand": "norm(A"})
    assert r.status_code == 422


def test_qc_endpoint(client):
    r = client.post("/qc-test", json={"integrand": "-norm(A)",
                                      "at": [[0, 0], [0, 0]], "grid_n": 17})
    assert r.status_code == 200
    assert r.json()["violation"] is True


def test_rigidity_classify_endpoint(client):
    r = client.post("/rigidity/classify", json={"matrix": [[1, 0], [0, -1]]})
    assert r.status_code == 200
    assert r.json()["tag"] == "OppositeSign"


def test_jensen_endpoint(client):
    r = client.post("/jensen", json={"integrand": "norm(A)"})
    assert r.status_code == 200
    assert r.json()["verdict"] == "HOLDS"
    r = client.post("/jensen", json={"integrand": "@segment-violator"})
    assert r.json()["verdict"] == "FAILS"


def test_doubling_endpoint(client):
    r = client.post("/doubling", json={"measure": "line"})
    assert r.status_code == 200
    assert all(abs(v - 3.0) < 1e-9 for _, v in r.json()["ratios"])
