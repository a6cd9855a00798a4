import warnings

import pytest

with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    from fastapi.testclient import TestClient

from bubblelab.service.app import app

client = TestClient(app)
BALL7_WELL = {"dim": 7, "potential": {"family": "quadratic_well", "v0": 2.0, "curvature": -1.0, "center": [0.0]}}


def test_health_and_kinds():
    assert client.get("/health").json()["status"] == "ok"
    kinds = client.get("/kinds").json()
    assert "point_multi" in kinds["pairings"] and "cbar3" in kinds["constants"]


def test_constants_endpoint():
    body = client.post("/constants", json={"dim": 4}).json()
    assert body["type"] == "constants"
    assert body["result"]["gamma"] == 0.0
    assert body["result"]["rho"] is None


def test_cluster_endpoint():
    h = [[-2.0 if i == j else 0.0 for j in range(7)] for i in range(7)]
    r = client.post("/cluster", json={"dim": 7, "N": 2, "hessian": h, "seed": 0})
    assert r.status_code == 200
    res = r.json()["result"]
    assert res["grad_norm"] < 1e-10 and res["nondegenerate"]


def test_cluster_seed_is_required():
    r = client.post("/cluster", json={"dim": 7, "N": 2, "hessian": [[-1.0]]})
    assert r.status_code == 422


def test_library_errors_become_422():
    r = client.post("/predict", json={"problem": {"dim": 5, "potential": BALL7_WELL["potential"]},
                                      "kind": "isolated", "site": [0.0] * 5, "eps": 1e-3})
    assert r.status_code == 422
    assert r.json()["error"] == "ContractError"
    r = client.post("/constants", json={"dim": 5, "problem": {"dim": 2}})
    assert r.status_code == 422 and r.json()["error"] == "ConfigError"


def test_predict_with_refinement():
    r = client.post("/predict", json={"problem": BALL7_WELL, "kind": "isolated", "site": [0.0] * 7,
                                      "eps": 1e-4, "refine": True})
    assert r.status_code == 200
    res = r.json()["result"]
    assert res["refined"]["extra"]["residual"] < 1e-10


def test_cluster_prediction_needs_seed():
    r = client.post("/predict", json={"problem": BALL7_WELL, "kind": "cluster", "site": [0.0] * 7, "eps": 1e-4})
    assert r.status_code == 422


def test_expansion_endpoint_ledger():
    cfg = {"alpha0": 1.0, "bubbles": [{"center": [0.0] * 5, "lam": 240.0}]}
    r = client.post("/expansion", json={"problem": {"dim": 5, "eps": 1e-3}, "configuration": cfg,
                                        "kind": "lambda", "eps": 1e-3})
    assert r.status_code == 200
    res = r.json()["result"]
    assert res["discrepancy"] <= 3 * res["envelope"]


def test_diagnose_endpoint():
    cfg = {"alpha0": 1.0, "bubbles": [{"center": [0.75, 0, 0, 0, 0], "lam": 400.0}]}
    prob = {"dim": 5, "eps": 1e-3, "domain": {"kind": "annulus", "inner": 0.5, "radius": 1.0},
            "u0": {"source": "radial_pde"}}
    r = client.post("/diagnose", json={"problem": prob, "configuration": cfg, "which": "lowdim"})
    assert r.status_code == 200
    assert r.json()["result"]["verdict"] == "OBSTRUCTED"


def test_solve_endpoint_partial_branch():
    r = client.post("/solve", json={"problem": {"dim": 5}, "eps_ladder": [0.2, 0.0], "fit": False})
    assert r.status_code == 200
    res = r.json()["result"]
    assert res["complete"] is False and res["lost_at"] == 0.0 and len(res["rows"]) == 1


def test_unknown_potential_field_rejected():
    r = client.post("/constants", json={"dim": 5, "problem": {"dim": 5, "potential": {"family": "constant",
                                                                                      "k": 1}}})
    assert r.status_code == 422
