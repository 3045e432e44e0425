import json
import threading
from concurrent.futures import ThreadPoolExecutor
from http.client import HTTPConnection

import numpy as np
import pytest

from leafgraph.models import build, predict, train
from leafgraph.rng import Rng
from leafgraph.service import make_server, round9
from test_models import tiny_config


@pytest.fixture(scope="module")
def served_model():
    from leafgraph.data import split, synth_dataset

    rng = Rng(314)
    manifest, store, _ = synth_dataset(4, 20, 12, 0.4, rng)
    manifest = split(manifest, (0.8, 0.1, 0.1), rng.stream("split"))
    model = build(tiny_config(epochs=3, seed=2), store, manifest)
    train(model, store, manifest)
    server = make_server(model, "127.0.0.1", 0)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield model, server.server_port
    server.shutdown()
    server.server_close()


def request(port, method, path, body=None):
    conn = HTTPConnection("127.0.0.1", port, timeout=10)
    raw = None if body is None else json.dumps(body).encode()
    headers = {"Content-Type": "application/json"} if raw else {}
    conn.request(method, path, body=raw, headers=headers)
    resp = conn.getresponse()
    payload = resp.read()
    conn.close()
    return resp.status, json.loads(payload)


def test_health(served_model):
    _, port = served_model
    status, body = request(port, "GET", "/health")
    assert status == 200 and body == {"status": "ok"}


def test_model_info(served_model):
    model, port = served_model
    status, body = request(port, "GET", "/v1/model")
    assert status == 200
    assert body["arch"] == "sequential"
    assert body["classes"] == model.class_table
    assert body["param_count"] > 0
    assert body["theta"] == pytest.approx(model.config.theta)


def test_predict_matches_offline(served_model):
    model, port = served_model
    offline = predict(model, model.train_features[:5])
    for row in range(5):
        status, body = request(
            port, "POST", "/v1/predict",
            {"features": model.train_features[row].tolist()},
        )
        assert status == 200
        probs = np.array([body["probs"][c] for c in model.class_table])
        assert abs(probs.sum() - 1.0) < 1e-6
        assert np.abs(probs - offline[row]).max() < 1e-6
        assert body["predicted"] == model.class_table[int(offline[row].argmax())]


def test_predict_reports_neighbors(served_model):
    model, port = served_model
    q = Rng(1).normal(model.train_features.shape[1])
    status, body = request(port, "POST", "/v1/predict", {"features": q.tolist()})
    assert status == 200
    assert len(body["neighbors"]) >= model.config.min_degree
    for nb in body["neighbors"]:
        assert nb["id"] in model.train_ids
        assert -1.0 <= nb["similarity"] <= 1.0


def test_wrong_dimension_422(served_model):
    model, port = served_model
    d = model.train_features.shape[1]
    status, body = request(
        port, "POST", "/v1/predict", {"features": [0.0] * (d - 1)}
    )
    assert status == 422 and "error" in body


def test_malformed_bodies_400(served_model):
    _, port = served_model
    conn = HTTPConnection("127.0.0.1", port, timeout=10)
    conn.request("POST", "/v1/predict", body=b"{not json",
                 headers={"Content-Type": "application/json"})
    resp = conn.getresponse()
    assert resp.status == 400
    json.loads(resp.read())
    conn.close()

    status, _ = request(port, "POST", "/v1/predict", {"nope": 1})
    assert status == 400
    status, _ = request(port, "POST", "/v1/predict", {"features": "zzz"})
    assert status == 400
    status, _ = request(port, "POST", "/v1/explain", {"spatial": [1.0]})
    assert status == 400


def test_explain_eigencam_endpoint(served_model):
    _, port = served_model
    fm = Rng(2).normal(4 * 3 * 5)
    status, body = request(
        port, "POST", "/v1/explain",
        {"spatial": fm.tolist(), "shape": [4, 3, 5], "method": "eigencam"},
    )
    assert status == 200
    assert body["shape"] == [4, 3]
    assert len(body["heatmap"]) == 12
    assert body["degenerate"] is False


def test_explain_gradcam_endpoint(served_model):
    model, port = served_model
    d = model.train_features.shape[1]
    fm = Rng(3).normal(3 * 3 * d)
    status, body = request(
        port, "POST", "/v1/explain",
        {"spatial": fm.tolist(), "shape": [3, 3, d], "method": "gradcam",
         "class": 1},
    )
    assert status == 200 and len(body["heatmap"]) == 9

    status, _ = request(
        port, "POST", "/v1/explain",
        {"spatial": fm.tolist(), "shape": [3, 3, d], "method": "gradcam",
         "class": 99},
    )
    assert status == 422


def test_explain_dimension_mismatch_422(served_model):
    _, port = served_model
    status, _ = request(
        port, "POST", "/v1/explain",
        {"spatial": [1.0, 2.0], "shape": [2, 2, 2], "method": "eigencam"},
    )
    assert status == 422


def test_concurrent_requests_identical(served_model):
    model, port = served_model
    q = model.train_features[3].tolist()

    def one(_):
        conn = HTTPConnection("127.0.0.1", port, timeout=30)
        conn.request("POST", "/v1/predict", body=json.dumps({"features": q}).encode(),
                     headers={"Content-Type": "application/json"})
        resp = conn.getresponse()
        body = resp.read()
        conn.close()
        return resp.status, body

    with ThreadPoolExecutor(max_workers=16) as pool:
        results = list(pool.map(one, range(50)))
    statuses = {s for s, _ in results}
    bodies = {b for _, b in results}
    assert statuses == {200}
    assert len(bodies) == 1


def test_round9_stabilizes_floats():
    assert round9(0.123456789123) == 0.123456789
    assert round9({"a": [1 / 3]}) == {"a": [0.333333333]}
