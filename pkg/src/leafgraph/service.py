"""Read-only HTTP/1.1 JSON inference service.

Endpoints:
  GET  /health      -> {"status": "ok"}
  GET  /v1/model    -> {"arch", "classes", "param_count", "theta"}
  POST /v1/predict  body {"features": [D reals]}
  POST /v1/explain  body {"spatial": [...], "shape": [H, W, C],
                          "method": "eigencam"|"gradcam", "class": optional}

Malformed bodies get 400, dimension mismatches 422.  The model snapshot is
immutable, so concurrent requests are handled by a plain threading server.
All JSON numbers are rounded to 9 significant digits for stable fixtures.
"""

from __future__ import annotations

import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .errors import DataError, LeafgraphError
from .explain import eigen_cam, grad_cam
from .models import SageModel, count_parameters, predict, pooled_logit_grad


def round9(obj):
    """Round every float to 9 significant digits, recursively."""
    if isinstance(obj, float):
        return float(f"{obj:.9g}")
    if isinstance(obj, dict):
        return {k: round9(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round9(v) for v in obj]
    return obj


class _BadRequest(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status


def _require_number_list(value, what: str) -> np.ndarray:
    if not isinstance(value, list) or not value or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise _BadRequest(400, f"{what} must be a non-empty list of numbers")
    return np.asarray(value, dtype=np.float64)


def handle_predict(model: SageModel, body: dict) -> dict:
    if "features" not in body:
        raise _BadRequest(400, "missing field 'features'")
    feats = _require_number_list(body["features"], "features")
    d = model.train_features.shape[1]
    if feats.shape[0] != d:
        raise _BadRequest(422, f"expected {d} features, got {feats.shape[0]}")
    probs, neighbors = predict(model, feats[None, :], with_neighbors=True)
    row = probs[0]
    predicted = model.class_table[int(row.argmax())]
    return {
        "predicted": predicted,
        "probs": {c: float(p) for c, p in zip(model.class_table, row)},
        "neighbors": [
            {"id": model.train_ids[idx], "similarity": sim}
            for idx, sim in neighbors[0]
        ],
    }


def handle_explain(model: SageModel, body: dict) -> dict:
    for fieldname in ("spatial", "shape", "method"):
        if fieldname not in body:
            raise _BadRequest(400, f"missing field '{fieldname}'")
    method = body["method"]
    if method not in ("eigencam", "gradcam"):
        raise _BadRequest(400, f"unknown method {method!r}")
    shape = body["shape"]
    if (
        not isinstance(shape, list)
        or len(shape) != 3
        or not all(isinstance(s, int) and s >= 1 for s in shape)
    ):
        raise _BadRequest(400, "shape must be [H, W, C] positive integers")
    flat = _require_number_list(body["spatial"], "spatial")
    h, w, c = shape
    if flat.shape[0] != h * w * c:
        raise _BadRequest(
            422, f"spatial has {flat.shape[0]} values, shape wants {h * w * c}"
        )
    fm = flat.reshape(h, w, c)
    if method == "eigencam":
        hm = eigen_cam(fm)
    else:
        d = model.train_features.shape[1]
        if c != d:
            raise _BadRequest(422, f"gradcam needs {d} channels, got {c}")
        class_index = body.get("class")
        if class_index is None:
            probs = predict(model, fm.mean(axis=(0, 1))[None, :])
            class_index = int(probs[0].argmax())
        if not isinstance(class_index, int) or not 0 <= class_index < len(
            model.class_table
        ):
            raise _BadRequest(422, f"class index {class_index!r} out of range")
        hm = grad_cam(model, fm, class_index)
    return {
        "heatmap": [float(v) for v in hm.grid.ravel()],
        "shape": [int(hm.grid.shape[0]), int(hm.grid.shape[1])],
        "degenerate": bool(hm.degenerate),
    }


def make_handler(model: SageModel):
    model_info = {
        "arch": model.config.arch,
        "classes": list(model.class_table),
        "param_count": count_parameters(model),
        "theta": model.config.theta,
    }

    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # quiet; the service is read-only
            pass

        def _send(self, status: int, payload: dict):
            raw = json.dumps(round9(payload)).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(raw)))
            self.end_headers()
            self.wfile.write(raw)

        def do_GET(self):
            if self.path == "/health":
                self._send(200, {"status": "ok"})
            elif self.path == "/v1/model":
                self._send(200, model_info)
            else:
                self._send(404, {"error": f"no route {self.path}"})

        def do_POST(self):
            if self.path not in ("/v1/predict", "/v1/explain"):
                self._send(404, {"error": f"no route {self.path}"})
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                body = json.loads(self.rfile.read(length).decode("utf-8"))
                if not isinstance(body, dict):
                    raise _BadRequest(400, "body must be a JSON object")
                if self.path == "/v1/predict":
                    self._send(200, handle_predict(model, body))
                else:
                    self._send(200, handle_explain(model, body))
            except _BadRequest as exc:
                self._send(exc.status, {"error": str(exc)})
            except (json.JSONDecodeError, UnicodeDecodeError, ValueError) as exc:
                self._send(400, {"error": f"malformed body: {exc}"})
            except DataError as exc:
                self._send(422, {"error": str(exc)})
            except LeafgraphError as exc:
                self._send(500, {"error": str(exc)})

    return Handler


def make_server(model: SageModel, host: str = "127.0.0.1", port: int = 0):
    """Bind a threading HTTP server; port 0 picks an ephemeral port."""
    return ThreadingHTTPServer((host, port), make_handler(model))


def serve_forever(model: SageModel, host: str, port: int) -> None:
    server = make_server(model, host, port)
    try:
        server.serve_forever()
    finally:
        server.server_close()
