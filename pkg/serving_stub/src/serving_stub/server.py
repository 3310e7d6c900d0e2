"""HTTP server for the JSON predict protocol.

Endpoints:
    POST /v1/models/{name}:predict   body {"instances": [[f...], ...]}
    GET  /v1/models/{name}           liveness + model dimensions

Success bodies are 200 with {"predictions": [[p...], ...]} (floats printed
with 9 significant digits); failures are 400/404 with {"error": "<message>"}.
The model is loaded once at startup and never mutated, so the threading
server may run handlers concurrently.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

import numpy as np

from .model import StubModel, forward_frame, load_model

log = logging.getLogger("serving_stub")

DEFAULT_PORT = 8501
DEFAULT_MAX_BODY = 16 * 1024 * 1024


@dataclass
class ServerConfig:
    model_path: str
    model_name: str = "am"
    port: int = DEFAULT_PORT
    host: str = "127.0.0.1"
    max_body_bytes: int = DEFAULT_MAX_BODY

    def __post_init__(self) -> None:
        if not (0 <= self.port <= 65535):
            raise ValueError(f"port {self.port} out of range")
        if self.max_body_bytes < 1:
            raise ValueError("max_body_bytes must be positive")
        if not Path(self.model_path).is_file():
            raise FileNotFoundError(f"model file {self.model_path} does not exist")


def _format9(value: float) -> str:
    s = "%.9g" % value
    if "." not in s and "e" not in s:
        s += ".0"
    return s


def render_predictions(rows) -> str:
    return (
        '{"predictions":['
        + ",".join("[" + ",".join(_format9(float(v)) for v in row) + "]" for row in rows)
        + "]}"
    )


class PredictServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, cfg: ServerConfig):
        self.cfg = cfg
        self.model: StubModel = load_model(cfg.model_path)
        super().__init__((cfg.host, cfg.port), _Handler)
        log.info(
            "loaded model %s: input dim %d, %d pdfs",
            cfg.model_path, self.model.input_dim, self.model.num_pdfs,
        )

    @property
    def base_url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"


class _Handler(BaseHTTPRequestHandler):
    server: PredictServer

    def log_message(self, fmt, *args):
        log.debug("%s " + fmt, self.client_address[0], *args)

    def do_GET(self):
        name = self.server.cfg.model_name
        if self.path != f"/v1/models/{name}":
            self._send(404, {"error": f"no model at {self.path}"})
            return
        model = self.server.model
        self._send(200, {
            "model_name": name,
            "input_dim": model.input_dim,
            "num_pdfs": model.num_pdfs,
        })

    def do_POST(self):
        name = self.server.cfg.model_name
        if self.path != f"/v1/models/{name}:predict":
            self._send(404, {"error": f"no model at {self.path}"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
        except ValueError:
            self._send(400, {"error": "bad Content-Length"})
            return
        if length > self.server.cfg.max_body_bytes:
            self._send(400, {"error": f"request body exceeds {self.server.cfg.max_body_bytes} bytes"})
            return
        body = self.rfile.read(length)
        try:
            frames = self._parse_instances(body)
        except ValueError as e:
            self._send(400, {"error": str(e)})
            return
        model = self.server.model
        rows = [forward_frame(model, frames[i]) for i in range(frames.shape[0])]
        self._send_raw(200, render_predictions(rows))

    def _parse_instances(self, body: bytes) -> np.ndarray:
        try:
            payload = json.loads(body)
        except json.JSONDecodeError as e:
            raise ValueError(f"body is not valid JSON: {e}") from None
        if not isinstance(payload, dict) or "instances" not in payload:
            raise ValueError("body must be a JSON object with an 'instances' field")
        try:
            frames = np.array(payload["instances"], dtype=np.float32)
        except (ValueError, TypeError):
            raise ValueError("'instances' must be a rectangular numeric array") from None
        model = self.server.model
        if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] != model.input_dim:
            raise ValueError(
                f"expected a non-empty array of frames with dim {model.input_dim}, "
                f"got shape {tuple(frames.shape)}"
            )
        if not np.all(np.isfinite(frames)):
            raise ValueError("instances contain non-finite values")
        return frames

    def _send(self, status: int, obj) -> None:
        self._send_raw(status, json.dumps(obj))

    def _send_raw(self, status: int, body: str) -> None:
        data = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)
