"""Acoustic scores for the decoder: posteriors from a local model or a remote
predict endpoint, turned into log pseudo-likelihoods by dividing out priors.

Wire format (JSON over HTTP POST to ``{base_url}/v1/models/{name}:predict``):
request ``{"instances": [[f...], ...]}``, one inner array per frame; success
``{"predictions": [[p...], ...]}``; failure ``{"error": "<message>"}`` with a
non-2xx status. Floats travel with 9 significant digits.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass

import numpy as np
import requests

from .ark import FeatureMatrix, format_float
from .dataset import PriorVector
from .errors import ProtocolError, RemoteError
from .mlp import MlpModel, forward

RETRY_BACKOFF_S = 0.1
ROW_SUM_TOLERANCE = 1e-3


@dataclass(frozen=True)
class RemoteConfig:
    base_url: str
    model_name: str = "am"
    chunk_size: int = 64
    timeout_ms: int = 5000
    max_retries: int = 2

    def __post_init__(self) -> None:
        if self.chunk_size < 1:
            raise ValueError(f"chunk_size must be >= 1, got {self.chunk_size}")
        if self.timeout_ms <= 0 or self.max_retries < 0:
            raise ValueError("timeout_ms must be positive and max_retries non-negative")

    @property
    def predict_url(self) -> str:
        return f"{self.base_url.rstrip('/')}/v1/models/{self.model_name}:predict"


def _frames(spliced) -> np.ndarray:
    if isinstance(spliced, FeatureMatrix):
        return spliced.data
    return np.asarray(spliced, dtype=np.float32)


def local_propagate(model: MlpModel, spliced) -> np.ndarray:
    """Posterior matrix for all frames of one utterance, computed in process."""
    return forward(model, _frames(spliced))


def serialize_request(chunk: np.ndarray) -> str:
    """Request body for one chunk of frames, floats at 9 significant digits."""
    chunk = np.asarray(chunk)
    if chunk.ndim != 2 or chunk.shape[0] < 1:
        raise ValueError(f"chunk must be a non-empty 2-D array, got shape {chunk.shape}")
    rows = ",".join(
        "[" + ",".join(format_float(float(v)) for v in row) + "]" for row in chunk
    )
    return '{"instances":[' + rows + "]}"


def _parse_predictions(body: str, expected_t: int) -> np.ndarray:
    try:
        payload = json.loads(body)
    except json.JSONDecodeError as e:
        raise ProtocolError(f"response is not valid JSON: {e}") from None
    if not isinstance(payload, dict):
        raise ProtocolError(f"response must be a JSON object, got {type(payload).__name__}")
    if "error" in payload:
        raise RemoteError(str(payload["error"]))
    if "predictions" not in payload:
        raise ProtocolError("response has neither 'predictions' nor 'error'")
    try:
        post = np.array(payload["predictions"], dtype=np.float32)
    except ValueError as e:
        raise ProtocolError(f"predictions are not a rectangular numeric array: {e}") from None
    if post.ndim != 2 or post.shape[0] != expected_t:
        shape = post.shape if post.ndim == 2 else f"{post.ndim}-D"
        raise ProtocolError(f"prediction shape {shape} does not match {expected_t} request frames")
    if np.any(post < 0):
        raise ProtocolError("predictions contain negative probabilities")
    sums = post.sum(axis=1, dtype=np.float64)
    worst = float(np.abs(sums - 1.0).max()) if sums.size else 0.0
    if worst > ROW_SUM_TOLERANCE:
        raise ProtocolError(f"prediction row sums deviate from 1 by {worst:.2e}")
    return post


def parse_response(body: str, expected_t: int, expected_k: int) -> np.ndarray:
    """Posterior matrix from a predict response; validates shape and row sums."""
    post = _parse_predictions(body, expected_t)
    if post.shape[1] != expected_k:
        raise ProtocolError(f"prediction rows carry {post.shape[1]} classes, expected {expected_k}")
    return post


def _post_chunk(cfg: RemoteConfig, chunk: np.ndarray) -> np.ndarray:
    body = serialize_request(chunk)
    last_error: Exception | None = None
    for _ in range(cfg.max_retries + 1):
        try:
            resp = requests.post(
                cfg.predict_url,
                data=body.encode("utf-8"),
                headers={"Content-Type": "application/json"},
                timeout=cfg.timeout_ms / 1000.0,
            )
        except requests.RequestException as e:
            last_error = e
            time.sleep(RETRY_BACKOFF_S)
            continue
        if resp.status_code // 100 != 2:
            # server-reported failure: deterministic, retrying cannot help
            try:
                payload = json.loads(resp.text)
                message = payload.get("error") if isinstance(payload, dict) else None
            except json.JSONDecodeError:
                message = None
            if message:
                raise RemoteError(str(message))
            raise RemoteError(f"predict request failed with status {resp.status_code}")
        return _parse_predictions(resp.text, chunk.shape[0])
    raise RemoteError(
        f"predict request to {cfg.predict_url} failed after {cfg.max_retries + 1} attempts: {last_error}"
    )


def remote_propagate(cfg: RemoteConfig, spliced) -> np.ndarray:
    """Posteriors via the predict endpoint, one POST per chunk of frames.

    Frames are sent in consecutive chunks of ``cfg.chunk_size`` and the rows
    are reassembled in order; each request is retried up to
    ``cfg.max_retries`` times with a short backoff.
    """
    frames = _frames(spliced)
    if frames.shape[0] < 1:
        return np.zeros((0, 0), dtype=np.float32)
    chunks = [
        _post_chunk(cfg, frames[i:i + cfg.chunk_size])
        for i in range(0, frames.shape[0], cfg.chunk_size)
    ]
    widths = {c.shape[1] for c in chunks}
    if len(widths) != 1:
        raise ProtocolError(f"chunks disagree on pdf count: {sorted(widths)}")
    return np.concatenate(chunks, axis=0)


def loglikes(post: np.ndarray, priors: PriorVector, eps: float = 1e-10) -> np.ndarray:
    """Log pseudo-likelihoods: ``log(posterior + eps) - log(prior)`` per entry."""
    if eps <= 0:
        raise ValueError(f"eps must be > 0, got {eps}")
    post = np.asarray(post)
    if post.ndim != 2 or post.shape[1] != priors.num_pdfs:
        raise ValueError(
            f"posterior shape {post.shape} does not match {priors.num_pdfs} priors"
        )
    return (np.log(post + eps) - np.log(priors.probs)[None, :]).astype(np.float32)
