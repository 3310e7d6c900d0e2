"""Independent oracles and harness pieces shared by the test suite.

Everything here is deliberately written without going through the code paths
it checks: byte layouts are hand-packed with ``struct``, best-path costs come
from exhaustive path enumeration, and edit distance from the textbook
recursion.
"""

from __future__ import annotations

import json
import math
import struct
import threading
from functools import lru_cache
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from ramdec.fst import Arc, DecodingGraph


def hand_encode_matrix(key: str, rows: list[list[float]]) -> bytes:
    """Normative binary matrix entry, packed by hand."""
    out = bytearray()
    out += key.encode("utf-8") + b" "
    out += b"\x00B" + b"FM "
    out += b"\x04" + struct.pack("<i", len(rows))
    out += b"\x04" + struct.pack("<i", len(rows[0]))
    for row in rows:
        for v in row:
            out += struct.pack("<f", v)
    return bytes(out)


def hand_encode_int_vector(key: str, values: list[int]) -> bytes:
    """Normative binary int-vector entry, packed by hand."""
    out = bytearray()
    out += key.encode("utf-8") + b" "
    out += b"\x00B" + b"\x04\x04" + struct.pack("<i", len(values))
    for v in values:
        out += struct.pack("<i", v)
    return bytes(out)


GOLDEN_MATRICES = [
    ("utt1", [[1.0, 2.0]]),
    ("spk1-utt2", [[-1.5, 0.25, 3.0], [4.0, -5.5, 6.75]]),
]
GOLDEN_INT_VECTORS = [
    ("utt1", [3, 0, 7]),
    ("utt2", []),
    ("utt3", [0, 1, 2, 2147483647]),
]


def golden_matrix_bytes() -> bytes:
    return b"".join(hand_encode_matrix(k, rows) for k, rows in GOLDEN_MATRICES)


def golden_int_vector_bytes() -> bytes:
    return b"".join(hand_encode_int_vector(k, v) for k, v in GOLDEN_INT_VECTORS)


def brute_force_best_cost(g: DecodingGraph, ll: np.ndarray, acoustic_scale: float) -> float:
    """Minimum cost over every label-consistent complete path, by enumeration.

    Epsilon arcs may appear anywhere but a state is not revisited within one
    frame, which is exact as long as epsilon cycles have non-negative weight
    (the random instances only use non-negative arc weights).
    """
    num_frames = ll.shape[0]
    best = math.inf

    stack = [(g.start, 0, 0.0, frozenset({g.start}))]
    while stack:
        state, t, cost, eps_seen = stack.pop()
        if t == num_frames and state in g.final_costs:
            best = min(best, cost + g.final_costs[state])
        for arc in g.arcs_from(state):
            if arc.ilabel == 0:
                if arc.dst in eps_seen:
                    continue
                stack.append((arc.dst, t, cost + arc.weight, eps_seen | {arc.dst}))
            elif t < num_frames:
                step = arc.weight - acoustic_scale * float(ll[t, arc.ilabel - 1])
                stack.append((arc.dst, t + 1, cost + step, frozenset({arc.dst})))
    return best


def enumerate_word_sequences(g: DecodingGraph, num_frames: int) -> set[tuple[int, ...]]:
    """All word sequences spelled by complete paths consuming num_frames frames."""
    results: set[tuple[int, ...]] = set()
    stack = [(g.start, 0, (), frozenset({g.start}))]
    while stack:
        state, t, words, eps_seen = stack.pop()
        if t == num_frames and state in g.final_costs:
            results.add(words)
        for arc in g.arcs_from(state):
            extended = words + ((arc.olabel,) if arc.olabel else ())
            if arc.ilabel == 0:
                if arc.dst in eps_seen:
                    continue
                stack.append((arc.dst, t, extended, eps_seen | {arc.dst}))
            elif t < num_frames:
                stack.append((arc.dst, t + 1, extended, frozenset({arc.dst})))
    return results


def random_decode_instance(rng: np.random.Generator):
    """A small random graph plus loglikes: <=8 states, <=12 arcs, <=4 pdfs, <=6 frames."""
    num_states = int(rng.integers(2, 9))
    num_pdfs = int(rng.integers(1, 5))
    num_frames = int(rng.integers(1, 7))
    num_arcs = int(rng.integers(num_states, 13))
    arcs = []
    for i in range(num_arcs):
        # the text grammar names the start state on the first line, so the
        # start must own at least one arc (or be final); pin the first arc
        src = 0 if i == 0 else int(rng.integers(0, num_states))
        dst = int(rng.integers(0, num_states))
        ilabel = 0 if rng.random() < 0.25 else int(rng.integers(1, num_pdfs + 1))
        olabel = int(rng.integers(0, 4))
        weight = float(np.round(rng.uniform(0.0, 2.0), 3))
        arcs.append(Arc(src, dst, ilabel, olabel, weight))
    final_costs = {
        s: float(np.round(rng.uniform(0.0, 1.0), 3))
        for s in range(num_states)
        if rng.random() < 0.3
    }
    if not final_costs:
        final_costs[num_states - 1] = 0.0
    # the text grammar cannot express unreferenced states; clamp to what is used
    referenced = {0} | {a.src for a in arcs} | {a.dst for a in arcs} | set(final_costs)
    num_states = max(referenced) + 1
    final_costs = {s: c for s, c in final_costs.items() if s < num_states}
    g = DecodingGraph(num_states, 0, arcs, final_costs)
    logits = rng.normal(size=(num_frames, num_pdfs))
    post = np.exp(logits - logits.max(axis=1, keepdims=True))
    post /= post.sum(axis=1, keepdims=True)
    ll = np.log(post).astype(np.float32)
    return g, ll


def naive_levenshtein(a: list[str], b: list[str]) -> int:
    """Textbook recursive edit distance with unit costs."""
    ta, tb = tuple(a), tuple(b)

    @lru_cache(maxsize=None)
    def dist(i: int, j: int) -> int:
        if i == 0:
            return j
        if j == 0:
            return i
        return min(
            dist(i - 1, j) + 1,
            dist(i, j - 1) + 1,
            dist(i - 1, j - 1) + (ta[i - 1] != tb[j - 1]),
        )

    return dist(len(ta), len(tb))


def _format9(value: float) -> str:
    s = "%.9g" % value
    if "." not in s and "e" not in s:
        s += ".0"
    return s


class PredictDouble:
    """In-process HTTP server speaking the predict wire format.

    Posteriors are computed one frame at a time through the supplied callable
    so responses do not depend on how the client chunks its requests.
    """

    def __init__(self, frame_fn, input_dim: int, model_name: str = "am"):
        double = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                double.requests_seen += 1
                if self.path != f"/v1/models/{double.model_name}:predict":
                    self._reply(404, {"error": f"model for path {self.path} not found"})
                    return
                try:
                    length = int(self.headers.get("Content-Length", "0"))
                    payload = json.loads(self.rfile.read(length))
                    instances = payload["instances"]
                    frames = np.array(instances, dtype=np.float32)
                    if frames.ndim != 2 or frames.shape[1] != double.input_dim:
                        raise ValueError(f"expected frames of dim {double.input_dim}")
                except Exception as e:  # malformed request
                    self._reply(400, {"error": str(e)})
                    return
                rows = [double.frame_fn(frames[i:i + 1])[0] for i in range(frames.shape[0])]
                body = (
                    '{"predictions":['
                    + ",".join("[" + ",".join(_format9(float(v)) for v in row) + "]" for row in rows)
                    + "]}"
                )
                self._reply_raw(200, body)

            def _reply(self, status, obj):
                self._reply_raw(status, json.dumps(obj))

            def _reply_raw(self, status, body: str):
                data = body.encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

        self.frame_fn = frame_fn
        self.input_dim = input_dim
        self.model_name = model_name
        self.requests_seen = 0
        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def base_url(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def close(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)
