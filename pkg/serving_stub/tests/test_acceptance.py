"""Cross-language integration gate: the trainer's decoder driven against this
server must byte-reproduce its local hypotheses, posteriors must agree, and
concurrent requests must stay independent.
"""

import json
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import requests

import ramdec
from conftest import TOY_LEFT, TOY_RIGHT, run_ramdec
from serving_stub.model import forward, load_model


def test_criterion_9_cross_package_integration(stub_server, toy_assets, tmp_path):
    t0 = time.perf_counter()
    toy = toy_assets["toy"]

    def decode(out_path, *backend):
        proc = run_ramdec(
            "decode", "--graph", str(toy / "fst.txt"), "--words", str(toy / "words.txt"),
            "--feats", str(toy / "feats.ark"), "--left", str(TOY_LEFT), "--right", str(TOY_RIGHT),
            "--priors", str(toy_assets["priors"]), "--out", str(out_path), *backend,
        )
        assert proc.returncode == 0, proc.stderr
        return out_path.read_bytes()

    local = decode(tmp_path / "local.txt", "--am", "local", "--model", str(toy_assets["model"]))
    remote = decode(
        tmp_path / "remote.txt",
        "--am", "remote", "--url", stub_server.base_url, "--model-name", "am",
    )
    assert remote == local

    # 50 random frames: served posteriors against the trainer's local forward
    trainer_model = ramdec.load_model(toy_assets["model"])
    rng = np.random.default_rng(20240909)
    frames = rng.normal(size=(50, trainer_model.input_dim)).astype(np.float32)
    resp = requests.post(
        f"{stub_server.base_url}/v1/models/am:predict",
        data=json.dumps({"instances": [list(map(float, r)) for r in frames]}),
        headers={"Content-Type": "application/json"}, timeout=10,
    )
    assert resp.status_code == 200
    served = np.array(resp.json()["predictions"], dtype=np.float32)
    local_post = ramdec.forward(trainer_model, frames)
    assert float(np.abs(served - local_post).max()) <= 1e-4

    # 8 concurrent requests with distinct payloads return independent results
    stub = load_model(toy_assets["model"])
    payloads = [
        rng.normal(size=(int(rng.integers(1, 10)), stub.input_dim)).astype(np.float32)
        for _ in range(8)
    ]
    expected = [forward(stub, p) for p in payloads]

    def call(p):
        r = requests.post(
            f"{stub_server.base_url}/v1/models/am:predict",
            data=json.dumps({"instances": [list(map(float, row)) for row in p]}),
            headers={"Content-Type": "application/json"}, timeout=10,
        )
        assert r.status_code == 200
        return np.array(r.json()["predictions"], dtype=np.float32)

    with ThreadPoolExecutor(max_workers=8) as pool:
        results = list(pool.map(call, payloads))
    for got, want in zip(results, expected):
        assert float(np.abs(got - want).max()) <= 1e-6

    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0, f"criterion 9 took {elapsed:.1f}s, budget 30s"
    print(f"PASS criterion 9: cross-package integration ({elapsed:.1f}s)")
