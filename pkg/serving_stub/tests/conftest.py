import subprocess
import sys
import threading

import pytest

from serving_stub.server import PredictServer, ServerConfig

TOY_LEFT = 1
TOY_RIGHT = 1


def run_ramdec(*args: str) -> subprocess.CompletedProcess:
    """Drive the training toolkit through its console entry point."""
    return subprocess.run(
        [sys.executable, "-m", "ramdec", *args], capture_output=True, text=True
    )


@pytest.fixture(scope="session")
def toy_assets(tmp_path_factory):
    """Toy corpus and a trained model, produced entirely via the ramdec CLI."""
    work = tmp_path_factory.mktemp("stub_toy")
    toy = work / "toy"
    egs = work / "egs"
    priors = work / "priors.txt"
    model = work / "model.bin"
    steps = [
        ("gen-toy", "--seed", "7", "--out", str(toy)),
        ("make-egs", "--feats", str(toy / "feats.ark"), "--ali", str(toy / "ali.ark"),
         "--left", str(TOY_LEFT), "--right", str(TOY_RIGHT), "--num-pdfs", "6",
         "--shards", "2", "--out", str(egs)),
        ("priors", "--ali", str(toy / "ali.ark"), "--num-pdfs", "6", "--out", str(priors)),
        ("train", "--egs", str(egs), "--layers", "16", "--epochs", "15", "--lr", "0.2",
         "--batch", "32", "--seed", "1", "--out", str(model)),
    ]
    for step in steps:
        proc = run_ramdec(*step)
        assert proc.returncode == 0, f"{step[0]} failed: {proc.stderr}"
    return {"toy": toy, "priors": priors, "model": model}


@pytest.fixture
def stub_server(toy_assets):
    cfg = ServerConfig(model_path=str(toy_assets["model"]), model_name="am", port=0)
    server = PredictServer(cfg)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()
    server.server_close()
    thread.join(timeout=5)
