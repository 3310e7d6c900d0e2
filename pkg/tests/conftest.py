import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import PredictDouble

from ramdec import am, cli
from ramdec.mlp import load_model
from ramdec.toy import ToySpec, generate

TOY_SEED = 7
TOY_LEFT = 1
TOY_RIGHT = 1


@pytest.fixture(scope="session")
def toy_dir(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("toy")
    generate(ToySpec(seed=TOY_SEED), out)
    return out


@pytest.fixture(scope="session")
def toy_model(toy_dir, tmp_path_factory):
    """Toy task trained once per session: paths for egs, priors, and model."""
    work = tmp_path_factory.mktemp("toy_model")
    egs = work / "egs"
    priors = work / "priors.txt"
    model = work / "model.bin"
    assert cli.main([
        "make-egs", "--feats", str(toy_dir / "feats.ark"), "--ali", str(toy_dir / "ali.ark"),
        "--left", str(TOY_LEFT), "--right", str(TOY_RIGHT), "--num-pdfs", "6",
        "--shards", "2", "--out", str(egs),
    ]) == 0
    assert cli.main([
        "priors", "--ali", str(toy_dir / "ali.ark"), "--num-pdfs", "6", "--out", str(priors),
    ]) == 0
    assert cli.main([
        "train", "--egs", str(egs), "--layers", "16", "--epochs", "15", "--lr", "0.2",
        "--batch", "32", "--seed", "1", "--out", str(model),
    ]) == 0
    return {"toy_dir": toy_dir, "egs": egs, "priors": priors, "model": model}


@pytest.fixture
def predict_double(toy_model):
    """Protocol test double serving the toy model's posteriors."""
    model = load_model(toy_model["model"])
    double = PredictDouble(lambda frames: am.local_propagate(model, frames), model.input_dim)
    yield double
    double.close()
