"""Turns raw features and alignments into spliced, labeled, sharded training data.

Splicing concatenates each frame with its left/right context (edges replicated).
Shards are whole utterances balanced greedily by frame count; each shard is a
pair of archives (spliced features + labels) so the same codec serves both
training and decoding.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .ark import (
    AlignmentVector,
    FeatureMatrix,
    read_int_vector_ark,
    read_matrix_ark,
    write_int_vector_ark,
    write_matrix_ark,
)
from .errors import DataError

log = logging.getLogger(__name__)

DEFAULT_PRIOR_FLOOR = 1e-8
EGS_META_NAME = "egs.json"


@dataclass(frozen=True)
class SplicingConfig:
    """Context window: ``left`` frames before and ``right`` frames after each frame."""

    left: int = 0
    right: int = 0

    def __post_init__(self) -> None:
        if self.left < 0 or self.right < 0:
            raise ValueError(f"context lengths must be non-negative, got left={self.left} right={self.right}")

    @property
    def window(self) -> int:
        return self.left + self.right + 1


@dataclass
class TrainingExample:
    input: np.ndarray
    label: int


@dataclass
class ShardPlan:
    num_shards: int
    assignment: dict[str, int]


@dataclass
class PriorVector:
    """Class prior probabilities: non-negative, summing to one."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        self.probs = np.asarray(self.probs, dtype=np.float64).reshape(-1)
        if self.probs.size < 1:
            raise ValueError("prior vector must have at least one class")
        if np.any(self.probs < 0):
            raise ValueError("prior probabilities must be non-negative")
        total = float(self.probs.sum())
        if not np.isclose(total, 1.0, rtol=0, atol=1e-6):
            raise ValueError(f"prior probabilities must sum to 1, got {total}")
        self.probs = self.probs / total

    @property
    def num_pdfs(self) -> int:
        return int(self.probs.shape[0])


def splice(m: FeatureMatrix, cfg: SplicingConfig) -> FeatureMatrix:
    """Concatenate each frame with its context window, clamping at the edges.

    Output row t is ``concat(frames t-L .. t+R)`` with out-of-range indices
    replaced by the first/last frame, so the result has shape
    ``(T, (L+R+1)*D)`` and the center D-slice of row t equals frame t.
    """
    t = m.rows
    idx = np.arange(t)[:, None] + np.arange(-cfg.left, cfg.right + 1)[None, :]
    np.clip(idx, 0, t - 1, out=idx)
    data = m.data[idx].reshape(t, cfg.window * m.cols)
    return FeatureMatrix(m.key, data)


def build_examples(
    feats: FeatureMatrix,
    ali: AlignmentVector,
    cfg: SplicingConfig,
    num_pdfs: int,
) -> list[TrainingExample]:
    """Pair spliced frames with alignment labels, one example per frame."""
    if feats.key != ali.key:
        raise DataError(f"feature/alignment key mismatch: {feats.key!r} vs {ali.key!r}")
    if feats.rows != len(ali):
        raise DataError(
            f"frame count mismatch for key {feats.key!r}: {feats.rows} feature frames vs {len(ali)} labels"
        )
    _check_labels(ali, num_pdfs)
    spliced = splice(feats, cfg)
    return [TrainingExample(spliced.data[t], int(ali.pdf_ids[t])) for t in range(feats.rows)]


def _check_labels(ali: AlignmentVector, num_pdfs: int) -> None:
    if len(ali) and int(ali.pdf_ids.max()) >= num_pdfs:
        bad = int(ali.pdf_ids.max())
        raise DataError(f"label {bad} out of range for key {ali.key!r}: num_pdfs={num_pdfs}")


def shard(utterances: Sequence[tuple[str, int]], num_shards: int) -> ShardPlan:
    """Assign utterances greedily, in input order, to the lightest shard by frames.

    Ties pick the lowest shard index. Shards may end up empty when there are
    fewer utterances than shards.
    """
    if num_shards < 1:
        raise ValueError(f"num_shards must be >= 1, got {num_shards}")
    loads = [0] * num_shards
    assignment: dict[str, int] = {}
    for key, frames in utterances:
        if key in assignment:
            raise DataError(f"duplicate utterance key {key!r} in shard input")
        lightest = min(range(num_shards), key=lambda i: (loads[i], i))
        assignment[key] = lightest
        loads[lightest] += frames
    return ShardPlan(num_shards, assignment)


def compute_priors(
    alis: Iterable[AlignmentVector],
    num_pdfs: int,
    floor: float = DEFAULT_PRIOR_FLOOR,
) -> PriorVector:
    """Relative label frequencies, floored and renormalized to a distribution."""
    if floor < 0:
        raise ValueError(f"floor must be >= 0, got {floor}")
    counts = np.zeros(num_pdfs, dtype=np.int64)
    for ali in alis:
        _check_labels(ali, num_pdfs)
        counts += np.bincount(ali.pdf_ids, minlength=num_pdfs)
    total = int(counts.sum())
    if total == 0:
        raise DataError("cannot compute priors from zero frames")
    probs = counts / total
    probs = np.maximum(probs, floor)
    probs /= probs.sum()
    return PriorVector(probs)


def write_priors(pv: PriorVector, dest) -> None:
    """Priors file: line 1 is the class count, line 2 the probabilities."""
    text = f"{pv.num_pdfs}\n" + " ".join("%.12g" % p for p in pv.probs) + "\n"
    path = Path(dest)
    path.write_text(text, encoding="utf-8")


def read_priors(source) -> PriorVector:
    lines = Path(source).read_text(encoding="utf-8").splitlines()
    if len(lines) < 2:
        raise DataError(f"priors file {source} must have a count line and a values line")
    try:
        k = int(lines[0].strip())
        probs = np.array([float(t) for t in lines[1].split()], dtype=np.float64)
    except ValueError as e:
        raise DataError(f"priors file {source} is malformed: {e}") from None
    if probs.shape[0] != k:
        raise DataError(f"priors file {source} announces {k} classes but carries {probs.shape[0]} values")
    try:
        return PriorVector(probs)
    except ValueError as e:
        raise DataError(f"priors file {source} is invalid: {e}") from None


def build_egs_dir(
    feats_source,
    ali_source,
    cfg: SplicingConfig,
    num_pdfs: int,
    num_shards: int,
    out_dir,
) -> dict:
    """Splice, label, and shard a corpus into ``shard_<i>/{feats,labels}.ark``.

    Returns the metadata dict that is also written to ``egs.json``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    alis = {a.key: a for a in read_int_vector_ark(ali_source)}
    feats = list(read_matrix_ark(feats_source))
    if not feats:
        raise DataError("feature archive is empty")
    dim = feats[0].cols
    for m in feats:
        if m.cols != dim:
            raise DataError(f"inconsistent feature dim for key {m.key!r}: {m.cols} vs {dim}")
        if m.key not in alis:
            raise DataError(f"no alignment for key {m.key!r}")
        if m.rows != len(alis[m.key]):
            raise DataError(
                f"frame count mismatch for key {m.key!r}: {m.rows} feature frames vs {len(alis[m.key])} labels"
            )
        _check_labels(alis[m.key], num_pdfs)
    unused = set(alis) - {m.key for m in feats}
    if unused:
        log.warning("%d alignment keys have no features and are ignored", len(unused))

    plan = shard([(m.key, m.rows) for m in feats], num_shards)
    for i in range(num_shards):
        shard_dir = out / f"shard_{i}"
        shard_dir.mkdir(exist_ok=True)
        members = [m for m in feats if plan.assignment[m.key] == i]
        write_matrix_ark([splice(m, cfg) for m in members], shard_dir / "feats.ark", mode="binary")
        write_int_vector_ark([alis[m.key] for m in members], shard_dir / "labels.ark", mode="binary")

    meta = {
        "input_dim": cfg.window * dim,
        "feature_dim": dim,
        "num_pdfs": num_pdfs,
        "left": cfg.left,
        "right": cfg.right,
        "num_shards": num_shards,
        "frames": int(sum(m.rows for m in feats)),
        "utterances": len(feats),
    }
    (out / EGS_META_NAME).write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return meta


def read_egs_meta(egs_dir) -> dict:
    meta_path = Path(egs_dir) / EGS_META_NAME
    if not meta_path.exists():
        raise DataError(f"{meta_path} not found: not an examples directory?")
    return json.loads(meta_path.read_text(encoding="utf-8"))


def load_egs_dir(egs_dir) -> tuple[dict, list[tuple[np.ndarray, np.ndarray]]]:
    """Load every shard as an (inputs, labels) array pair."""
    egs = Path(egs_dir)
    meta = read_egs_meta(egs)
    shards = []
    for i in range(meta["num_shards"]):
        shard_dir = egs / f"shard_{i}"
        mats = list(read_matrix_ark(shard_dir / "feats.ark"))
        alis = {a.key: a for a in read_int_vector_ark(shard_dir / "labels.ark")}
        if not mats:
            shards.append((
                np.zeros((0, meta["input_dim"]), dtype=np.float32),
                np.zeros(0, dtype=np.int32),
            ))
            continue
        xs, ys = [], []
        for m in mats:
            if m.key not in alis:
                raise DataError(f"shard {i}: no labels for key {m.key!r}")
            ali = alis[m.key]
            if m.rows != len(ali):
                raise DataError(f"shard {i}: frame mismatch for key {m.key!r}")
            xs.append(m.data)
            ys.append(ali.pdf_ids)
        x = np.concatenate(xs, axis=0)
        y = np.concatenate(ys, axis=0)
        if x.shape[1] != meta["input_dim"]:
            raise DataError(f"shard {i}: input dim {x.shape[1]} does not match metadata {meta['input_dim']}")
        _check_labels(AlignmentVector(f"shard_{i}", y), meta["num_pdfs"])
        shards.append((x, y))
    return meta, shards
