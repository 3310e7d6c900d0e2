"""Deterministic miniature corpus so the whole pipeline can run at desk scale.

Each word is a left-to-right chain of its own pdfs with self-loops, looping
back to the start state, so every generated alignment is a path through the
generated graph. Frame features are Gaussian around well-separated per-pdf
means, which makes 0% WER an achievable, non-flaky target.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .ark import AlignmentVector, FeatureMatrix, write_int_vector_ark, write_matrix_ark
from .fst import Arc, DecodingGraph, SymbolTable, emit_fst_text
from .score import write_transcripts

ARC_WEIGHT = 0.5


@dataclass(frozen=True)
class ToySpec:
    seed: int = 0
    num_words: int = 3
    num_pdfs: int = 6
    feature_dim: int = 2
    utterances: int = 20
    frames_per_word: int = 5
    class_mean_separation: float = 4.0
    noise_stddev: float = 0.5

    def __post_init__(self) -> None:
        for f in fields(self):
            if f.name != "seed" and getattr(self, f.name) <= 0:
                raise ValueError(f"{f.name} must be positive")
        if self.num_pdfs % self.num_words != 0:
            raise ValueError(
                f"num_pdfs ({self.num_pdfs}) must be divisible by num_words ({self.num_words})"
            )
        if self.frames_per_word < self.pdfs_per_word:
            raise ValueError("frames_per_word must cover every pdf in a word's chain")
        if self.class_mean_separation / self.noise_stddev < 4:
            raise ValueError("class separation must be at least 4x the noise level")

    @property
    def pdfs_per_word(self) -> int:
        return self.num_pdfs // self.num_words


def word_pdfs(spec: ToySpec, word: int) -> list[int]:
    """Pdf chain owned by word id ``word`` (1-based)."""
    base = (word - 1) * spec.pdfs_per_word
    return list(range(base, base + spec.pdfs_per_word))


def build_graph(spec: ToySpec) -> DecodingGraph:
    """Word chains with self-loops and an epsilon loop back to the start."""
    arcs: list[Arc] = []
    next_state = 1
    for word in range(1, spec.num_words + 1):
        prev = 0
        for j, pdf in enumerate(word_pdfs(spec, word)):
            state = next_state
            next_state += 1
            olabel = word if j == 0 else 0
            arcs.append(Arc(prev, state, pdf + 1, olabel, ARC_WEIGHT))
            arcs.append(Arc(state, state, pdf + 1, 0, ARC_WEIGHT))
            prev = state
        arcs.append(Arc(prev, 0, 0, 0, ARC_WEIGHT))
    return DecodingGraph(next_state, 0, arcs, {0: 0.0})


def class_means(spec: ToySpec) -> np.ndarray:
    """Deterministic per-pdf means: on a circle for dim >= 2, on a line for dim 1."""
    means = np.zeros((spec.num_pdfs, spec.feature_dim), dtype=np.float64)
    if spec.feature_dim == 1:
        means[:, 0] = spec.class_mean_separation * np.arange(spec.num_pdfs)
    else:
        angles = 2.0 * np.pi * np.arange(spec.num_pdfs) / spec.num_pdfs
        means[:, 0] = spec.class_mean_separation * np.cos(angles)
        means[:, 1] = spec.class_mean_separation * np.sin(angles)
    return means


def generate(spec: ToySpec, out_dir) -> dict[str, str]:
    """Write graph, symbols, features, alignments, and references into out_dir.

    Deterministic: the same spec always produces byte-identical files.
    Returns a manifest mapping artifact names to paths.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(spec.seed)
    means = class_means(spec)

    graph = build_graph(spec)
    (out / "fst.txt").write_text(emit_fst_text(graph), encoding="utf-8")

    symbol_lines = ["<eps> 0"] + [f"w{w} {w}" for w in range(1, spec.num_words + 1)]
    (out / "words.txt").write_text("\n".join(symbol_lines) + "\n", encoding="utf-8")

    feats: list[FeatureMatrix] = []
    alis: list[AlignmentVector] = []
    refs: dict[str, list[str]] = {}
    for i in range(spec.utterances):
        key = f"utt{i + 1:04d}"
        n_words = int(rng.integers(2, 5))
        # force a deterministic first word so every pdf appears in the corpus
        words = [(i % spec.num_words) + 1] + [
            int(w) for w in rng.integers(1, spec.num_words + 1, size=n_words - 1)
        ]
        labels: list[int] = []
        for w in words:
            chain = word_pdfs(spec, w)
            base, rem = divmod(spec.frames_per_word, len(chain))
            for j, pdf in enumerate(chain):
                labels.extend([pdf] * (base + (1 if j < rem else 0)))
        label_arr = np.array(labels, dtype=np.int32)
        noise = rng.normal(0.0, spec.noise_stddev, size=(len(labels), spec.feature_dim))
        data = (means[label_arr] + noise).astype(np.float32)
        feats.append(FeatureMatrix(key, data))
        alis.append(AlignmentVector(key, label_arr))
        refs[key] = [f"w{w}" for w in words]

    write_matrix_ark(feats, out / "feats.ark", mode="binary")
    write_int_vector_ark(alis, out / "ali.ark", mode="binary")
    write_transcripts(refs, out / "ref.txt")

    names = {
        "fst": "fst.txt",
        "words": "words.txt",
        "feats": "feats.ark",
        "ali": "ali.ark",
        "ref": "ref.txt",
    }
    # manifest paths are relative so identical specs give identical trees
    lines = [f"{name} {rel}" for name, rel in names.items()]
    lines += [f"spec.{f.name} {getattr(spec, f.name)}" for f in fields(spec)]
    (out / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return {name: str(out / rel) for name, rel in names.items()}


def symbol_table(spec: ToySpec) -> SymbolTable:
    return SymbolTable([("<eps>", 0)] + [(f"w{w}", w) for w in range(1, spec.num_words + 1)])
