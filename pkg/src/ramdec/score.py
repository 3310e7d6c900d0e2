"""Word error rate between reference and hypothesis transcripts.

Alignment is minimal-edit-distance with unit substitution/deletion/insertion
costs; the backtrace prefers match over substitution over deletion over
insertion, so reports are deterministic. WER may exceed 100% when the
hypothesis inserts more words than the reference holds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ScoringError

MATCH, SUB, DEL, INS = "match", "sub", "del", "ins"


@dataclass
class EditOp:
    op: str
    ref: str | None
    hyp: str | None


@dataclass
class UtteranceScore:
    num_ref: int
    subs: int
    dels: int
    ins: int

    @property
    def errors(self) -> int:
        return self.subs + self.dels + self.ins

    @property
    def wer_percent(self) -> float:
        if self.num_ref == 0:
            return 0.0 if self.errors == 0 else math.inf
        return 100.0 * self.errors / self.num_ref


@dataclass
class ScoreReport:
    per_utterance: dict[str, UtteranceScore] = field(default_factory=dict)

    @property
    def num_ref(self) -> int:
        return sum(u.num_ref for u in self.per_utterance.values())

    @property
    def subs(self) -> int:
        return sum(u.subs for u in self.per_utterance.values())

    @property
    def dels(self) -> int:
        return sum(u.dels for u in self.per_utterance.values())

    @property
    def ins(self) -> int:
        return sum(u.ins for u in self.per_utterance.values())

    @property
    def errors(self) -> int:
        return self.subs + self.dels + self.ins

    @property
    def wer_percent(self) -> float:
        if self.num_ref == 0:
            return 0.0 if self.errors == 0 else math.inf
        return 100.0 * self.errors / self.num_ref


def align_words(ref: list[str], hyp: list[str]) -> list[EditOp]:
    """Minimal-cost alignment of two word sequences as a list of edit ops."""
    n, m = len(ref), len(hyp)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = i
    for j in range(1, m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            same = ref[i - 1] == hyp[j - 1]
            dist[i][j] = min(
                dist[i - 1][j - 1] + (0 if same else 1),
                dist[i - 1][j] + 1,
                dist[i][j - 1] + 1,
            )
    ops: list[EditOp] = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and dist[i][j] == dist[i - 1][j - 1]:
            ops.append(EditOp(MATCH, ref[i - 1], hyp[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + 1:
            ops.append(EditOp(SUB, ref[i - 1], hyp[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            ops.append(EditOp(DEL, ref[i - 1], None))
            i = i - 1
        else:
            ops.append(EditOp(INS, None, hyp[j - 1]))
            j = j - 1
    ops.reverse()
    return ops


def _count(ops: list[EditOp], num_ref: int) -> UtteranceScore:
    return UtteranceScore(
        num_ref,
        sum(1 for o in ops if o.op == SUB),
        sum(1 for o in ops if o.op == DEL),
        sum(1 for o in ops if o.op == INS),
    )


def score_corpus(refs: dict[str, list[str]], hyps: dict[str, list[str]]) -> ScoreReport:
    """Aggregate alignment counts over utterances shared by key.

    A reference with no hypothesis counts all its words as deletions; a
    hypothesis key missing from the references is an error (pipeline
    mismatch).
    """
    for key in hyps:
        if key not in refs:
            raise ScoringError(f"hypothesis key {key!r} not present in the references")
    report = ScoreReport()
    for key, ref in refs.items():
        hyp = hyps.get(key)
        if hyp is None:
            report.per_utterance[key] = UtteranceScore(len(ref), 0, len(ref), 0)
        else:
            report.per_utterance[key] = _count(align_words(ref, hyp), len(ref))
    return report


def read_transcripts(source) -> dict[str, list[str]]:
    """Transcript file: one ``utt_key w1 w2 ...`` line per utterance."""
    out: dict[str, list[str]] = {}
    for lineno, line in enumerate(Path(source).read_text(encoding="utf-8").splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        key, words = fields[0], fields[1:]
        if key in out:
            raise ScoringError(f"{source} line {lineno}: duplicate utterance key {key!r}")
        out[key] = words
    return out


def write_transcripts(transcripts: dict[str, list[str]], dest) -> None:
    lines = [" ".join([key, *words]).rstrip() for key, words in transcripts.items()]
    Path(dest).write_text("\n".join(lines) + "\n" if lines else "", encoding="utf-8")


def format_report(report: ScoreReport) -> str:
    """Aligned per-utterance table plus the machine-readable summary line."""
    lines = []
    if report.per_utterance:
        key_width = max(len(k) for k in report.per_utterance)
        header = f"{'utterance':<{key_width}}  {'#ref':>5}  {'sub':>4}  {'del':>4}  {'ins':>4}  {'wer%':>7}"
        lines.append(header)
        for key, u in report.per_utterance.items():
            wer = "inf" if math.isinf(u.wer_percent) else f"{u.wer_percent:.2f}"
            lines.append(
                f"{key:<{key_width}}  {u.num_ref:>5}  {u.subs:>4}  {u.dels:>4}  {u.ins:>4}  {wer:>7}"
            )
    wer = "inf" if math.isinf(report.wer_percent) else f"{report.wer_percent:.2f}"
    lines.append(
        f"%WER {wer} [ {report.errors} / {report.num_ref}, "
        f"{report.ins} ins, {report.dels} del, {report.subs} sub ]"
    )
    return "\n".join(lines) + "\n"
