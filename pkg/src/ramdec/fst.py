"""Decoding graph (transducer over tropical weights) and word symbol table.

Text grammar, whitespace separated, one record per line:
    ``src dst ilabel olabel [weight]``   arc (missing weight = 0)
    ``state [weight]``                   final state
The first line's first field names the start state. Input label 0 is epsilon;
input label k > 0 stands for pdf id k-1. Output labels are word ids, 0 for
epsilon. Costs add along paths; the best path is the minimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import FstError

EPSILON = 0


@dataclass(frozen=True)
class Arc:
    src: int
    dst: int
    ilabel: int
    olabel: int
    weight: float


class DecodingGraph:
    """Immutable after construction; arcs are grouped by source state in file order."""

    def __init__(self, num_states: int, start: int, arcs: list[Arc], final_costs: dict[int, float]):
        if num_states < 1:
            raise FstError("graph must have at least one state")
        if not (0 <= start < num_states):
            raise FstError(f"start state {start} out of range for {num_states} states")
        self.num_states = num_states
        self.start = start
        self.final_costs = dict(final_costs)
        self._arcs: list[list[Arc]] = [[] for _ in range(num_states)]
        for arc in arcs:
            if not (0 <= arc.src < num_states and 0 <= arc.dst < num_states):
                raise FstError(f"arc {arc} references a state outside 0..{num_states - 1}")
            self._arcs[arc.src].append(arc)
        self.num_arcs = len(arcs)

    def arcs_from(self, state: int) -> list[Arc]:
        return self._arcs[state]

    def is_final(self, state: int) -> bool:
        return state in self.final_costs

    def final_cost(self, state: int) -> float:
        return self.final_costs[state]

    def max_ilabel(self) -> int:
        return max((a.ilabel for arcs in self._arcs for a in arcs), default=0)


def _field_int(tok: str, lineno: int, what: str) -> int:
    try:
        value = int(tok)
    except ValueError:
        raise FstError(f"line {lineno}: non-numeric {what} {tok!r}") from None
    if value < 0:
        raise FstError(f"line {lineno}: negative {what} {value}")
    return value


def _field_float(tok: str, lineno: int, what: str) -> float:
    try:
        value = float(tok)
    except ValueError:
        raise FstError(f"line {lineno}: non-numeric {what} {tok!r}") from None
    if not math.isfinite(value):
        raise FstError(f"line {lineno}: non-finite {what} {tok!r}")
    return value


def parse_fst_text(text: str) -> DecodingGraph:
    """Parse the text grammar above. States are numbered densely from the file."""
    arcs: list[Arc] = []
    final_costs: dict[int, float] = {}
    start: int | None = None
    max_state = -1
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) in (1, 2):
            state = _field_int(fields[0], lineno, "state id")
            cost = _field_float(fields[1], lineno, "final cost") if len(fields) == 2 else 0.0
            final_costs[state] = cost
            max_state = max(max_state, state)
        elif len(fields) in (4, 5):
            src = _field_int(fields[0], lineno, "source state")
            dst = _field_int(fields[1], lineno, "destination state")
            ilabel = _field_int(fields[2], lineno, "input label")
            olabel = _field_int(fields[3], lineno, "output label")
            weight = _field_float(fields[4], lineno, "weight") if len(fields) == 5 else 0.0
            arcs.append(Arc(src, dst, ilabel, olabel, weight))
            max_state = max(max_state, src, dst)
        else:
            raise FstError(f"line {lineno}: expected 1-2 fields (final state) or 4-5 fields (arc), got {len(fields)}")
        if start is None:
            state_field = fields[0]
            start = _field_int(state_field, lineno, "start state")
    if start is None:
        raise FstError("line 1: empty graph text")
    return DecodingGraph(max_state + 1, start, arcs, final_costs)


def emit_fst_text(g: DecodingGraph) -> str:
    """Inverse of parse_fst_text: the first line must reference the start state."""
    lines: list[str] = []
    order = [g.start] + [s for s in range(g.num_states) if s != g.start]
    if not g.arcs_from(g.start):
        if g.start not in g.final_costs:
            raise FstError("start state has no arcs and no final cost; grammar cannot name it first")
        lines.append(f"{g.start} {_fmt(g.final_costs[g.start])}")
    for s in order:
        for a in g.arcs_from(s):
            lines.append(f"{a.src} {a.dst} {a.ilabel} {a.olabel} {_fmt(a.weight)}")
    for s in order:
        if s in g.final_costs and not (not g.arcs_from(g.start) and s == g.start):
            lines.append(f"{s} {_fmt(g.final_costs[s])}")
    return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    return "%.9g" % x


class SymbolTable:
    """Bijection between word text and id; id 0 is reserved for ``<eps>``."""

    def __init__(self, pairs: list[tuple[str, int]]):
        self._by_word: dict[str, int] = {}
        self._by_id: dict[int, str] = {}
        for word, idx in pairs:
            if word in self._by_word:
                raise FstError(f"duplicate word {word!r} in symbol table")
            if idx in self._by_id:
                raise FstError(f"duplicate id {idx} in symbol table")
            if idx < 0:
                raise FstError(f"negative id {idx} in symbol table")
            self._by_word[word] = idx
            self._by_id[idx] = word
        if self._by_id.get(0) != "<eps>":
            raise FstError("symbol table must map id 0 to <eps>")

    def __len__(self) -> int:
        return len(self._by_id)

    def __contains__(self, word: str) -> bool:
        return word in self._by_word

    def word(self, idx: int) -> str:
        try:
            return self._by_id[idx]
        except KeyError:
            raise FstError(f"unknown word id {idx}") from None

    def id(self, word: str) -> int:
        try:
            return self._by_word[word]
        except KeyError:
            raise FstError(f"unknown word {word!r}") from None

    def words(self, ids: list[int]) -> list[str]:
        return [self.word(i) for i in ids]


def parse_symbol_table(text: str) -> SymbolTable:
    pairs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if len(fields) != 2:
            raise FstError(f"line {lineno}: expected 'word id', got {len(fields)} fields")
        pairs.append((fields[0], _field_int(fields[1], lineno, "word id")))
    return SymbolTable(pairs)


def validate_graph(g: DecodingGraph, num_pdfs: int) -> list[str]:
    """Collect every contract violation instead of stopping at the first."""
    problems = []
    if num_pdfs < 1:
        problems.append(f"num_pdfs must be positive, got {num_pdfs}")
    for state in range(g.num_states):
        for a in g.arcs_from(state):
            if a.ilabel > num_pdfs:
                problems.append(
                    f"arc {a.src}->{a.dst} input label {a.ilabel} exceeds num_pdfs {num_pdfs}"
                )
    if not (0 <= g.start < g.num_states):
        problems.append(f"start state {g.start} undefined")
    return problems
