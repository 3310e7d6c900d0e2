"""Frame-synchronous token-passing beam search producing a lattice.

One token lives per (frame, graph state). Each frame runs three steps:
emitting arc expansion (acoustic cost added, every surviving in-link kept),
epsilon relaxation within the frame (cost-improving links only, so the
intra-frame link set stays acyclic), then beam and max-active pruning.
Final-state costs are attached after the last frame.

Costs are tropical: graph cost plus ``-acoustic_scale * loglike`` add along
a path and the best path is the minimum.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DecodeError
from .fst import DecodingGraph

EPS_IMPROVEMENT = 1e-6


@dataclass(frozen=True)
class DecodeConfig:
    beam: float = 16.0
    max_active: int = 7000
    lattice_beam: float = 8.0
    acoustic_scale: float = 0.1

    def __post_init__(self) -> None:
        if not self.beam > 0:
            raise ValueError(f"beam must be > 0, got {self.beam}")
        if not self.lattice_beam > 0:
            raise ValueError(f"lattice_beam must be > 0, got {self.lattice_beam}")
        if self.max_active < 1:
            raise ValueError(f"max_active must be >= 1, got {self.max_active}")
        if not self.acoustic_scale > 0:
            raise ValueError(f"acoustic_scale must be > 0, got {self.acoustic_scale}")


@dataclass(frozen=True)
class LatticeLink:
    src: int
    dst: int
    olabel: int
    graph_cost: float
    acoustic_cost: float

    @property
    def cost(self) -> float:
        return self.graph_cost + self.acoustic_cost


@dataclass
class LatticeNode:
    node_id: int
    state: int
    frame: int
    cost: float
    in_links: list[LatticeLink] = field(default_factory=list)
    eps_link: LatticeLink | None = None


@dataclass
class Lattice:
    """Surviving token graph: nodes keyed by id, links with split costs."""

    nodes: dict[int, LatticeNode]
    links: list[LatticeLink]
    start: int
    final_costs: dict[int, float]
    num_frames: int


@dataclass
class DecodeResult:
    words: list[int]
    total_cost: float
    partial: bool


def decode(g: DecodingGraph, loglikes: np.ndarray, cfg: DecodeConfig) -> Lattice:
    """Beam search over ``g`` driven by a (T, K) log pseudo-likelihood matrix."""
    ll = np.asarray(loglikes)
    if ll.ndim != 2:
        raise DecodeError(f"loglike matrix must be 2-D, got shape {ll.shape}")
    num_frames, num_pdfs = ll.shape
    if g.max_ilabel() > num_pdfs:
        raise DecodeError(
            f"graph uses input label {g.max_ilabel()} but only {num_pdfs} pdf scores are available"
        )
    if ll.size and not np.all(np.isfinite(ll)):
        raise DecodeError("loglike matrix contains non-finite values")

    nodes: dict[int, LatticeNode] = {}
    counter = [0]

    def new_node(state: int, frame: int, cost: float) -> LatticeNode:
        node = LatticeNode(counter[0], state, frame, cost)
        counter[0] += 1
        nodes[node.node_id] = node
        return node

    start_node = new_node(g.start, 0, 0.0)
    active: dict[int, LatticeNode] = {g.start: start_node}
    _epsilon_closure(g, nodes, active, new_node, frame=0)

    for t in range(num_frames):
        prev = active
        active = {}
        for state in sorted(prev):
            src = prev[state]
            for arc in g.arcs_from(state):
                if arc.ilabel == 0:
                    continue
                acoustic = -cfg.acoustic_scale * float(ll[t, arc.ilabel - 1])
                cand = src.cost + arc.weight + acoustic
                dst = active.get(arc.dst)
                if dst is None:
                    dst = new_node(arc.dst, t + 1, cand)
                    active[arc.dst] = dst
                elif cand < dst.cost:
                    dst.cost = cand
                dst.in_links.append(
                    LatticeLink(src.node_id, dst.node_id, arc.olabel, arc.weight, acoustic)
                )
        if not active:
            raise DecodeError(f"beam collapsed: no active tokens at frame {t}")
        _epsilon_closure(g, nodes, active, new_node, frame=t + 1)
        _prune_active(nodes, active, cfg)

    final_costs = {
        node.node_id: g.final_cost(state) for state, node in active.items() if g.is_final(state)
    }
    links: list[LatticeLink] = []
    for node in nodes.values():
        for link in node.in_links:
            if link.src in nodes:
                links.append(link)
        if node.eps_link is not None and node.eps_link.src in nodes:
            links.append(node.eps_link)
    return Lattice(nodes, links, start_node.node_id, final_costs, num_frames)


def _epsilon_closure(g, nodes, active, new_node, frame: int) -> None:
    """Relax epsilon arcs until costs stop improving by more than the threshold.

    Each token keeps only its best epsilon in-link, which keeps the
    intra-frame link set acyclic. Pass count is capped: still improving after
    num_states passes means an improving (negative) epsilon cycle.
    """
    for _ in range(g.num_states):
        if not _eps_pass(g, nodes, active, new_node, frame):
            return
    if _eps_pass(g, nodes, active, new_node, frame):
        raise DecodeError(f"improving epsilon cycle detected at frame {frame}")


def _eps_pass(g, nodes, active, new_node, frame: int) -> bool:
    improved = False
    for state in sorted(active):
        src = active[state]
        for arc in g.arcs_from(state):
            if arc.ilabel != 0:
                continue
            cand = src.cost + arc.weight
            dst = active.get(arc.dst)
            if dst is None:
                dst = new_node(arc.dst, frame, cand)
                active[arc.dst] = dst
                dst.eps_link = LatticeLink(src.node_id, dst.node_id, arc.olabel, arc.weight, 0.0)
                improved = True
            elif cand < dst.cost - EPS_IMPROVEMENT:
                dst.cost = cand
                dst.eps_link = LatticeLink(src.node_id, dst.node_id, arc.olabel, arc.weight, 0.0)
                improved = True
    return improved


def _prune_active(nodes: dict[int, LatticeNode], active: dict[int, LatticeNode], cfg: DecodeConfig) -> None:
    best = min(node.cost for node in active.values())
    keep = {s: n for s, n in active.items() if n.cost <= best + cfg.beam}
    if len(keep) > cfg.max_active:
        ranked = sorted(keep.items(), key=lambda kv: (kv[1].cost, kv[0]))
        keep = dict(ranked[: cfg.max_active])
    for state in list(active):
        if state not in keep:
            del nodes[active[state].node_id]
            del active[state]


def _out_links(lat: Lattice) -> dict[int, list[LatticeLink]]:
    out: dict[int, list[LatticeLink]] = {n: [] for n in lat.nodes}
    for link in lat.links:
        if link.src in lat.nodes and link.dst in lat.nodes:
            out[link.src].append(link)
    return out


def _topological_order(lat: Lattice, out: dict[int, list[LatticeLink]]) -> list[int]:
    """Deterministic topological order: frame, then graph state, then node id."""
    indeg = {n: 0 for n in lat.nodes}
    for links in out.values():
        for link in links:
            indeg[link.dst] += 1
    ready = [
        (lat.nodes[n].frame, lat.nodes[n].state, n) for n, d in indeg.items() if d == 0
    ]
    heapq.heapify(ready)
    order = []
    while ready:
        _, _, n = heapq.heappop(ready)
        order.append(n)
        for link in out[n]:
            indeg[link.dst] -= 1
            if indeg[link.dst] == 0:
                d = lat.nodes[link.dst]
                heapq.heappush(ready, (d.frame, d.state, d.node_id))
    if len(order) != len(lat.nodes):
        raise DecodeError("lattice contains a cycle")
    return order


def _end_nodes(lat: Lattice) -> dict[int, float]:
    """Final-cost map, falling back to zero-cost last-frame nodes when no final survived."""
    if lat.final_costs:
        return dict(lat.final_costs)
    return {n: 0.0 for n, node in lat.nodes.items() if node.frame == lat.num_frames}


def best_path(lat: Lattice) -> DecodeResult:
    """Cheapest start-to-end path; falls back to the cheapest last-frame node.

    The total is recomputed from link costs, not taken from token scores.
    """
    if not lat.nodes:
        raise DecodeError("empty lattice")
    out = _out_links(lat)
    order = _topological_order(lat, out)
    dist: dict[int, float] = {lat.start: 0.0}
    parent: dict[int, LatticeLink] = {}
    for n in order:
        if n not in dist:
            continue
        for link in out[n]:
            cand = dist[n] + link.cost
            if cand < dist.get(link.dst, math.inf):
                dist[link.dst] = cand
                parent[link.dst] = link

    candidates = [(dist[n] + fc, n) for n, fc in lat.final_costs.items() if n in dist]
    partial = not candidates
    if partial:
        candidates = [
            (dist[n], n) for n in dist if lat.nodes[n].frame == lat.num_frames
        ]
    if not candidates:
        raise DecodeError("no end node is reachable from the lattice start")
    total, end = min(candidates, key=lambda c: (c[0], c[1]))

    words: list[int] = []
    n = end
    while n != lat.start:
        link = parent[n]
        if link.olabel != 0:
            words.append(link.olabel)
        n = link.src
    words.reverse()
    return DecodeResult(words, total, partial)


def prune_lattice(lat: Lattice, lattice_beam: float) -> Lattice:
    """Drop links whose best through-path exceeds the best total by the beam.

    An infinite beam is the identity. Unreachable nodes and nodes with no
    surviving path to an end node are removed.
    """
    if math.isinf(lattice_beam):
        return lat
    if not lat.nodes:
        return lat
    out = _out_links(lat)
    order = _topological_order(lat, out)
    ends = _end_nodes(lat)

    alpha: dict[int, float] = {n: math.inf for n in lat.nodes}
    alpha[lat.start] = 0.0
    for n in order:
        if alpha[n] == math.inf:
            continue
        for link in out[n]:
            alpha[link.dst] = min(alpha[link.dst], alpha[n] + link.cost)
    beta: dict[int, float] = {n: ends.get(n, math.inf) for n in lat.nodes}
    for n in reversed(order):
        for link in out[n]:
            beta[n] = min(beta[n], link.cost + beta[link.dst])

    best = min((alpha[n] + fc for n, fc in ends.items()), default=math.inf)
    if best == math.inf:
        return lat
    limit = best + lattice_beam + 1e-9
    kept_links = [
        link for link in lat.links
        if link.src in lat.nodes and link.dst in lat.nodes
        and alpha[link.src] + link.cost + beta[link.dst] <= limit
    ]

    fwd: dict[int, list[LatticeLink]] = {}
    bwd: dict[int, list[LatticeLink]] = {}
    for link in kept_links:
        fwd.setdefault(link.src, []).append(link)
        bwd.setdefault(link.dst, []).append(link)
    reachable = _closure({lat.start}, fwd, forward=True)
    end_seed = {n for n in ends if alpha[n] + ends[n] <= limit}
    coreachable = _closure(end_seed, bwd, forward=False)
    kept_nodes = reachable & coreachable

    new_nodes = {n: lat.nodes[n] for n in kept_nodes}
    new_links = [l for l in kept_links if l.src in kept_nodes and l.dst in kept_nodes]
    new_finals = {n: c for n, c in lat.final_costs.items() if n in kept_nodes}
    return Lattice(new_nodes, new_links, lat.start, new_finals, lat.num_frames)


def _closure(seed: set[int], adjacency: dict[int, list[LatticeLink]], forward: bool) -> set[int]:
    seen = set(seed)
    stack = list(seed)
    while stack:
        n = stack.pop()
        for link in adjacency.get(n, ()):
            nxt = link.dst if forward else link.src
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return seen


def write_lattice_text(lat: Lattice) -> str:
    """Render links as ``from to olabel graph_cost acoustic_cost`` lines.

    Node ids are densely renumbered in topological order; final-state lines
    ``node cost`` follow the links. Output is deterministic.
    """
    out = _out_links(lat)
    order = _topological_order(lat, out)
    renumber = {n: i for i, n in enumerate(order)}
    lines = []
    link_rows = sorted(
        (renumber[l.src], renumber[l.dst], l.olabel, l.graph_cost, l.acoustic_cost)
        for l in lat.links
        if l.src in renumber and l.dst in renumber
    )
    for src, dst, olabel, gc, ac in link_rows:
        lines.append(f"{src} {dst} {olabel} {_fmt(gc)} {_fmt(ac)}")
    for n in sorted(lat.final_costs, key=lambda n: renumber[n]):
        lines.append(f"{renumber[n]} {_fmt(lat.final_costs[n])}")
    return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    return "%.9g" % x
