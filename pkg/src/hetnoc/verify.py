"""Executable routing verification: deadlock, connectivity, livelock, and turns.

A routing is deadlock-free when it is connected and its channel dependency
graph (links as vertices, may-wait-for relations as edges) is acyclic.  All
checks here enumerate (source, destination) pairs, walk the deterministic
routes, and derive the dependency edges, turn pairs, and route lengths from the
walks themselves, so every verdict comes with a concrete witness.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .routing import RoutingAlgorithm, allowed_turns, select
from .topology import Direction, TopologyGraph

Arc = tuple[int, int]

# Pair enumeration beyond this count switches to deterministic sampling.
EXHAUSTIVE_PAIR_LIMIT = 20_000


class RouteWalkError(RuntimeError):
    """A route demanded a missing link or failed to terminate."""


@dataclass
class ChannelDependencyGraph:
    """Vertices are arcs of the topology; edges are direct dependencies."""

    vertices: set[Arc] = field(default_factory=set)
    edges: dict[Arc, set[Arc]] = field(default_factory=dict)

    def add_edge(self, a: Arc, b: Arc) -> None:
        if a[1] != b[0]:
            raise ValueError(f"dependency {a} -> {b} does not share a junction router")
        self.vertices.add(a)
        self.vertices.add(b)
        self.edges.setdefault(a, set()).add(b)

    def successors(self, a: Arc) -> set[Arc]:
        return self.edges.get(a, set())

    @property
    def num_edges(self) -> int:
        return sum(len(s) for s in self.edges.values())


@dataclass
class VerifyReport:
    connected: bool
    connectivity_counterexample: Optional[tuple[int, int]]
    cdg_acyclic: bool
    cdg_cycle: Optional[list[Arc]]
    livelock_free: bool
    max_route_length: int
    livelock_witness: Optional[tuple[int, int]]
    observed_turns: frozenset[tuple[Direction, Direction]]
    turns_within_allowed: bool
    extra_turns: frozenset[tuple[Direction, Direction]]
    unobserved_allowed_turns: frozenset[tuple[Direction, Direction]]
    sampled: bool = False

    @property
    def deadlock_free(self) -> bool:
        return self.connected and self.cdg_acyclic

    @property
    def all_passed(self) -> bool:
        return (
            self.connected
            and self.cdg_acyclic
            and self.livelock_free
            and self.turns_within_allowed
        )


def walk_route(
    graph: TopologyGraph, alg: RoutingAlgorithm, src: int, dst: int, hop_bound: int
) -> list[Arc]:
    """Follow the routing function from src to dst, returning the arc sequence.

    Raises RouteWalkError when the route demands a missing link or exceeds
    hop_bound (a deterministic route longer than the router count must loop).
    """
    arcs: list[Arc] = []
    current = src
    d_addr = graph.address_of(dst)
    while current != dst:
        if len(arcs) > hop_bound:
            raise RouteWalkError(f"route {src}->{dst} exceeded {hop_bound} hops")
        direction = select(alg.decide(graph.address_of(current), d_addr))
        if direction is None:
            raise RouteWalkError(
                f"route {src}->{dst} delivered locally at router {current} before arrival"
            )
        nxt = graph.neighbor(current, direction)
        if nxt is None:
            raise RouteWalkError(
                f"route {src}->{dst} demands a missing {direction.value} link at router {current}"
            )
        arcs.append((current, nxt))
        current = nxt
    return arcs


def enumerate_pairs(
    graph: TopologyGraph, sample_limit: int = EXHAUSTIVE_PAIR_LIMIT
) -> tuple[list[tuple[int, int]], bool]:
    """All ordered router pairs, or a deterministic sample on large graphs."""
    n = graph.num_routers
    total = n * (n - 1)
    pairs = [(s, d) for s in graph.router_ids() for d in graph.router_ids() if s != d]
    if total <= sample_limit:
        return pairs, False
    rng = random.Random(0)
    return sorted(rng.sample(pairs, sample_limit)), True


def build_cdg(
    graph: TopologyGraph,
    alg: RoutingAlgorithm,
    pairs: Optional[Sequence[tuple[int, int]]] = None,
    hop_bound: Optional[int] = None,
) -> ChannelDependencyGraph:
    """Direct-dependency graph from exhaustively walked routes.

    An edge (a, b) is recorded whenever some walked route occupies arc a and is
    then forwarded into arc b at the shared router.
    """
    if pairs is None:
        pairs, _ = enumerate_pairs(graph)
    bound = hop_bound if hop_bound is not None else max(graph.num_routers, 16)
    cdg = ChannelDependencyGraph()
    for src, dst in pairs:
        arcs = walk_route(graph, alg, src, dst, bound)
        for a in arcs:
            cdg.vertices.add(a)
        for a, b in zip(arcs, arcs[1:]):
            cdg.add_edge(a, b)
    return cdg


def find_cycle(cdg: ChannelDependencyGraph) -> Optional[list[Arc]]:
    """A concrete dependency cycle, or None if the graph is acyclic.

    Iterative coloring DFS; the returned witness is the closed arc sequence.
    """
    WHITE, GREY, BLACK = 0, 1, 2
    color = {v: WHITE for v in cdg.vertices}
    parent: dict[Arc, Optional[Arc]] = {}
    for root in sorted(cdg.vertices):
        if color[root] != WHITE:
            continue
        stack: list[tuple[Arc, Iterable[Arc]]] = [(root, iter(sorted(cdg.successors(root))))]
        color[root] = GREY
        parent[root] = None
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if color[nxt] == WHITE:
                    color[nxt] = GREY
                    parent[nxt] = node
                    stack.append((nxt, iter(sorted(cdg.successors(nxt)))))
                    advanced = True
                    break
                if color[nxt] == GREY:
                    cycle = [node]
                    walk = node
                    while walk != nxt:
                        walk = parent[walk]
                        cycle.append(walk)
                    cycle.reverse()
                    return cycle
            if not advanced:
                color[node] = BLACK
                stack.pop()
    return None


def replay_cycle(cdg: ChannelDependencyGraph, cycle: Sequence[Arc]) -> bool:
    """Soundness check: every consecutive pair (wrapping) is a recorded dependency."""
    if not cycle:
        return False
    for a, b in zip(cycle, list(cycle[1:]) + [cycle[0]]):
        if b not in cdg.successors(a):
            return False
        if a[1] != b[0]:
            return False
    return True


def check_connected(
    graph: TopologyGraph,
    alg: RoutingAlgorithm,
    pairs: Optional[Sequence[tuple[int, int]]] = None,
    hop_bound: Optional[int] = None,
) -> tuple[bool, Optional[tuple[int, int]]]:
    """True iff iteratively applying the routing reaches every destination."""
    if pairs is None:
        pairs, _ = enumerate_pairs(graph)
    bound = hop_bound if hop_bound is not None else max(graph.num_routers, 16)
    for src, dst in pairs:
        try:
            walk_route(graph, alg, src, dst, bound)
        except RouteWalkError:
            return False, (src, dst)
    return True, None


def check_livelock_free(
    graph: TopologyGraph,
    alg: RoutingAlgorithm,
    hop_bound: Optional[int] = None,
    pairs: Optional[Sequence[tuple[int, int]]] = None,
) -> tuple[bool, int, Optional[tuple[int, int]]]:
    """Bounded-termination check; reports the longest observed route."""
    bound = hop_bound if hop_bound is not None else graph.num_routers
    if bound < graph.num_routers:
        raise ValueError(
            f"hop_bound {bound} is below the router count {graph.num_routers}; "
            "a deterministic route that long must revisit a router"
        )
    if pairs is None:
        pairs, _ = enumerate_pairs(graph)
    longest = 0
    for src, dst in pairs:
        try:
            arcs = walk_route(graph, alg, src, dst, bound)
        except RouteWalkError:
            return False, longest, (src, dst)
        longest = max(longest, len(arcs))
    return True, longest, None


def extract_turn_matrix(
    graph: TopologyGraph,
    alg: RoutingAlgorithm,
    pairs: Optional[Sequence[tuple[int, int]]] = None,
) -> frozenset[tuple[Direction, Direction]]:
    """Consecutive-direction pairs exercised by the routing on this graph."""
    if pairs is None:
        pairs, _ = enumerate_pairs(graph)
    bound = max(graph.num_routers, 16)
    turns: set[tuple[Direction, Direction]] = set()
    for src, dst in pairs:
        arcs = walk_route(graph, alg, src, dst, bound)
        dirs = [graph.classify_arc(a) for a in arcs]
        turns.update(zip(dirs, dirs[1:]))
    return frozenset(turns)


def turn_matrix_grid(turns: frozenset[tuple[Direction, Direction]]) -> list[list[int]]:
    """6x6 boolean matrix over the canonical direction order (n e s w u d)."""
    order = list(Direction)
    return [[1 if (f, g) in turns else 0 for g in order] for f in order]


def run_verification(
    graph: TopologyGraph, alg: RoutingAlgorithm, hop_bound: Optional[int] = None
) -> VerifyReport:
    """Full pipeline: connectivity, CDG cycle search, livelock, turn subset."""
    pairs, sampled = enumerate_pairs(graph)
    walk_bound = hop_bound if hop_bound is not None else max(graph.num_routers, 16)

    connected = True
    counterexample: Optional[tuple[int, int]] = None
    longest = 0
    livelock_witness: Optional[tuple[int, int]] = None
    cdg = ChannelDependencyGraph()
    turns: set[tuple[Direction, Direction]] = set()

    for src, dst in pairs:
        try:
            arcs = walk_route(graph, alg, src, dst, walk_bound)
        except RouteWalkError:
            if connected:
                connected = False
                counterexample = (src, dst)
            if livelock_witness is None:
                livelock_witness = (src, dst)
            continue
        longest = max(longest, len(arcs))
        for a in arcs:
            cdg.vertices.add(a)
        dirs = [graph.classify_arc(a) for a in arcs]
        for (a, b), turn in zip(zip(arcs, arcs[1:]), zip(dirs, dirs[1:])):
            cdg.add_edge(a, b)
            turns.add(turn)

    cycle = find_cycle(cdg)
    allowed = allowed_turns(alg.variant)
    observed = frozenset(turns)
    extra = frozenset(observed - allowed)
    return VerifyReport(
        connected=connected,
        connectivity_counterexample=counterexample,
        cdg_acyclic=cycle is None,
        cdg_cycle=cycle,
        livelock_free=livelock_witness is None,
        max_route_length=longest,
        livelock_witness=livelock_witness,
        observed_turns=observed,
        turns_within_allowed=not extra,
        extra_turns=extra,
        unobserved_allowed_turns=frozenset(allowed - observed),
        sampled=sampled,
    )


def write_report_csv(path, report: VerifyReport) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["check", "verdict", "detail"])
        writer.writerow(
            ["connected", _pf(report.connected), _fmt(report.connectivity_counterexample)]
        )
        writer.writerow(["cdg_acyclic", _pf(report.cdg_acyclic), _fmt_cycle(report.cdg_cycle)])
        writer.writerow(
            [
                "livelock_free",
                _pf(report.livelock_free),
                f"max_route_length={report.max_route_length}",
            ]
        )
        writer.writerow(
            [
                "turns_within_allowed",
                _pf(report.turns_within_allowed),
                _fmt_turns(report.extra_turns),
            ]
        )
        writer.writerow(["sampled_pairs", "yes" if report.sampled else "no", ""])


def write_witness_json(path, report: VerifyReport) -> None:
    payload = {
        "connected": report.connected,
        "connectivity_counterexample": report.connectivity_counterexample,
        "cdg_acyclic": report.cdg_acyclic,
        "cdg_cycle": [list(arc) for arc in report.cdg_cycle] if report.cdg_cycle else None,
        "livelock_free": report.livelock_free,
        "max_route_length": report.max_route_length,
        "livelock_witness": report.livelock_witness,
        "observed_turns": sorted([f.value, g.value] for f, g in report.observed_turns),
        "extra_turns": sorted([f.value, g.value] for f, g in report.extra_turns),
        "unobserved_allowed_turns": sorted(
            [f.value, g.value] for f, g in report.unobserved_allowed_turns
        ),
        "sampled": report.sampled,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _pf(ok: bool) -> str:
    return "pass" if ok else "fail"


def _fmt(pair: Optional[tuple[int, int]]) -> str:
    return "" if pair is None else f"src={pair[0]} dst={pair[1]}"


def _fmt_cycle(cycle: Optional[list[Arc]]) -> str:
    if cycle is None:
        return ""
    return " -> ".join(f"{a}->{b}" for a, b in cycle)


def _fmt_turns(turns: frozenset[tuple[Direction, Direction]]) -> str:
    return " ".join(sorted(f"{f.value}->{g.value}" for f, g in turns))
