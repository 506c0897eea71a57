"""Traffic generation: uniform random injection, flow-graph pipelines, and traces.

Uniform and trace traffic expand to a static injection schedule.  Flow-graph
traffic models staged pipelines with data dependencies: packet endpoints are
fixed up front (deterministic round-robin over stage members), but each
follow-up packet is released only when its trigger packet has fully arrived, so
release times come from the simulation itself.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from .topology import TopologyGraph


class TrafficError(ValueError):
    """Raised for malformed traffic specifications."""


@dataclass(frozen=True)
class PacketRequest:
    """One packet to inject: when, where, and how long."""

    inject_tick: int
    src: int
    dst: int
    length: int

    def __post_init__(self) -> None:
        if self.length < 1:
            raise TrafficError(f"packet length must be >= 1, got {self.length}")
        if self.inject_tick < 0:
            raise TrafficError(f"inject_tick must be >= 0, got {self.inject_tick}")


@dataclass(frozen=True)
class UniformTraffic:
    """Per-router Bernoulli injection at `rate` flits/router/cycle (local cycles)."""

    rate: float
    packet_length: int
    duration_ticks: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.rate <= 1.0:
            raise TrafficError(f"injection rate must be in [0, 1], got {self.rate}")
        if self.packet_length < 1:
            raise TrafficError("packet_length must be >= 1")
        if self.duration_ticks < 0:
            raise TrafficError("duration_ticks must be >= 0")


@dataclass(frozen=True)
class TraceTraffic:
    """Replay of an explicit, timestamped packet list."""

    packets: tuple[PacketRequest, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "packets", tuple(self.packets))


@dataclass(frozen=True)
class Flow:
    """A stage-to-stage hop of the pipeline.

    Every trigger at `src_stage` emits `packets_per_trigger` packets of
    `length` flits toward `dst_stage`, released `stage_delay_ticks` after the
    triggering packet has fully arrived.
    """

    src_stage: str
    dst_stage: str
    length: int
    packets_per_trigger: int = 1
    stage_delay_ticks: int = 0


@dataclass(frozen=True)
class FlowGraphTraffic:
    """Staged pipeline traffic over named router groups.

    Rounds start every `round_period_ticks`; in each round
    `entry_sources_per_round` members of the entry stage (rotating, None = all)
    produce fresh data and trigger their outgoing flows.
    """

    stages: dict[str, tuple[int, ...]]
    flows: tuple[Flow, ...]
    entry_stage: str
    rounds: int
    round_period_ticks: int
    entry_sources_per_round: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "flows", tuple(self.flows))
        object.__setattr__(self, "stages", {k: tuple(v) for k, v in self.stages.items()})
        if self.entry_stage not in self.stages:
            raise TrafficError(f"entry stage {self.entry_stage!r} is not a defined stage")
        for flow in self.flows:
            for name in (flow.src_stage, flow.dst_stage):
                if name not in self.stages:
                    raise TrafficError(f"flow references undefined stage {name!r}")
            if flow.length < 1 or flow.packets_per_trigger < 1:
                raise TrafficError("flow length and packets_per_trigger must be >= 1")
            if flow.stage_delay_ticks < 0:
                raise TrafficError("stage_delay_ticks must be >= 0")
        if not self.flows_from(self.entry_stage):
            raise TrafficError(f"entry stage {self.entry_stage!r} has no outgoing flows")
        if self.rounds < 1 or self.round_period_ticks < 1:
            raise TrafficError("rounds and round_period_ticks must be >= 1")
        if self.entry_sources_per_round is not None and self.entry_sources_per_round < 1:
            raise TrafficError("entry_sources_per_round must be >= 1")
        self._check_acyclic()

    def _check_acyclic(self) -> None:
        succ: dict[str, set[str]] = {name: set() for name in self.stages}
        for flow in self.flows:
            succ[flow.src_stage].add(flow.dst_stage)
        state: dict[str, int] = {}

        def visit(node: str) -> None:
            state[node] = 1
            for nxt in sorted(succ[node]):
                mark = state.get(nxt, 0)
                if mark == 1:
                    raise TrafficError(f"flow graph has a cycle through stage {nxt!r}")
                if mark == 0:
                    visit(nxt)
            state[node] = 2

        for name in sorted(self.stages):
            if state.get(name, 0) == 0:
                visit(name)

    def flows_from(self, stage: str) -> tuple[Flow, ...]:
        return tuple(f for f in self.flows if f.src_stage == stage)


def generate_uniform_schedule(
    spec: UniformTraffic, graph: TopologyGraph, seed: int
) -> list[PacketRequest]:
    """Expand uniform traffic into a deterministic schedule.

    Each router rolls an injection Bernoulli once per local clock cycle with
    probability rate / packet_length; destinations are uniform over the other
    routers.  Router order and the per-router cycle walk are fixed, so the
    schedule depends only on (spec, graph, seed).
    """
    rng = random.Random(seed)
    if spec.rate == 0.0 or spec.duration_ticks == 0:
        return []
    p_inject = spec.rate / spec.packet_length
    n = graph.num_routers
    schedule: list[PacketRequest] = []
    for rid in graph.router_ids():
        z = graph.address_of(rid).z
        period = graph.cfg.period_ticks(z)
        for tick in range(0, spec.duration_ticks, period):
            if rng.random() >= p_inject:
                continue
            dst = rng.randrange(n - 1)
            if dst >= rid:
                dst += 1
            schedule.append(PacketRequest(tick, rid, dst, spec.packet_length))
    schedule.sort(key=lambda r: (r.inject_tick, r.src, r.dst))
    return schedule


@dataclass(frozen=True)
class FlowChainHop:
    """One predetermined packet of a pipeline chain.

    `parent` is the index (within the chain) of the packet whose full arrival
    releases this one; -1 means the chain's entry event does.
    """

    parent: int
    src: int
    dst: int
    length: int
    stage_delay_ticks: int


def expand_flow_chains(
    spec: FlowGraphTraffic, graph: TopologyGraph
) -> list[tuple[int, list[FlowChainHop]]]:
    """Fix every chain's endpoints and entry tick up front.

    Endpoint selection is a deterministic round-robin over stage members keyed
    by global per-stage counters, so two runs (or two routing algorithms) see
    identical packet populations regardless of timing.  Only the release times
    of non-entry hops remain data-dependent.
    """
    for name, members in spec.stages.items():
        if not members:
            raise TrafficError(f"stage {name!r} has no routers")
        for rid in members:
            if not 0 <= rid < graph.num_routers:
                raise TrafficError(f"stage {name!r} references unknown router {rid}")

    entry_members = spec.stages[spec.entry_stage]
    per_round = spec.entry_sources_per_round or len(entry_members)
    counters: dict[str, int] = {}

    def pick(stage: str) -> int:
        members = spec.stages[stage]
        idx = counters.get(stage, 0)
        counters[stage] = idx + 1
        return members[idx % len(members)]

    chains: list[tuple[int, list[FlowChainHop]]] = []
    entry_cursor = 0
    for rnd in range(spec.rounds):
        tick = rnd * spec.round_period_ticks
        for _ in range(per_round):
            src = entry_members[entry_cursor % len(entry_members)]
            entry_cursor += 1
            hops: list[FlowChainHop] = []

            def expand(stage: str, src_router: int, parent_idx: int) -> None:
                for flow in spec.flows_from(stage):
                    for _ in range(flow.packets_per_trigger):
                        dst = pick(flow.dst_stage)
                        idx = len(hops)
                        hops.append(
                            FlowChainHop(
                                parent=parent_idx,
                                src=src_router,
                                dst=dst,
                                length=flow.length,
                                stage_delay_ticks=flow.stage_delay_ticks,
                            )
                        )
                        expand(flow.dst_stage, dst, idx)

            expand(spec.entry_stage, src, -1)
            chains.append((tick, hops))
    return chains
