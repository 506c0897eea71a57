"""Deterministic flit-level simulation of the heterogeneous 3D NoC.

Time base: one global tick equals one clock cycle of the fastest layer; a layer
whose clock period is c_f times the fastest acts once per c_f ticks.  The
engine paces every buffer read and every output-port launch at the owning
layer's period and stamps each flit with an explicit ready time, so zero-load
head latencies compose exactly like the analytical model:

* a head flit leaves a router head_delay * period ticks after arriving,
* body flits follow one local cycle apart,
* an upward crossing into a strictly slower clock domain delays arrival by one
  period of the receiving layer (ingress synchronization),
* after a tail, the next head on the same output port waits an extra
  (head_delay - pipeline_depth) local cycles.

High vertical-throughput routers widen the local and vertical datapaths of
slower layers so those ports move one flit per fastest-layer tick (c_f flits
per local cycle); horizontal ports keep the local pace.

Event processing order is fixed (tick, router id, port order), which makes
every run bit-reproducible for identical inputs.
"""

from __future__ import annotations

import csv
import heapq
import math
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .routing import R1, R2, RoutingAlgorithm
from .topology import DIRECTIONS, Direction, TopologyGraph
from .traffic import (
    FlowChainHop,
    FlowGraphTraffic,
    PacketRequest,
    TraceTraffic,
    UniformTraffic,
    expand_flow_chains,
    generate_uniform_schedule,
)

STANDARD = "standard"
HIGH_VT = "high_vt"

ACTIVITY_KINDS = ("buffer_write", "buffer_read", "crossbar", "hlink", "vlink")

# Output-port service order within a router: drain (eject) before feeding links.
_PORT_ORDER: tuple[Optional[Direction], ...] = (None,) + DIRECTIONS


class SimConfigError(ValueError):
    """Invalid simulation configuration."""


class SimRoutingError(RuntimeError):
    """The routing function demanded a link the topology does not have."""


class SimDeadlockError(RuntimeError):
    """No flit moved for the configured watchdog window."""


class ClockDomain:
    """Integer-ratio clock domain of one layer.

    The engine's per-flit pacing makes results independent of the phase; the
    field exists so domain descriptions round-trip through configs unchanged.
    """

    __slots__ = ("period", "phase")

    def __init__(self, period: int, phase: int = 0):
        if period < 1:
            raise SimConfigError(f"clock period must be >= 1 tick, got {period}")
        if not 0 <= phase < period:
            raise SimConfigError(f"phase must be in [0, {period}), got {phase}")
        self.period = period
        self.phase = phase


@dataclass(frozen=True)
class RouterConfig:
    """Microarchitecture knobs shared by all routers of a run."""

    kind: str = STANDARD
    buffer_depth: int = 8
    vc_count_fast: int = 4
    vc_count_slow: int = 1

    def __post_init__(self) -> None:
        if self.kind not in (STANDARD, HIGH_VT):
            raise SimConfigError(f"unknown router kind {self.kind!r}")
        if self.buffer_depth < 2:
            raise SimConfigError(f"buffer_depth must be >= 2, got {self.buffer_depth}")
        if self.vc_count_fast < 1 or self.vc_count_slow < 1:
            raise SimConfigError("VC counts must be >= 1")


@dataclass(frozen=True)
class EnergyWeights:
    """Per-event dynamic-energy proxy weights; layer factor scales with feature size."""

    buffer_write: float = 1.0
    buffer_read: float = 1.0
    crossbar: float = 1.0
    hlink: float = 1.0
    vlink: float = 1.0
    scale_with_feature_size: bool = True

    def weight(self, kind: str) -> float:
        return getattr(self, kind)


@dataclass(frozen=True)
class SimParams:
    warmup_ticks: int = 0
    measure_ticks: Optional[int] = None
    seed: int = 0
    watchdog_window: int = 10_000
    collect_trace: bool = False

    def __post_init__(self) -> None:
        if self.warmup_ticks < 0:
            raise SimConfigError("warmup_ticks must be >= 0")
        if self.measure_ticks is not None and self.measure_ticks < 1:
            raise SimConfigError("measure_ticks must be >= 1 when set")
        if self.watchdog_window < 1:
            raise SimConfigError("watchdog_window must be >= 1")


@dataclass
class PacketRecord:
    id: int
    src: int
    dst: int
    length: int
    create: int
    head_eject: Optional[int] = None
    tail_eject: Optional[int] = None


@dataclass
class SimReport:
    """Per-run statistics; latencies in picoseconds unless suffixed _ticks."""

    fastest_clk_ps: int
    total_ticks: int
    injected_flits: int
    ejected_flits: int
    measured_flits: int
    measured_packets: int
    avg_flit_latency_ps: float
    p50_flit_latency_ps: float
    p99_flit_latency_ps: float
    max_flit_latency_ps: float
    avg_packet_latency_ps: float
    throughput_by_layer: dict[int, float]
    activity_by_layer: dict[int, dict[str, int]]
    energy_proxy: float
    latency_hist_ticks: dict[int, int]
    packets: list[PacketRecord] = field(repr=False, default_factory=list)
    trace: list[tuple[int, int, str, int, str]] = field(repr=False, default_factory=list)

    def packet_by_endpoints(self) -> dict[tuple[int, int], list[PacketRecord]]:
        out: dict[tuple[int, int], list[PacketRecord]] = {}
        for rec in self.packets:
            out.setdefault((rec.src, rec.dst), []).append(rec)
        return out

    def write_report_csv(self, path) -> None:
        rows: list[tuple[str, object]] = [
            ("fastest_clk_ps", self.fastest_clk_ps),
            ("total_ticks", self.total_ticks),
            ("injected_flits", self.injected_flits),
            ("ejected_flits", self.ejected_flits),
            ("measured_flits", self.measured_flits),
            ("measured_packets", self.measured_packets),
            ("avg_flit_latency_ps", repr(self.avg_flit_latency_ps)),
            ("p50_flit_latency_ps", repr(self.p50_flit_latency_ps)),
            ("p99_flit_latency_ps", repr(self.p99_flit_latency_ps)),
            ("max_flit_latency_ps", repr(self.max_flit_latency_ps)),
            ("avg_packet_latency_ps", repr(self.avg_packet_latency_ps)),
            ("energy_proxy", repr(self.energy_proxy)),
        ]
        for z in sorted(self.throughput_by_layer):
            rows.append((f"throughput_flits_per_tick_l{z}", repr(self.throughput_by_layer[z])))
        for z in sorted(self.activity_by_layer):
            for kind in ACTIVITY_KINDS:
                rows.append((f"{kind}_l{z}", self.activity_by_layer[z][kind]))
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "value"])
            writer.writerows(rows)

    def write_histogram_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["flit_latency_ps", "count"])
            for ticks in sorted(self.latency_hist_ticks):
                writer.writerow([ticks * self.fastest_clk_ps, self.latency_hist_ticks[ticks]])

    def write_trace_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["tick", "router", "port", "flit_id", "event"])
            writer.writerows(self.trace)


class _Flit:
    __slots__ = ("packet_id", "seq", "is_head", "is_tail", "dst", "create", "ready")

    def __init__(self, packet_id, seq, is_head, is_tail, dst, create):
        self.packet_id = packet_id
        self.seq = seq
        self.is_head = is_head
        self.is_tail = is_tail
        self.dst = dst
        self.create = create
        self.ready = create


class _Vc:
    __slots__ = ("flits", "capacity", "owner", "route_dir", "route_set", "target")

    def __init__(self, capacity: float):
        self.flits: deque[_Flit] = deque()
        self.capacity = capacity
        self.owner: Optional[int] = None      # packet currently holding this VC
        self.route_dir: Optional[Direction] = None
        self.route_set = False
        self.target: Optional["_Vc"] = None   # downstream VC allocated at the head

    def has_space(self) -> bool:
        return len(self.flits) < self.capacity


class _InputUnit:
    __slots__ = ("vcs", "pace", "next_read")

    def __init__(self, vc_count: int, depth: float, pace: int):
        self.vcs = [_Vc(depth) for _ in range(vc_count)]
        self.pace = pace
        self.next_read = 0


class _OutputPort:
    __slots__ = ("direction", "pace", "bubble", "next_free", "head_free",
                 "dest_router", "dest_unit", "rr_alloc", "rr_grant", "link_kind")

    def __init__(self, direction, pace, bubble, dest_router, dest_unit, link_kind):
        self.direction = direction
        self.pace = pace
        self.bubble = bubble          # extra wait before the next head after a tail
        self.next_free = 0
        self.head_free = 0
        self.dest_router = dest_router
        self.dest_unit = dest_unit
        self.rr_alloc = 0
        self.rr_grant = 0
        self.link_kind = link_kind    # "hlink" | "vlink" | None for local


class _Router:
    __slots__ = ("id", "address", "z", "period", "head_delay", "pipeline_depth",
                 "inputs", "input_order", "outputs")

    def __init__(self, rid, address, z, period, head_delay, pipeline_depth):
        self.id = rid
        self.address = address
        self.z = z
        self.period = period
        self.head_delay = head_delay
        self.pipeline_depth = pipeline_depth
        self.inputs: dict[Optional[Direction], _InputUnit] = {}
        self.input_order: list[Optional[Direction]] = []
        self.outputs: dict[Optional[Direction], _OutputPort] = {}


def unit_pace(cfg, router_cfg: RouterConfig, z: int, direction: Optional[Direction]) -> int:
    """Ticks between two buffer reads on one input unit (None = local port)."""
    period = cfg.period_ticks(z)
    wide = direction is None or direction.is_vertical
    if router_cfg.kind == HIGH_VT and period > 1 and wide:
        return 1
    return period


def port_pace(cfg, router_cfg: RouterConfig, z_src: int, direction: Optional[Direction], z_dst: int) -> int:
    """Ticks between two launches on one output port (None = ejection)."""
    period = cfg.period_ticks(z_src)
    if direction is None:
        return 1 if (router_cfg.kind == HIGH_VT and period > 1) else period
    if direction.is_vertical:
        # The slower endpoint samples the link; wide high-VT links carry
        # c_f flits per slow cycle, i.e. one per tick.
        return 1 if router_cfg.kind == HIGH_VT else max(period, cfg.period_ticks(z_dst))
    return period


def route_steady_pace(cfg, router_cfg: RouterConfig, route) -> int:
    """Steady-state ticks per flit for a wormhole stream along a route.

    The stream spacing is set by the slowest read or launch pace it crosses:
    the source queue read, every link launch and transit read, and the final
    ejection.  `route` is a sequence of (Address, Direction | None) steps as
    produced by route tracing.
    """
    worst = unit_pace(cfg, router_cfg, route[0][0].z, None)
    for i, (addr, direction) in enumerate(route):
        if direction is None:
            worst = max(worst, port_pace(cfg, router_cfg, addr.z, None, addr.z))
            continue
        nxt = route[i + 1][0]
        worst = max(worst, port_pace(cfg, router_cfg, addr.z, direction, nxt.z))
        worst = max(worst, unit_pace(cfg, router_cfg, nxt.z, direction.opposite))
    return worst


def run(
    graph: TopologyGraph,
    alg: RoutingAlgorithm,
    router_cfg: RouterConfig,
    traffic: Union[UniformTraffic, FlowGraphTraffic, TraceTraffic, Sequence[PacketRequest]],
    params: SimParams,
    energy: EnergyWeights = EnergyWeights(),
) -> SimReport:
    """Simulate one run to completion (all injected packets drained)."""
    engine = _Engine(graph, alg, router_cfg, params, energy)
    engine.load_traffic(traffic)
    return engine.run()


class _Engine:
    def __init__(self, graph, alg, router_cfg, params, energy):
        if router_cfg.kind == HIGH_VT and alg.variant not in (R1, R2):
            raise SimConfigError(
                "high_vt routers presume descend-first or threshold-detour routing; "
                f"got {alg.variant!r}"
            )
        self.graph = graph
        self.cfg = graph.cfg
        self.alg = alg
        self.router_cfg = router_cfg
        self.params = params
        self.energy = energy
        self.fastest_clk = self.cfg.fastest_clk
        self.domains = {
            z: ClockDomain(self.cfg.period_ticks(z))
            for z in range(1, self.cfg.num_layers + 1)
        }

        self.routers = [self._build_router(rid) for rid in graph.router_ids()]
        self._wire_links()

        self.heap: list[int] = []
        self.heap_set: set[int] = set()
        self.active: set[int] = set()
        self.inject_heap: list[tuple[int, int, int, PacketRequest]] = []
        self._inject_serial = 0
        self.packets: dict[int, PacketRecord] = {}
        self._next_packet_id = 0
        self.in_flight = 0
        self.injected_flits = 0
        self.ejected_flits = 0
        self.last_move = 0
        self.now = 0

        self.flit_lat_sum = 0
        self.flit_lat_hist: Counter[int] = Counter()
        self.measured_flits = 0
        self.eject_in_window: Counter[int] = Counter()  # keyed by layer
        self.activity = {
            z: {k: 0 for k in ACTIVITY_KINDS} for z in range(1, self.cfg.num_layers + 1)
        }
        self.trace: list[tuple[int, int, str, int, str]] = []

        # Flow-graph bookkeeping: hop table, children per hop, live packet -> hop.
        self._hops: list[FlowChainHop] = []
        self._hop_children: list[list[int]] = []
        self._packet_hop: dict[int, int] = {}

    # -- construction ------------------------------------------------------

    def _vc_count(self, z: int) -> int:
        fast = self.cfg.period_ticks(z) == 1
        return self.router_cfg.vc_count_fast if fast else self.router_cfg.vc_count_slow

    def _is_slow(self, z: int) -> bool:
        return self.cfg.period_ticks(z) > 1

    def _build_router(self, rid: int) -> _Router:
        addr = self.graph.address_of(rid)
        z = addr.z
        tech = self.cfg.layer(z).tech
        period = self.cfg.period_ticks(z)
        r = _Router(rid, addr, z, period, tech.head_delay, tech.pipeline_depth)

        # Local injection queue: unbounded, single VC.
        r.inputs[None] = _InputUnit(1, float("inf"), unit_pace(self.cfg, self.router_cfg, z, None))
        r.input_order.append(None)
        for direction in DIRECTIONS:
            if self.graph.neighbor(rid, direction) is not None:
                r.inputs[direction] = _InputUnit(
                    self._vc_count(z),
                    self.router_cfg.buffer_depth,
                    unit_pace(self.cfg, self.router_cfg, z, direction),
                )
                r.input_order.append(direction)

        bubble = (tech.head_delay - tech.pipeline_depth) * period
        r.outputs[None] = _OutputPort(
            None, port_pace(self.cfg, self.router_cfg, z, None, z), bubble, None, None, None
        )
        return r

    def _wire_links(self) -> None:
        for r in self.routers:
            tech = self.cfg.layer(r.z).tech
            bubble = (tech.head_delay - tech.pipeline_depth) * r.period
            for direction in DIRECTIONS:
                dest = self.graph.neighbor(r.id, direction)
                if dest is None:
                    continue
                dest_router = self.routers[dest]
                dest_unit = dest_router.inputs[direction.opposite]
                pace = port_pace(self.cfg, self.router_cfg, r.z, direction, dest_router.z)
                kind = "vlink" if direction.is_vertical else "hlink"
                r.outputs[direction] = _OutputPort(direction, pace, bubble, dest, dest_unit, kind)

    # -- traffic -----------------------------------------------------------

    def load_traffic(self, traffic) -> None:
        if isinstance(traffic, UniformTraffic):
            for req in generate_uniform_schedule(traffic, self.graph, self.params.seed):
                self._schedule_packet(req)
        elif isinstance(traffic, TraceTraffic):
            for req in traffic.packets:
                self._schedule_packet(req)
        elif isinstance(traffic, FlowGraphTraffic):
            for entry_tick, hops in expand_flow_chains(traffic, self.graph):
                base = len(self._hops)
                self._hops.extend(hops)
                self._hop_children.extend([] for _ in hops)
                for i, hop in enumerate(hops):
                    if hop.parent >= 0:
                        self._hop_children[base + hop.parent].append(base + i)
                for i, hop in enumerate(hops):
                    if hop.parent == -1:
                        pid = self._schedule_packet(
                            PacketRequest(
                                entry_tick + hop.stage_delay_ticks, hop.src, hop.dst, hop.length
                            )
                        )
                        self._packet_hop[pid] = base + i
        else:  # plain sequence of PacketRequest
            for req in traffic:
                self._schedule_packet(req)

    def _schedule_packet(self, req: PacketRequest) -> int:
        if not 0 <= req.src < self.graph.num_routers:
            raise SimConfigError(f"packet source {req.src} is not a router id")
        if not 0 <= req.dst < self.graph.num_routers:
            raise SimConfigError(f"packet destination {req.dst} is not a router id")
        pid = self._next_packet_id
        self._next_packet_id += 1
        self.packets[pid] = PacketRecord(
            id=pid, src=req.src, dst=req.dst, length=req.length, create=req.inject_tick
        )
        heapq.heappush(self.inject_heap, (req.inject_tick, self._inject_serial, pid, req))
        self._inject_serial += 1
        self._wake(req.inject_tick)
        return pid

    # -- engine loop -------------------------------------------------------

    def _wake(self, tick: int) -> None:
        if tick not in self.heap_set:
            heapq.heappush(self.heap, tick)
            self.heap_set.add(tick)

    def run(self) -> SimReport:
        while self.heap:
            t = heapq.heappop(self.heap)
            self.heap_set.discard(t)
            self.now = t
            if self.in_flight and t - self.last_move > self.params.watchdog_window:
                raise SimDeadlockError(self._deadlock_diagnostic(t))
            self._inject_due(t)
            moved = self._movement_pass(t)
            if moved:
                self.last_move = t
                if self.in_flight or self.inject_heap:
                    self._wake(t + 1)
        if self.in_flight:
            raise SimDeadlockError(self._deadlock_diagnostic(self.now))
        return self._build_report()

    def _inject_due(self, t: int) -> None:
        while self.inject_heap and self.inject_heap[0][0] <= t:
            _, _, pid, req = heapq.heappop(self.inject_heap)
            router = self.routers[req.src]
            vc = router.inputs[None].vcs[0]
            head_ready = t + router.head_delay * router.period
            for seq in range(req.length):
                flit = _Flit(
                    packet_id=pid,
                    seq=seq,
                    is_head=seq == 0,
                    is_tail=seq == req.length - 1,
                    dst=req.dst,
                    create=req.inject_tick,
                )
                flit.ready = head_ready if seq == 0 else t
                vc.flits.append(flit)
                self.in_flight += 1
                self.injected_flits += 1
                self._count(router.z, "buffer_write", t)
                if self.params.collect_trace:
                    self.trace.append((t, router.id, "local", _flit_uid(flit), "inject"))
            self.active.add(router.id)
            self._wake(head_ready)

    def _movement_pass(self, t: int) -> bool:
        moved = False
        for rid in sorted(self.active):
            router = self.routers[rid]
            requests = self._gather_requests(router, t)
            for port_dir in _PORT_ORDER:
                port = router.outputs.get(port_dir)
                reqs = requests.get(port_dir)
                if port is None or not reqs:
                    continue
                if self._serve_port(router, port, reqs, t):
                    moved = True
        # Prune only after the whole pass: a router emptied early in the pass
        # may have received a flit from a later-served router.
        drained = [
            rid
            for rid in self.active
            if not any(
                vc.flits
                for unit in self.routers[rid].inputs.values()
                for vc in unit.vcs
            )
        ]
        for rid in drained:
            self.active.discard(rid)
        return moved

    def _gather_requests(self, router: _Router, t: int):
        """Front flits ready to move now, grouped by requested output port."""
        requests: dict[Optional[Direction], list[tuple[_InputUnit, _Vc]]] = {}
        for direction in router.input_order:
            unit = router.inputs[direction]
            if unit.next_read > t:
                self._wake(unit.next_read)
                continue
            for vc in unit.vcs:
                if not vc.flits:
                    continue
                flit = vc.flits[0]
                if flit.ready > t:
                    self._wake(flit.ready)
                    continue
                if not vc.route_set:
                    vc.route_dir = self.alg.step(
                        router.address, self.graph.address_of(flit.dst)
                    )
                    if vc.route_dir is not None and vc.route_dir not in router.outputs:
                        raise SimRoutingError(
                            f"routing demands a missing {vc.route_dir.value} link at "
                            f"router {router.id} toward router {flit.dst}"
                        )
                    vc.route_set = True
                requests.setdefault(vc.route_dir, []).append((unit, vc))
        return requests

    def _serve_port(self, router, port, reqs, t: int) -> bool:
        if port.next_free > t:
            self._wake(port.next_free)
            return False
        n = len(reqs)
        for k in range(n):
            unit, vc = reqs[(port.rr_grant + k) % n]
            flit = vc.flits[0]
            if flit.is_head and port.head_free > t:
                self._wake(port.head_free)
                continue
            if port.dest_unit is not None:
                if flit.is_head and vc.target is None:
                    vc.target = self._allocate_vc(port, flit.packet_id)
                    if vc.target is None:
                        continue  # no free downstream VC; retried on later wakes
                if not vc.target.has_space():
                    continue  # no credit for this flit
            port.rr_grant = (port.rr_grant + k + 1) % n
            self._launch(router, port, unit, vc, flit, t)
            return True
        return False

    def _allocate_vc(self, port: _OutputPort, packet_id: int) -> Optional[_Vc]:
        vcs = port.dest_unit.vcs
        n = len(vcs)
        for k in range(n):
            vc = vcs[(port.rr_alloc + k) % n]
            if vc.owner is None and vc.has_space():
                port.rr_alloc = (port.rr_alloc + k + 1) % n
                vc.owner = packet_id
                return vc
        return None

    def _launch(self, router, port, unit, vc, flit, t: int) -> None:
        vc.flits.popleft()
        unit.next_read = t + unit.pace
        port.next_free = t + port.pace
        target = vc.target
        if flit.is_tail:
            port.head_free = t + port.pace + port.bubble
            vc.owner = None
            vc.route_dir = None
            vc.route_set = False
            vc.target = None

        z = router.z
        self._count(z, "buffer_read", t)
        self._count(z, "crossbar", t)
        if self.params.collect_trace:
            port_name = port.direction.value if port.direction else "local"
            self.trace.append((t, router.id, port_name, _flit_uid(flit), "launch"))

        if port.dest_unit is None:
            self._eject(router, flit, t)
            return

        self._count(z, port.link_kind, t)
        dest_router = self.routers[port.dest_router]
        arrival = t
        if port.direction is Direction.UP and dest_router.period > router.period:
            arrival += dest_router.period  # ingress synchronization into slower domain
        if flit.is_head:
            flit.ready = arrival + dest_router.head_delay * dest_router.period
        else:
            flit.ready = arrival + port.dest_unit.pace
        target.flits.append(flit)
        self._count(dest_router.z, "buffer_write", t)
        self.active.add(dest_router.id)
        self._wake(flit.ready)

    def _eject(self, router: _Router, flit: _Flit, t: int) -> None:
        if flit.dst != router.id:
            raise AssertionError(
                f"flit of packet {flit.packet_id} ejected at router {router.id}, "
                f"destination was {flit.dst}"
            )
        self.in_flight -= 1
        self.ejected_flits += 1
        rec = self.packets[flit.packet_id]
        if flit.is_head:
            rec.head_eject = t
        if flit.is_tail:
            rec.tail_eject = t
            self._release_children(flit.packet_id, t)
        if self._measured(rec):
            latency = t - flit.create
            self.flit_lat_sum += latency
            self.flit_lat_hist[latency] += 1
            self.measured_flits += 1
        if self._in_window(t):
            self.eject_in_window[router.z] += 1
        if self.params.collect_trace:
            self.trace.append((t, router.id, "local", _flit_uid(flit), "eject"))

    def _release_children(self, pid: int, t: int) -> None:
        hop_idx = self._packet_hop.pop(pid, None)
        if hop_idx is None:
            return
        for child_idx in self._hop_children[hop_idx]:
            hop = self._hops[child_idx]
            child_pid = self._schedule_packet(
                PacketRequest(t + hop.stage_delay_ticks, hop.src, hop.dst, hop.length)
            )
            self._packet_hop[child_pid] = child_idx

    # -- measurement -------------------------------------------------------

    def _measured(self, rec: PacketRecord) -> bool:
        if rec.create < self.params.warmup_ticks:
            return False
        if self.params.measure_ticks is not None:
            return rec.create < self.params.warmup_ticks + self.params.measure_ticks
        return True

    def _in_window(self, t: int) -> bool:
        if t < self.params.warmup_ticks:
            return False
        if self.params.measure_ticks is not None:
            return t < self.params.warmup_ticks + self.params.measure_ticks
        return True

    def _count(self, z: int, kind: str, t: int) -> None:
        if self._in_window(t):
            self.activity[z][kind] += 1

    def _deadlock_diagnostic(self, t: int) -> str:
        stuck = []
        for rid in sorted(self.active):
            router = self.routers[rid]
            for direction in router.input_order:
                for i, vc in enumerate(router.inputs[direction].vcs):
                    if vc.flits and len(stuck) < 8:
                        front = vc.flits[0]
                        name = direction.value if direction else "local"
                        stuck.append(
                            f"router {rid} {name}/vc{i}: packet {front.packet_id} "
                            f"seq {front.seq} -> {vc.route_dir.value if vc.route_dir else '?'}"
                        )
        return (
            f"no flit movement since tick {self.last_move} (now {t}); "
            f"{self.in_flight} flits in flight; blocked flits: " + "; ".join(stuck)
        )

    # -- report ------------------------------------------------------------

    def _build_report(self) -> SimReport:
        clk = self.fastest_clk
        hist = dict(self.flit_lat_hist)
        lat_values = sorted(hist)
        total = self.measured_flits

        def percentile(q: float) -> float:
            if not total:
                return 0.0
            target = max(1, math.ceil(q * total))
            seen = 0
            for v in lat_values:
                seen += hist[v]
                if seen >= target:
                    return float(v * clk)
            return float(lat_values[-1] * clk)

        avg_flit = (self.flit_lat_sum / total * clk) if total else 0.0
        measured_packets = [
            rec
            for rec in self.packets.values()
            if self._measured(rec) and rec.tail_eject is not None
        ]
        if measured_packets:
            avg_packet = (
                sum(r.tail_eject - r.create for r in measured_packets)
                / len(measured_packets)
                * clk
            )
        else:
            avg_packet = 0.0

        window = self.params.measure_ticks
        throughput = {}
        for z in range(1, self.cfg.num_layers + 1):
            if window:
                throughput[z] = self.eject_in_window[z] / window
            else:
                span = max(self.now - self.params.warmup_ticks, 1)
                throughput[z] = self.eject_in_window[z] / span

        energy = 0.0
        bottom_feat = self.cfg.layer(self.cfg.num_layers).tech.feature_size
        for z, counters in self.activity.items():
            factor = 1.0
            if self.energy.scale_with_feature_size:
                rel = self.cfg.layer(z).tech.feature_size / bottom_feat
                factor = rel * rel
            for kind in ACTIVITY_KINDS:
                energy += counters[kind] * self.energy.weight(kind) * factor

        return SimReport(
            fastest_clk_ps=clk,
            total_ticks=self.now,
            injected_flits=self.injected_flits,
            ejected_flits=self.ejected_flits,
            measured_flits=total,
            measured_packets=len(measured_packets),
            avg_flit_latency_ps=avg_flit,
            p50_flit_latency_ps=percentile(0.50),
            p99_flit_latency_ps=percentile(0.99),
            max_flit_latency_ps=float(lat_values[-1] * clk) if lat_values else 0.0,
            avg_packet_latency_ps=avg_packet,
            throughput_by_layer=throughput,
            activity_by_layer={z: dict(c) for z, c in self.activity.items()},
            energy_proxy=energy,
            latency_hist_ticks=hist,
            packets=sorted(self.packets.values(), key=lambda r: r.id),
            trace=self.trace,
        )


def _flit_uid(flit: _Flit) -> int:
    return flit.packet_id * 100_000 + flit.seq
