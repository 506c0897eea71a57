"""Zero-load model/simulation comparisons and the batch sweep machinery.

The sweeps mirror the evaluation style of the analytical models: enumerate
endpoint pairs at each axis value, obtain both the closed-form estimate and a
measured latency from isolated single-packet simulations, and report the
enhancement of an algorithm relative to plain dimension-order routing.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

from . import perfmodel, routing, sim
from .config import ExperimentConfig, LayerConfig
from .routing import RoutingAlgorithm
from .sim import RouterConfig, SimParams, SimReport
from .topology import Address, Direction, StackConfig, TopologyGraph
from .traffic import PacketRequest, UniformTraffic

RouteSteps = list[tuple[Address, Optional[Direction]]]


class ExperimentError(RuntimeError):
    pass


def trace_route(
    graph: TopologyGraph, alg: RoutingAlgorithm, src: int, dst: int, bound: Optional[int] = None
) -> RouteSteps:
    """Apply the routing step by step, returning (address, outgoing direction) rows."""
    limit = bound if bound is not None else max(graph.num_routers, 16)
    steps: RouteSteps = []
    current = src
    d_addr = graph.address_of(dst)
    while True:
        addr = graph.address_of(current)
        direction = alg.step(addr, d_addr)
        steps.append((addr, direction))
        if direction is None:
            if current != dst:
                raise ExperimentError(
                    f"route {src}->{dst} delivered locally at router {current}"
                )
            return steps
        nxt = graph.neighbor(current, direction)
        if nxt is None:
            raise ExperimentError(
                f"route {src}->{dst} demands a missing {direction.value} link at {current}"
            )
        current = nxt
        if len(steps) > limit:
            raise ExperimentError(f"route {src}->{dst} exceeded {limit} hops")


def model_head_ticks(
    graph: TopologyGraph, alg: RoutingAlgorithm, src: int, dst: int
) -> int:
    """Analytical zero-load head latency in global ticks for one pair."""
    route = trace_route(graph, alg, src, dst)
    ps = perfmodel.route_latency_estimate(route, graph.cfg)
    return ps // graph.cfg.fastest_clk


def model_stream_stats(
    graph: TopologyGraph,
    alg: RoutingAlgorithm,
    router_cfg: RouterConfig,
    src: int,
    dst: int,
    length: int,
) -> tuple[int, int, float]:
    """(head_ticks, packet_ticks, mean flit ticks) for one packet under zero load.

    Body flits stream behind the head at the route's bottleneck pace, so the
    j-th flit ejects j * pace ticks after the head.
    """
    route = trace_route(graph, alg, src, dst)
    head = perfmodel.route_latency_estimate(route, graph.cfg) // graph.cfg.fastest_clk
    pace = sim.route_steady_pace(graph.cfg, router_cfg, route)
    packet = head + (length - 1) * pace
    mean_flit = head + (length - 1) * pace / 2.0
    return head, packet, mean_flit


def simulate_isolated_pairs(
    graph: TopologyGraph,
    alg: RoutingAlgorithm,
    router_cfg: RouterConfig,
    pairs: Sequence[tuple[int, int]],
    length: int = 1,
) -> list[sim.PacketRecord]:
    """One packet per pair, spaced far enough apart that every packet sees zero load."""
    if not pairs:
        return []
    worst_head = max(model_head_ticks(graph, alg, s, d) for s, d in pairs)
    worst_pace = max(graph.cfg.period_ticks(z) for z in range(1, graph.cfg.num_layers + 1))
    gap = worst_head + (length + 8) * worst_pace + 8
    schedule = [
        PacketRequest(i * gap, s, d, length) for i, (s, d) in enumerate(pairs)
    ]
    report = sim.run(graph, alg, router_cfg, schedule, SimParams(watchdog_window=max(10_000, 2 * gap)))
    return report.packets


def compare_zero_load(
    graph: TopologyGraph,
    alg: RoutingAlgorithm,
    router_cfg: RouterConfig,
    pairs: Sequence[tuple[int, int]],
    length: int = 1,
) -> list[tuple[int, int, int, int]]:
    """(src, dst, simulated head ticks, model head ticks) for each pair."""
    records = simulate_isolated_pairs(graph, alg, router_cfg, pairs, length)
    out = []
    for (s, d), rec in zip(pairs, records):
        model = model_head_ticks(graph, alg, s, d)
        simulated = rec.head_eject - rec.create
        out.append((s, d, simulated, model))
    return out


# -- pair populations --------------------------------------------------------


def slowest_layer(stack: StackConfig) -> int:
    periods = [stack.period_ticks(z) for z in range(1, stack.num_layers + 1)]
    return periods.index(max(periods)) + 1


def pairs_at_distance(
    graph: TopologyGraph, h: int, mode: str, slow_z: Optional[int] = None, fast_z: Optional[int] = None
) -> list[tuple[int, int]]:
    """Endpoint pairs whose slow-layer hop distance is exactly h.

    mode "to_fast": sources in the slow layer, destinations in the fast layer
    whose x/y projection is h slow-layer hops away.  mode "in_slow": both
    endpoints in the slow layer.
    """
    stack = graph.cfg
    sz = slow_z if slow_z is not None else slowest_layer(stack)
    fz = fast_z if fast_z is not None else stack.num_layers
    stride = stack.layer(sz).grid_stride
    grid_h = h * stride
    pairs = []
    if mode == "to_fast":
        for s in graph.layer_ids(sz):
            sa = graph.address_of(s)
            for d in graph.layer_ids(fz):
                da = graph.address_of(d)
                if abs(sa.x - da.x) + abs(sa.y - da.y) == grid_h:
                    pairs.append((s, d))
    elif mode == "in_slow":
        for s in graph.layer_ids(sz):
            sa = graph.address_of(s)
            for d in graph.layer_ids(sz):
                da = graph.address_of(d)
                if s != d and abs(sa.x - da.x) + abs(sa.y - da.y) == grid_h:
                    pairs.append((s, d))
    else:
        raise ExperimentError(f"unknown pair mode {mode!r}")
    return pairs


# -- sweeps -------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    axis: str
    axis_value: float
    algorithm: str
    model_latency_ps: float
    sim_latency_ps: float
    enhancement: float


def write_sweep_csv(path, rows: Sequence[SweepRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["axis", "axis_value", "algorithm", "model_latency_ps", "sim_latency_ps", "enhancement"]
        )
        for r in rows:
            writer.writerow(
                [r.axis, repr(r.axis_value), r.algorithm,
                 repr(r.model_latency_ps), repr(r.sim_latency_ps), repr(r.enhancement)]
            )


def _worker_count() -> int:
    raw = os.environ.get("HETERO_NOC_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _map_jobs(fn: Callable, jobs: list) -> list:
    workers = _worker_count()
    if workers <= 1 or len(jobs) <= 1:
        return [fn(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


def _algorithms_for(cfg: ExperimentConfig, stack: StackConfig) -> dict[str, RoutingAlgorithm]:
    """The configured algorithm plus the dimension-order baseline."""
    algs = {"xyz": routing.algorithm_for_stack(stack, routing.XYZ)}
    if cfg.routing.variant != routing.XYZ:
        algs[cfg.routing.variant] = cfg.build_algorithm(stack)
    return algs


def _mean_latencies_job(args) -> tuple[float, float]:
    cfg, variant, h, pair_mode, length = args
    stack = cfg.build_stack()
    graph = cfg.build_graph()
    algs = _algorithms_for(cfg, stack)
    alg = algs[variant]
    router_cfg = cfg.build_router_config() if variant != "xyz" else replace(
        cfg.build_router_config(), kind=sim.STANDARD
    )
    pairs = pairs_at_distance(graph, h, pair_mode)
    if not pairs:
        raise ExperimentError(f"no endpoint pairs at hop distance {h}")
    records = simulate_isolated_pairs(graph, alg, router_cfg, pairs, length)
    clk = stack.fastest_clk
    sim_mean = sum(r.head_eject - r.create for r in records) / len(records) * clk
    model_mean = sum(model_head_ticks(graph, alg, s, d) for s, d in pairs) / len(pairs) * clk
    return model_mean, sim_mean


def sweep_hop_distance(
    cfg: ExperimentConfig,
    distances: Sequence[int],
    pair_mode: Optional[str] = None,
    length: int = 1,
) -> list[SweepRow]:
    """Zero-load latency and enhancement per slow-layer hop distance.

    The baseline runs with standard routers; the configured algorithm runs with
    the configured router kind, so a co-designed setup is compared as a whole.
    """
    stack = cfg.build_stack()
    mode = pair_mode or ("in_slow" if cfg.routing.variant == routing.R2 else "to_fast")
    variants = list(_algorithms_for(cfg, stack))
    jobs = [(cfg, v, h, mode, length) for h in distances for v in variants]
    results = _map_jobs(_mean_latencies_job, jobs)
    by_key = {job[1:3]: res for job, res in zip(jobs, results)}
    rows = []
    for h in distances:
        base_model, base_sim = by_key[("xyz", h)]
        for v in variants:
            model, simulated = by_key[(v, h)]
            rows.append(
                SweepRow(
                    axis="hop_distance",
                    axis_value=float(h),
                    algorithm=v,
                    model_latency_ps=model,
                    sim_latency_ps=simulated,
                    enhancement=base_sim / simulated if simulated else float("inf"),
                )
            )
    return rows


def _uniform_rate_job(args) -> tuple[float, float]:
    cfg, variant, rate = args
    stack = cfg.build_stack()
    graph = cfg.build_graph()
    algs = _algorithms_for(cfg, stack)
    alg = algs[variant]
    router_cfg = cfg.build_router_config() if variant != "xyz" else replace(
        cfg.build_router_config(), kind=sim.STANDARD
    )
    tc = cfg.traffic
    if tc is None or tc.mode != "uniform":
        raise ExperimentError("injection-rate sweeps need uniform traffic in the config")
    traffic = UniformTraffic(rate, tc.packet_length, tc.duration_ticks)
    report = sim.run(graph, alg, router_cfg, traffic, cfg.build_sim_params(), cfg.build_energy())
    # Zero-load reference: average head latency over a fixed diagonal pair set.
    sample = [(s, d) for s in graph.router_ids() for d in graph.router_ids() if s != d]
    step = max(1, len(sample) // 64)
    sample = sample[::step]
    clk = stack.fastest_clk
    model = sum(model_head_ticks(graph, alg, s, d) for s, d in sample) / len(sample) * clk
    return model, report.avg_flit_latency_ps


def sweep_injection_rate(cfg: ExperimentConfig, rates: Sequence[float]) -> list[SweepRow]:
    stack = cfg.build_stack()
    variants = list(_algorithms_for(cfg, stack))
    jobs = [(cfg, v, r) for r in rates for v in variants]
    results = _map_jobs(_uniform_rate_job, jobs)
    by_key = {(job[1], job[2]): res for job, res in zip(jobs, results)}
    rows = []
    for r in rates:
        base_sim = by_key[("xyz", r)][1]
        for v in variants:
            model, simulated = by_key[(v, r)]
            rows.append(
                SweepRow(
                    axis="injection_rate",
                    axis_value=float(r),
                    algorithm=v,
                    model_latency_ps=model,
                    sim_latency_ps=simulated,
                    enhancement=base_sim / simulated if simulated else float("inf"),
                )
            )
    return rows


def scale_slow_clock(cfg: ExperimentConfig, ratio: int) -> ExperimentConfig:
    """Rebuild the config with the slowest layer's clock at ratio x the fastest."""
    if ratio < 1:
        raise ExperimentError(f"clock ratio must be >= 1, got {ratio}")
    fastest = min(lc.clk_period_ps for lc in cfg.layers)
    slow_idx = max(
        range(len(cfg.layers)), key=lambda i: cfg.layers[i].clk_period_ps
    )
    layers = list(cfg.layers)
    layers[slow_idx] = replace(layers[slow_idx], clk_period_ps=fastest * ratio)
    return replace(cfg, layers=tuple(layers))


def _cf_job(args) -> tuple[float, float]:
    cfg, variant, ratio, mode, length = args
    scaled = scale_slow_clock(cfg, ratio)
    distances = [max(1, scaled.layers[0].rows - 1)]
    return _mean_latencies_job((scaled, variant, distances[0], mode, length))


def sweep_clock_ratio(
    cfg: ExperimentConfig, ratios: Sequence[int], pair_mode: Optional[str] = None, length: int = 1
) -> list[SweepRow]:
    stack = cfg.build_stack()
    mode = pair_mode or ("in_slow" if cfg.routing.variant == routing.R2 else "to_fast")
    variants = list(_algorithms_for(cfg, stack))
    jobs = [(cfg, v, ratio, mode, length) for ratio in ratios for v in variants]
    results = _map_jobs(_cf_job, jobs)
    by_key = {(job[1], job[2]): res for job, res in zip(jobs, results)}
    rows = []
    for ratio in ratios:
        base_sim = by_key[("xyz", ratio)][1]
        for v in variants:
            model, simulated = by_key[(v, ratio)]
            rows.append(
                SweepRow(
                    axis="cf",
                    axis_value=float(ratio),
                    algorithm=v,
                    model_latency_ps=model,
                    sim_latency_ps=simulated,
                    enhancement=base_sim / simulated if simulated else float("inf"),
                )
            )
    return rows
