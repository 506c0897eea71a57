"""Closed-form zero-load latency, throughput, propagation-speed and detour thresholds.

All latencies are picoseconds; distances are micrometers; throughput is flits
per second.  `route_latency_estimate` composes the per-router terms along a
concrete route in exact integer picoseconds so simulation results can be
compared with zero tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .topology import Address, Direction, Position, StackConfig, TechnologyNode

# Sentinel hop count for "a detour never pays": larger than any chip dimension.
INF_HOPS = 2**31 - 1


class PerfModelError(ValueError):
    """Raised for out-of-contract model queries."""


@dataclass(frozen=True)
class Packet:
    """Model-level packet: physical endpoints plus payload length in flits."""

    src: Position
    dst: Position
    length: int = 1

    def __post_init__(self) -> None:
        if self.length < 1:
            raise PerfModelError(f"packet length must be >= 1, got {self.length}")


@dataclass(frozen=True)
class LayerTiming:
    """Timing view of one layer's technology node."""

    clk_period: int       # ps
    head_delay: int       # cycles
    pipeline_depth: int   # cycles
    router_pitch: float   # um

    @classmethod
    def of(cls, tech: TechnologyNode) -> "LayerTiming":
        return cls(tech.clk_period, tech.head_delay, tech.pipeline_depth, tech.router_pitch)


def layer_timing(stack: StackConfig, z: int) -> LayerTiming:
    return LayerTiming.of(stack.layer(z).tech)


def horizontal_distance(pkt: Packet) -> float:
    """Manhattan distance between the endpoints' x/y locations, micrometers."""
    return abs(pkt.src.x - pkt.dst.x) + abs(pkt.src.y - pkt.dst.y)


def head_latency_h(pkt: Packet, t: LayerTiming) -> float:
    """Zero-load head latency of a within-layer transmission, picoseconds."""
    if pkt.src.z != pkt.dst.z:
        raise PerfModelError("horizontal latency needs both endpoints in one layer")
    s = horizontal_distance(pkt)
    return (s / t.router_pitch + 1.0) * t.head_delay * t.clk_period


def throughput_h(pkt: Packet, t: LayerTiming) -> float:
    """Flits per second a single router sustains for this packet length."""
    if t.pipeline_depth > t.head_delay:
        raise PerfModelError("pipeline_depth must not exceed head_delay")
    cycles = pkt.length + t.head_delay - t.pipeline_depth
    return pkt.length / (cycles * t.clk_period * 1e-12)


def head_latency_v(pkt: Packet, stack: StackConfig, direction: Direction) -> float:
    """Zero-load head latency of a purely vertical transmission, picoseconds.

    Downwards is the plain sum of per-router head delays.  Upwards adds one
    clock period of the upper (slower) endpoint for synchronization; a
    same-layer "up" call is rejected because that term would be meaningless.
    """
    src_z, dst_z = pkt.src.z, pkt.dst.z
    if direction is Direction.DOWN:
        if src_z > dst_z:
            raise PerfModelError("downward packet must not start below its destination")
        upper, lower = src_z, dst_z
        sync = 0
    elif direction is Direction.UP:
        if src_z <= dst_z:
            raise PerfModelError("upward packet must start strictly below its destination")
        upper, lower = dst_z, src_z
        sync = stack.layer(upper).tech.clk_period
    else:
        raise PerfModelError(f"vertical latency direction must be up or down, got {direction}")
    total = sync
    for z in range(upper, lower + 1):
        tech = stack.layer(z).tech
        total += tech.head_delay * tech.clk_period
    return float(total)


def throughput_v(pkt: Packet, stack: StackConfig, span: tuple[int, int]) -> float:
    """Sustained flit rate across a layer span: the slowest layer wins."""
    lo, hi = span
    if lo > hi:
        raise PerfModelError(f"empty layer span {span}")
    return min(
        throughput_h(pkt, layer_timing(stack, z)) for z in range(lo, hi + 1)
    )


def propagation_speed(t: LayerTiming) -> float:
    """Distance a head flit covers per unit time within a layer, m/s."""
    return t.router_pitch / (t.head_delay * t.clk_period) * 1e6


def rerouting_threshold_phi(
    slow: LayerTiming, slow_index: int, fast: LayerTiming, fast_index: int
) -> float:
    """Physical distance above which a detour through the fast layer is quicker.

    Assumes the two layers are adjacent.  Returns a sentinel distance larger
    than any chip (INF_HOPS grid units) when the slow layer is not above the
    fast one or the fast layer offers no per-hop advantage.
    """
    sentinel = INF_HOPS * fast.router_pitch
    if slow_index >= fast_index:
        return sentinel
    slow_term = slow.head_delay * slow.clk_period
    fast_term = fast.head_delay * fast.clk_period
    denom = slow_term * fast.router_pitch - fast_term * slow.router_pitch
    if denom <= 0:
        return sentinel
    numer = (slow_term + fast_term + slow.clk_period) * slow.router_pitch * fast.router_pitch
    return min(numer / denom, sentinel)


def rerouting_threshold_hops(phi: float, fast_pitch: float) -> int:
    """Convert a physical detour threshold into fast-layer hops (ceiling)."""
    if fast_pitch <= 0:
        raise PerfModelError(f"fast_pitch must be > 0, got {fast_pitch}")
    hops = math.ceil(phi / fast_pitch)
    return min(hops, INF_HOPS)


def detour_threshold_um(stack: StackConfig, slow_z: int, fast_z: int) -> float:
    """Stack-aware detour threshold; equals the two-layer formula for adjacent layers.

    The detour cost from a layer to a non-adjacent fast layer includes every
    intermediate layer's head delay on both the way down and the way up, so the
    break-even distance grows with the separation.
    """
    if slow_z >= fast_z:
        return INF_HOPS * stack.layer(fast_z).tech.router_pitch
    slow = layer_timing(stack, slow_z)
    fast = layer_timing(stack, fast_z)
    sentinel = INF_HOPS * fast.router_pitch
    slow_term = slow.head_delay * slow.clk_period
    fast_term = fast.head_delay * fast.clk_period
    denom = slow_term * fast.router_pitch - fast_term * slow.router_pitch
    if denom <= 0:
        return sentinel
    span_cost = sum(
        stack.layer(z).tech.head_delay * stack.layer(z).tech.clk_period
        for z in range(slow_z, fast_z + 1)
    )
    # Fixed detour overhead: both vertical traversals plus the sync cycle, with
    # the junction routers in the fast layer counted once.
    fixed = 2 * span_cost - slow_term - fast_term + slow.clk_period
    return min(fixed * slow.router_pitch * fast.router_pitch / denom, sentinel)


RouteStep = tuple[Address, Optional[Direction]]


def route_latency_estimate(route: Sequence[RouteStep], stack: StackConfig) -> int:
    """Zero-load head latency along a concrete route, exact integer picoseconds.

    `route` lists every visited router with the outgoing direction (None for
    the final router).  Each router contributes head_delay * clk_period; every
    upward crossing into a strictly slower clock domain adds one period of the
    receiving layer.
    """
    if not route:
        raise PerfModelError("route must contain at least one router")
    total = 0
    for i, (addr, direction) in enumerate(route):
        tech = stack.layer(addr.z).tech
        total += tech.head_delay * tech.clk_period
        last = i == len(route) - 1
        if last:
            if direction is not None:
                raise PerfModelError("final route step must not have an outgoing direction")
            continue
        if direction is None:
            raise PerfModelError(f"route step {i} is missing its outgoing direction")
        nxt = route[i + 1][0]
        if not _is_step(addr, nxt, direction):
            raise PerfModelError(
                f"route is disconnected at step {i}: {tuple(addr)} -{direction.value}-> {tuple(nxt)}"
            )
        if direction is Direction.UP:
            upper = stack.layer(nxt.z).tech.clk_period
            if upper > tech.clk_period:
                total += upper
    return total


def _is_step(v: Address, w: Address, direction: Direction) -> bool:
    if direction is Direction.UP:
        return w.z == v.z - 1 and w.x == v.x and w.y == v.y
    if direction is Direction.DOWN:
        return w.z == v.z + 1 and w.x == v.x and w.y == v.y
    if w.z != v.z:
        return False
    dx, dy = w.x - v.x, w.y - v.y
    if direction is Direction.NORTH:
        return dx == 0 and dy < 0
    if direction is Direction.SOUTH:
        return dx == 0 and dy > 0
    if direction is Direction.EAST:
        return dy == 0 and dx > 0
    if direction is Direction.WEST:
        return dy == 0 and dx < 0
    return False
