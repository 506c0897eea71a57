"""Routing functions for the heterogeneous 3D mesh.

Three deterministic algorithms:

* ``xyz``  -- plain dimension order (X, then Y, then Z).
* ``r1``   -- descend-first: packets heading to a lower (faster) layer drop down
  immediately and do their horizontal movement there; packets heading up
  resolve X/Y first and rise only at the destination column.
* ``r2``   -- threshold detour: packets whose remaining horizontal distance
  exceeds a per-layer hop threshold descend toward a designated fast layer even
  when source and destination share a layer.

An intentionally broken ``adversarial_allturns`` routing (mixed X-first/Y-first
by destination parity) is provided as a negative control for the verifier.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import FrozenSet, Mapping, Optional

from . import perfmodel
from .topology import Address, Direction, StackConfig

RoutingDecision = FrozenSet[Direction]

EMPTY: RoutingDecision = frozenset()

XYZ = "xyz"
R1 = "r1"
R2 = "r2"
ADVERSARIAL = "adversarial_allturns"

VARIANTS = (XYZ, R1, R2, ADVERSARIAL)


class RoutingError(ValueError):
    """Raised for invalid routing parameters or non-deterministic selections."""


def _x_step(v: Address, d: Address, stride: int) -> Optional[Direction]:
    # A step is taken only when it cannot overshoot the destination column;
    # on stride-nested grids a coarse layer may be unable to finish alignment.
    if d.x - v.x >= stride:
        return Direction.EAST
    if v.x - d.x >= stride:
        return Direction.WEST
    return None


def _y_step(v: Address, d: Address, stride: int) -> Optional[Direction]:
    if d.y - v.y >= stride:
        return Direction.SOUTH
    if v.y - d.y >= stride:
        return Direction.NORTH
    return None


def route_xyz(v: Address, d: Address, stride: int = 1) -> RoutingDecision:
    """Dimension-order routing: resolve X, then Y, then the layer.

    `stride` is the current layer's grid step.  Each axis is resolved as far
    as the layer's grid allows; residual misalignment is finished after the
    vertical move, in a layer whose grid contains the destination column.
    """
    if v == d:
        return EMPTY
    step = _x_step(v, d, stride) or _y_step(v, d, stride)
    if step is not None:
        return frozenset((step,))
    if v.z > d.z:
        return frozenset((Direction.UP,))
    if v.z < d.z:
        return frozenset((Direction.DOWN,))
    raise RoutingError(
        f"{tuple(v)} cannot reach {tuple(d)} on a stride-{stride} grid"
    )


def route_r1(v: Address, d: Address) -> RoutingDecision:
    """Descend-first routing.

    Below-destination traffic keeps X-then-Y order and rises last; traffic whose
    destination lies in a lower layer descends before any horizontal movement.
    """
    if v == d:
        return EMPTY
    if v.z < d.z:
        return frozenset((Direction.DOWN,))
    if v.x < d.x:
        return frozenset((Direction.EAST,))
    if v.x > d.x:
        return frozenset((Direction.WEST,))
    if v.y > d.y:
        return frozenset((Direction.NORTH,))
    if v.y < d.y:
        return frozenset((Direction.SOUTH,))
    return frozenset((Direction.UP,))


@dataclass(frozen=True)
class R2Params:
    """Detour parameters: the design-time target layer and per-layer hop thresholds.

    ``phi_by_layer`` maps a layer index to the maximum horizontal grid distance
    that is still routed in place; anything larger descends toward
    ``target_layer``.  Layers at or below the target carry the sentinel.
    """

    target_layer: int
    phi_by_layer: Mapping[int, int]

    def phi(self, z: int) -> int:
        return self.phi_by_layer.get(z, perfmodel.INF_HOPS)


def route_r2(v: Address, d: Address, params: R2Params) -> RoutingDecision:
    """Threshold-detour routing.

    Uses the combined Manhattan guard |dx| + |dy| against the current layer's
    threshold; within the threshold it behaves exactly like ``route_r1``.
    """
    if v == d:
        return EMPTY
    if v.z < d.z:
        return frozenset((Direction.DOWN,))
    distance = abs(v.x - d.x) + abs(v.y - d.y)
    if distance > params.phi(v.z):
        return frozenset((Direction.DOWN,))
    return route_r1(v, d)


def route_adversarial(v: Address, d: Address, stride: int = 1) -> RoutingDecision:
    """Minimal but unsafe routing: X-first or Y-first depending on destination parity.

    Mixing both orders makes every horizontal turn possible, which closes turn
    cycles in the channel dependency graph.
    """
    if v == d:
        return EMPTY
    x_first = (d.x + d.y) % 2 == 0
    order = (_x_step, _y_step) if x_first else (_y_step, _x_step)
    for stepper in order:
        step = stepper(v, d, stride)
        if step is not None:
            return frozenset((step,))
    return frozenset((Direction.UP if v.z > d.z else Direction.DOWN,))


def select(decision: RoutingDecision) -> Optional[Direction]:
    """Collapse a routing decision to one direction; None means deliver locally."""
    if not decision:
        return None
    if len(decision) > 1:
        raise RoutingError(f"selection needs a deterministic decision, got {sorted(d.value for d in decision)}")
    return next(iter(decision))


@dataclass(frozen=True)
class RoutingAlgorithm:
    """A configured routing function.

    ``xy_first_tie_pairs`` holds (current_layer, destination_layer) pairs with
    equal propagation speed for which the design-time tie-break prefers plain
    dimension order over descending first.  ``layer_strides`` carries the grid
    step of each layer (index z-1) so dimension-order movement never overshoots
    on stride-nested grids; unset layers default to stride 1.
    """

    variant: str
    r2_params: Optional[R2Params] = None
    xy_first_tie_pairs: FrozenSet[tuple[int, int]] = field(default_factory=frozenset)
    layer_strides: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise RoutingError(f"unknown routing variant {self.variant!r}")
        if self.variant == R2 and self.r2_params is None:
            raise RoutingError("r2 routing requires R2Params")

    def stride_of(self, z: int) -> int:
        if 1 <= z <= len(self.layer_strides):
            return self.layer_strides[z - 1]
        return 1

    def decide(self, v: Address, d: Address) -> RoutingDecision:
        if self.variant == XYZ:
            return route_xyz(v, d, self.stride_of(v.z))
        if self.variant == ADVERSARIAL:
            return route_adversarial(v, d, self.stride_of(v.z))
        if v.z < d.z and (v.z, d.z) in self.xy_first_tie_pairs:
            return route_xyz(v, d, self.stride_of(v.z))
        if self.variant == R1:
            return route_r1(v, d)
        return route_r2(v, d, self.r2_params)

    def step(self, v: Address, d: Address) -> Optional[Direction]:
        return select(self.decide(v, d))


def algorithm_for_stack(
    stack: StackConfig,
    variant: str,
    r2_params: Optional[R2Params] = None,
    xy_first_tie_pairs: FrozenSet[tuple[int, int]] = frozenset(),
) -> RoutingAlgorithm:
    """Convenience constructor that picks up the stack's layer strides."""
    strides = tuple(spec.grid_stride for spec in stack.layers)
    return RoutingAlgorithm(
        variant=variant,
        r2_params=r2_params,
        xy_first_tie_pairs=xy_first_tie_pairs,
        layer_strides=strides,
    )


def r2_params_for_stack(
    stack: StackConfig,
    target_layer: Optional[int] = None,
    phi_override: Optional[int] = None,
) -> R2Params:
    """Precompute per-layer detour thresholds for a stack.

    Thresholds come from the analytical break-even distance divided by the fast
    layer's pitch; ``phi_override`` replaces them wholesale (0 forces a detour
    for every non-local packet, the sentinel disables detours).
    """
    target = stack.num_layers if target_layer is None else target_layer
    if not 1 <= target <= stack.num_layers:
        raise RoutingError(f"target layer {target} out of range 1..{stack.num_layers}")
    if phi_override is not None and phi_override < 0:
        raise RoutingError(f"phi_override must be >= 0, got {phi_override}")
    fast_pitch = stack.layer(target).tech.router_pitch
    phi: dict[int, int] = {}
    for z in range(1, stack.num_layers + 1):
        if z >= target:
            phi[z] = perfmodel.INF_HOPS
        elif phi_override is not None:
            phi[z] = phi_override
        else:
            phi_um = perfmodel.detour_threshold_um(stack, z, target)
            phi[z] = perfmodel.rerouting_threshold_hops(phi_um, fast_pitch)
    return R2Params(target_layer=target, phi_by_layer=phi)


def equal_speed_tie_pairs(stack: StackConfig) -> FrozenSet[tuple[int, int]]:
    """(upper, lower) layer pairs whose propagation speeds coincide exactly."""
    speeds = {
        z: perfmodel.propagation_speed(perfmodel.layer_timing(stack, z))
        for z in range(1, stack.num_layers + 1)
    }
    pairs = {
        (a, b)
        for a in speeds
        for b in speeds
        if a < b and speeds[a] == speeds[b]
    }
    return frozenset(pairs)


def check_speed_ordering(stack: StackConfig) -> None:
    """Reject stacks where some lower layer propagates slower than a layer above it.

    Descend-first routing presumes lower layers are at least as fast; exact ties
    are allowed and resolved by the configured tie-break.
    """
    speeds = [
        perfmodel.propagation_speed(perfmodel.layer_timing(stack, z))
        for z in range(1, stack.num_layers + 1)
    ]
    for upper in range(len(speeds)):
        for lower in range(upper + 1, len(speeds)):
            if speeds[lower] < speeds[upper]:
                raise RoutingError(
                    f"layer {lower + 1} (speed {speeds[lower]:.4g} m/s) is slower than "
                    f"layer {upper + 1} ({speeds[upper]:.4g} m/s); descend-first routing "
                    "would descend into a slower layer"
                )


# Possible consecutive-direction pairs per algorithm.  The descend-first table
# also covers threshold-detour routing: after an upward move only another
# upward move can follow, and a downward move never turns upward.
_N, _E, _S, _W, _U, _D = (
    Direction.NORTH,
    Direction.EAST,
    Direction.SOUTH,
    Direction.WEST,
    Direction.UP,
    Direction.DOWN,
)

ALLOWED_TURNS_DESCEND_FIRST: FrozenSet[tuple[Direction, Direction]] = frozenset({
    (_N, _N), (_N, _U),
    (_E, _N), (_E, _E), (_E, _S), (_E, _U),
    (_S, _S), (_S, _U),
    (_W, _N), (_W, _S), (_W, _W), (_W, _U),
    (_U, _U),
    (_D, _N), (_D, _E), (_D, _S), (_D, _W), (_D, _D),
})

# Dimension order: x before y, verticals last.  Downward moves may be followed
# by horizontal refinement on stride-nested grids (a coarse layer can leave a
# sub-stride residual that only a finer layer can finish).
ALLOWED_TURNS_XYZ: FrozenSet[tuple[Direction, Direction]] = frozenset(
    {(h, h) for h in (_N, _E, _S, _W, _U, _D)}
    | {(x, y) for x in (_E, _W) for y in (_N, _S)}
    | {(h, v) for h in (_N, _E, _S, _W) for v in (_U, _D)}
    | {(_D, h) for h in (_N, _E, _S, _W)}
)


def allowed_turns(variant: str) -> FrozenSet[tuple[Direction, Direction]]:
    if variant == XYZ:
        return ALLOWED_TURNS_XYZ
    if variant in (R1, R2):
        return ALLOWED_TURNS_DESCEND_FIRST
    return frozenset((a, b) for a in Direction for b in Direction)
