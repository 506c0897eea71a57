"""3D heterogeneous mesh topology: layer stacks, router addresses, and the network digraph.

Layers are stacked with the coarsest technology on top (layer index 1) and the
finest at the bottom.  All layers share the bottom layer's logical grid; a layer
occupies grid positions at a configurable stride, and every occupied position of
a layer must also exist in the layer below it, so every non-bottom router has a
vertical link to the router directly underneath.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, NamedTuple, Optional, Sequence


class TopologyError(ValueError):
    """Raised for invalid stack descriptions or out-of-range queries."""


class Direction(Enum):
    NORTH = "north"
    EAST = "east"
    SOUTH = "south"
    WEST = "west"
    UP = "up"
    DOWN = "down"

    @property
    def opposite(self) -> "Direction":
        return _OPPOSITE[self]

    @property
    def is_vertical(self) -> bool:
        return self in (Direction.UP, Direction.DOWN)

    @property
    def is_horizontal(self) -> bool:
        return not self.is_vertical

    def __repr__(self) -> str:  # compact in witness dumps
        return self.value


_OPPOSITE = {
    Direction.NORTH: Direction.SOUTH,
    Direction.SOUTH: Direction.NORTH,
    Direction.EAST: Direction.WEST,
    Direction.WEST: Direction.EAST,
    Direction.UP: Direction.DOWN,
    Direction.DOWN: Direction.UP,
}

# Stable iteration order for deterministic arbitration and reports.
DIRECTIONS = (
    Direction.NORTH,
    Direction.EAST,
    Direction.SOUTH,
    Direction.WEST,
    Direction.UP,
    Direction.DOWN,
)


class Address(NamedTuple):
    """Logical router coordinates on the shared grid; z is 1-based, 1 = top layer."""

    x: int
    y: int
    z: int


class Position(NamedTuple):
    """Physical router location; x/y in micrometers, z the layer index."""

    x: float
    y: float
    z: int


@dataclass(frozen=True)
class TechnologyNode:
    """Per-layer technology parameters.

    feature_size     nm
    clk_period       ps, integer so tick arithmetic stays exact
    head_delay       router cycles to process a head flit
    pipeline_depth   cycles of head processing overlapped with the previous packet
    router_pitch     average distance between adjacent routers, micrometers
    """

    feature_size: float
    clk_period: int
    head_delay: int
    pipeline_depth: int
    router_pitch: float

    def __post_init__(self) -> None:
        if self.feature_size <= 0:
            raise TopologyError(f"feature_size must be > 0, got {self.feature_size}")
        if not isinstance(self.clk_period, int) or self.clk_period <= 0:
            raise TopologyError(f"clk_period must be a positive integer (ps), got {self.clk_period!r}")
        if self.head_delay < 1:
            raise TopologyError(f"head_delay must be >= 1, got {self.head_delay}")
        if not 0 <= self.pipeline_depth <= self.head_delay:
            raise TopologyError(
                f"pipeline_depth must be in [0, head_delay], got {self.pipeline_depth} with head_delay {self.head_delay}"
            )
        if self.router_pitch <= 0:
            raise TopologyError(f"router_pitch must be > 0, got {self.router_pitch}")


@dataclass(frozen=True)
class LayerSpec:
    """One layer of the stack: a rows x cols mesh placed on the shared grid at a stride."""

    rows: int
    cols: int
    tech: TechnologyNode
    grid_stride: int = 1

    def __post_init__(self) -> None:
        if self.rows < 2 or self.cols < 2:
            raise TopologyError(f"layers need rows >= 2 and cols >= 2, got {self.rows}x{self.cols}")
        if self.grid_stride < 1:
            raise TopologyError(f"grid_stride must be >= 1, got {self.grid_stride}")

    def grid_positions(self) -> list[tuple[int, int]]:
        """Occupied (x, y) grid positions in row-major order."""
        s = self.grid_stride
        return [(x * s, y * s) for y in range(self.rows) for x in range(self.cols)]


@dataclass(frozen=True)
class StackConfig:
    """Ordered layer stack; index 0 of `layers` is the topmost (coarsest) layer."""

    layers: tuple[LayerSpec, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "layers", tuple(self.layers))
        self.validate()

    def validate(self) -> None:
        if len(self.layers) < 2:
            raise TopologyError(f"a stack needs at least 2 layers, got {len(self.layers)}")
        feats = [spec.tech.feature_size for spec in self.layers]
        for upper, lower in zip(feats, feats[1:]):
            if lower > upper:
                raise TopologyError(
                    f"feature sizes must not increase with depth, got {feats}"
                )
        fastest = min(spec.tech.clk_period for spec in self.layers)
        for i, spec in enumerate(self.layers, start=1):
            if spec.tech.clk_period % fastest != 0:
                raise TopologyError(
                    f"layer {i} clk_period {spec.tech.clk_period} is not an integer "
                    f"multiple of the fastest period {fastest}"
                )
        for i in range(len(self.layers) - 1):
            above = set(self.layers[i].grid_positions())
            below = set(self.layers[i + 1].grid_positions())
            if not above <= below:
                missing = sorted(above - below)[:4]
                raise TopologyError(
                    f"layer {i + 1} grid is not nested in layer {i + 2}; "
                    f"positions without a router below: {missing}"
                )

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def layer(self, z: int) -> LayerSpec:
        """1-based layer accessor, z=1 is the topmost layer."""
        if not 1 <= z <= len(self.layers):
            raise TopologyError(f"layer index {z} out of range 1..{len(self.layers)}")
        return self.layers[z - 1]

    @property
    def fastest_clk(self) -> int:
        return min(spec.tech.clk_period for spec in self.layers)

    def period_ticks(self, z: int) -> int:
        """Clock period of layer z expressed in global ticks (fastest layer = 1)."""
        return self.layer(z).tech.clk_period // self.fastest_clk

    @property
    def grid_unit(self) -> float:
        """Physical pitch of the shared logical grid: the bottom layer's router pitch."""
        return self.layers[-1].tech.router_pitch


@dataclass(frozen=True)
class Router:
    id: int
    address: Address
    position: Position


class TopologyGraph:
    """The router digraph T = (V, A) with direction-classified arcs.

    Immutable after construction; safe for concurrent readers.
    """

    def __init__(self, cfg: StackConfig):
        self.cfg = cfg
        self.routers: list[Router] = []
        self._id_by_addr: dict[Address, int] = {}
        self._layer_ids: list[list[int]] = []
        for z in range(1, cfg.num_layers + 1):
            spec = cfg.layer(z)
            ids = []
            for (x, y) in spec.grid_positions():
                addr = Address(x, y, z)
                rid = len(self.routers)
                self.routers.append(Router(rid, addr, address_to_position(cfg, addr)))
                self._id_by_addr[addr] = rid
                ids.append(rid)
            self._layer_ids.append(ids)

        self._neighbors: list[dict[Direction, int]] = [dict() for _ in self.routers]
        for router in self.routers:
            x, y, z = router.address
            s = cfg.layer(z).grid_stride
            for direction, (dx, dy, dz) in _STEPS.items():
                if dz == 0:
                    target = Address(x + dx * s, y + dy * s, z)
                else:
                    target = Address(x, y, z + dz)
                other = self._id_by_addr.get(target)
                if other is not None:
                    self._neighbors[router.id][direction] = other

        self._arc_dirs: dict[tuple[int, int], Direction] = {}
        for router in self.routers:
            for direction, w in self._neighbors[router.id].items():
                self._arc_dirs[(router.id, w)] = direction

    # -- queries ---------------------------------------------------------

    def __len__(self) -> int:
        return len(self.routers)

    @property
    def num_routers(self) -> int:
        return len(self.routers)

    def router_ids(self) -> range:
        return range(len(self.routers))

    def layer_ids(self, z: int) -> Sequence[int]:
        return self._layer_ids[z - 1]

    def address_of(self, rid: int) -> Address:
        return self.routers[rid].address

    def position_of(self, rid: int) -> Position:
        return self.routers[rid].position

    def id_of(self, addr: Address) -> int:
        try:
            return self._id_by_addr[Address(*addr)]
        except KeyError:
            raise TopologyError(f"no router at address {tuple(addr)}") from None

    def has_address(self, addr: Address) -> bool:
        return Address(*addr) in self._id_by_addr

    def neighbor(self, v: int, direction: Direction) -> Optional[int]:
        """Neighbor of v in the given cardinal direction, or None at a border."""
        return self._neighbors[v].get(direction)

    def neighbors(self, v: int) -> dict[Direction, int]:
        return dict(self._neighbors[v])

    def arcs(self) -> list[tuple[int, int]]:
        return sorted(self._arc_dirs)

    def classify_arc(self, arc: tuple[int, int]) -> Direction:
        """The unique cardinal direction of an arc of the digraph."""
        try:
            return self._arc_dirs[arc]
        except KeyError:
            raise TopologyError(f"{arc} is not an arc of the topology") from None

    # -- export ----------------------------------------------------------

    def write_adjacency_csv(self, path) -> None:
        """Dump the arc list as (src_id, dst_id, direction) for debugging."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["src_id", "dst_id", "direction"])
            for (src, dst) in self.arcs():
                writer.writerow([src, dst, self._arc_dirs[(src, dst)].value])


_STEPS = {
    # Grid origin is the top-left corner: north decreases y, south increases it.
    Direction.NORTH: (0, -1, 0),
    Direction.EAST: (1, 0, 0),
    Direction.SOUTH: (0, 1, 0),
    Direction.WEST: (-1, 0, 0),
    Direction.UP: (0, 0, -1),
    Direction.DOWN: (0, 0, 1),
}


def build_topology(cfg: StackConfig) -> TopologyGraph:
    """Build the router digraph for a validated stack description."""
    cfg.validate()
    return TopologyGraph(cfg)


def address_to_position(cfg: StackConfig, addr: Address) -> Position:
    """Convert a logical address to a physical location on the shared grid."""
    x, y, z = addr
    spec = cfg.layer(z)
    s = spec.grid_stride
    if x < 0 or y < 0 or x % s or y % s or x // s >= spec.cols or y // s >= spec.rows:
        raise TopologyError(f"address {tuple(addr)} is not occupied in layer {z}")
    unit = cfg.grid_unit
    return Position(x * unit, y * unit, z)


def classify_direction(v: Address, w: Address) -> Direction:
    """Direction of a step from address v to adjacent-or-vertical address w."""
    if w.z > v.z:
        return Direction.DOWN
    if w.z < v.z:
        return Direction.UP
    if v.x == w.x and v.y > w.y:
        return Direction.NORTH
    if v.x < w.x and v.y == w.y:
        return Direction.EAST
    if v.x == w.x and v.y < w.y:
        return Direction.SOUTH
    if v.x > w.x and v.y == w.y:
        return Direction.WEST
    raise TopologyError(f"{tuple(v)} -> {tuple(w)} is not a mesh step")


def hop_distance(v: Address, d: Address) -> int:
    """Manhattan distance of the x/y components, in shared-grid units."""
    return abs(v.x - d.x) + abs(v.y - d.y)
