"""Experiment configuration: YAML parsing, validation, and object construction.

A config file is a nested key/value document with sections `stack`, `routing`,
`router`, `traffic`, `sim`, `energy`, and optional `techmodel`/`output`.  The
exact grammar is documented in the README; `load_config` -> `save_config` ->
`load_config` round-trips to an identical effective configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Union

import yaml

from . import routing as routing_mod
from . import sim as sim_mod
from .sim import EnergyWeights, RouterConfig, SimParams
from .techmodel import AreaParams, ClockParams
from .topology import Address, LayerSpec, StackConfig, TechnologyNode, TopologyGraph, build_topology
from .traffic import (
    Flow,
    FlowGraphTraffic,
    PacketRequest,
    TraceTraffic,
    UniformTraffic,
)


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


RouterRef = Union[int, tuple[int, int, int]]


@dataclass(frozen=True)
class LayerConfig:
    feature_size_nm: float
    clk_period_ps: int
    head_delay: int
    pipeline_depth: int
    router_pitch_um: float
    rows: int
    cols: int
    stride: int = 1


@dataclass(frozen=True)
class RoutingConfig:
    variant: str = "xyz"
    target_layer: Optional[int] = None
    phi_override: Optional[int] = None
    tie_break: str = "xyz"  # "xyz" | "descend" for equal-speed layer pairs


@dataclass(frozen=True)
class RouterSection:
    kind: str = "standard"
    buffer_depth: int = 8
    vc_count_fast: int = 4
    vc_count_slow: int = 1


@dataclass(frozen=True)
class FlowConfig:
    src_stage: str
    dst_stage: str
    length: int
    packets_per_trigger: int = 1
    stage_delay_ticks: int = 0


@dataclass(frozen=True)
class TrafficConfig:
    mode: str  # "uniform" | "flows" | "trace"
    rate: Optional[float] = None
    packet_length: Optional[int] = None
    duration_ticks: Optional[int] = None
    stages: dict[str, tuple[RouterRef, ...]] = field(default_factory=dict)
    flows: tuple[FlowConfig, ...] = ()
    entry_stage: Optional[str] = None
    rounds: Optional[int] = None
    round_period_ticks: Optional[int] = None
    entry_sources_per_round: Optional[int] = None
    packets: tuple[tuple[int, RouterRef, RouterRef, int], ...] = ()


@dataclass(frozen=True)
class SimSection:
    warmup_ticks: int = 0
    measure_ticks: Optional[int] = None
    seed: int = 0
    watchdog_window: int = 10_000


@dataclass(frozen=True)
class EnergySection:
    buffer_write: float = 1.0
    buffer_read: float = 1.0
    crossbar: float = 1.0
    hlink: float = 1.0
    vlink: float = 1.0
    scale_with_feature_size: bool = True


@dataclass(frozen=True)
class TechModelSection:
    area: Optional[AreaParams] = None
    clock: Optional[ClockParams] = None


@dataclass(frozen=True)
class ExperimentConfig:
    layers: tuple[LayerConfig, ...]
    routing: RoutingConfig = RoutingConfig()
    router: RouterSection = RouterSection()
    traffic: Optional[TrafficConfig] = None
    sim: SimSection = SimSection()
    energy: EnergySection = EnergySection()
    techmodel: TechModelSection = TechModelSection()
    output_dir: str = "out"

    # -- construction of runtime objects ---------------------------------

    def build_stack(self) -> StackConfig:
        try:
            layers = tuple(
                LayerSpec(
                    rows=lc.rows,
                    cols=lc.cols,
                    grid_stride=lc.stride,
                    tech=TechnologyNode(
                        feature_size=lc.feature_size_nm,
                        clk_period=lc.clk_period_ps,
                        head_delay=lc.head_delay,
                        pipeline_depth=lc.pipeline_depth,
                        router_pitch=lc.router_pitch_um,
                    ),
                )
                for lc in self.layers
            )
            return StackConfig(layers)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def build_graph(self) -> TopologyGraph:
        return build_topology(self.build_stack())

    def build_algorithm(self, stack: Optional[StackConfig] = None) -> routing_mod.RoutingAlgorithm:
        stack = stack or self.build_stack()
        rc = self.routing
        if rc.variant not in routing_mod.VARIANTS:
            raise ConfigError(f"unknown routing variant {rc.variant!r}")
        if rc.tie_break not in ("xyz", "descend"):
            raise ConfigError(f"tie_break must be 'xyz' or 'descend', got {rc.tie_break!r}")
        try:
            if rc.variant in (routing_mod.R1, routing_mod.R2):
                routing_mod.check_speed_ordering(stack)
            tie_pairs = frozenset()
            if rc.tie_break == "xyz" and rc.variant in (routing_mod.R1, routing_mod.R2):
                tie_pairs = routing_mod.equal_speed_tie_pairs(stack)
            r2_params = None
            if rc.variant == routing_mod.R2:
                r2_params = routing_mod.r2_params_for_stack(
                    stack, rc.target_layer, rc.phi_override
                )
            return routing_mod.algorithm_for_stack(
                stack, rc.variant, r2_params=r2_params, xy_first_tie_pairs=tie_pairs
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def build_router_config(self) -> RouterConfig:
        rs = self.router
        try:
            cfg = RouterConfig(
                kind=rs.kind,
                buffer_depth=rs.buffer_depth,
                vc_count_fast=rs.vc_count_fast,
                vc_count_slow=rs.vc_count_slow,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if cfg.kind == sim_mod.HIGH_VT and self.routing.variant not in (
            routing_mod.R1,
            routing_mod.R2,
        ):
            raise ConfigError(
                "router kind high_vt requires routing variant r1 or r2; "
                f"got {self.routing.variant!r}"
            )
        return cfg

    def build_sim_params(self, seed: Optional[int] = None, collect_trace: bool = False) -> SimParams:
        s = self.sim
        try:
            return SimParams(
                warmup_ticks=s.warmup_ticks,
                measure_ticks=s.measure_ticks,
                seed=s.seed if seed is None else seed,
                watchdog_window=s.watchdog_window,
                collect_trace=collect_trace,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def build_energy(self) -> EnergyWeights:
        e = self.energy
        return EnergyWeights(
            buffer_write=e.buffer_write,
            buffer_read=e.buffer_read,
            crossbar=e.crossbar,
            hlink=e.hlink,
            vlink=e.vlink,
            scale_with_feature_size=e.scale_with_feature_size,
        )

    def build_traffic(self, graph: TopologyGraph):
        tc = self.traffic
        if tc is None:
            raise ConfigError("this command needs a `traffic` section")
        try:
            if tc.mode == "uniform":
                _need(tc.rate is not None, "uniform traffic needs `rate`")
                _need(tc.packet_length is not None, "uniform traffic needs `packet_length`")
                _need(tc.duration_ticks is not None, "uniform traffic needs `duration_ticks`")
                return UniformTraffic(tc.rate, tc.packet_length, tc.duration_ticks)
            if tc.mode == "flows":
                _need(bool(tc.stages), "flow traffic needs `stages`")
                _need(tc.entry_stage is not None, "flow traffic needs `entry_stage`")
                _need(tc.rounds is not None, "flow traffic needs `rounds`")
                _need(tc.round_period_ticks is not None, "flow traffic needs `round_period_ticks`")
                stages = {
                    name: tuple(_resolve_router(graph, ref) for ref in members)
                    for name, members in tc.stages.items()
                }
                flows = tuple(
                    Flow(
                        src_stage=f.src_stage,
                        dst_stage=f.dst_stage,
                        length=f.length,
                        packets_per_trigger=f.packets_per_trigger,
                        stage_delay_ticks=f.stage_delay_ticks,
                    )
                    for f in tc.flows
                )
                return FlowGraphTraffic(
                    stages=stages,
                    flows=flows,
                    entry_stage=tc.entry_stage,
                    rounds=tc.rounds,
                    round_period_ticks=tc.round_period_ticks,
                    entry_sources_per_round=tc.entry_sources_per_round,
                )
            if tc.mode == "trace":
                packets = tuple(
                    PacketRequest(
                        inject_tick=tick,
                        src=_resolve_router(graph, src),
                        dst=_resolve_router(graph, dst),
                        length=length,
                    )
                    for tick, src, dst, length in tc.packets
                )
                return TraceTraffic(packets)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        raise ConfigError(f"unknown traffic mode {tc.mode!r}")


def _need(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def _resolve_router(graph: TopologyGraph, ref: RouterRef) -> int:
    if isinstance(ref, int):
        if not 0 <= ref < graph.num_routers:
            raise ConfigError(f"router id {ref} out of range 0..{graph.num_routers - 1}")
        return ref
    if isinstance(ref, (tuple, list)) and len(ref) == 3:
        try:
            return graph.id_of(Address(*(int(c) for c in ref)))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    raise ConfigError(f"router reference must be an id or [x, y, z], got {ref!r}")


# -- YAML loading / saving ---------------------------------------------------


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    return config_from_dict(raw)


def config_from_dict(raw: dict[str, Any]) -> ExperimentConfig:
    known = {"stack", "routing", "router", "traffic", "sim", "energy", "techmodel", "output"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config section(s): {sorted(unknown)}")

    stack = _section(raw, "stack")
    layers_raw = stack.get("layers")
    if not isinstance(layers_raw, list) or not layers_raw:
        raise ConfigError("stack.layers must be a non-empty list")
    layers = tuple(_layer_from_dict(i, item) for i, item in enumerate(layers_raw, start=1))

    routing_cfg = _build(RoutingConfig, _section(raw, "routing", optional=True), "routing")
    router_cfg = _build(RouterSection, _section(raw, "router", optional=True), "router")
    sim_cfg = _build(SimSection, _section(raw, "sim", optional=True), "sim")
    energy_cfg = _build(EnergySection, _section(raw, "energy", optional=True), "energy")

    traffic_cfg = None
    if raw.get("traffic") is not None:
        traffic_cfg = _traffic_from_dict(_section(raw, "traffic"))

    tech_cfg = TechModelSection()
    if raw.get("techmodel") is not None:
        tm = _section(raw, "techmodel")
        area = clock = None
        try:
            if tm.get("area") is not None:
                area = AreaParams(**_mapping(tm["area"], "techmodel.area"))
            if tm.get("clock") is not None:
                clock = ClockParams(**_mapping(tm["clock"], "techmodel.clock"))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"techmodel section: {exc}") from exc
        tech_cfg = TechModelSection(area=area, clock=clock)

    output_dir = "out"
    if raw.get("output") is not None:
        out = _section(raw, "output")
        output_dir = str(out.get("dir", "out"))

    cfg = ExperimentConfig(
        layers=layers,
        routing=routing_cfg,
        router=router_cfg,
        traffic=traffic_cfg,
        sim=sim_cfg,
        energy=energy_cfg,
        techmodel=tech_cfg,
        output_dir=output_dir,
    )
    # Fail fast on anything structurally wrong.
    stack_obj = cfg.build_stack()
    cfg.build_algorithm(stack_obj)
    cfg.build_router_config()
    cfg.build_sim_params()
    return cfg


def _layer_from_dict(index: int, item: Any) -> LayerConfig:
    fields = {
        "feature_size_nm", "clk_period_ps", "head_delay", "pipeline_depth",
        "router_pitch_um", "rows", "cols", "stride",
    }
    data = _mapping(item, f"stack.layers[{index}]")
    unknown = set(data) - fields
    if unknown:
        raise ConfigError(f"layer {index}: unknown key(s) {sorted(unknown)}")
    missing = (fields - {"stride"}) - set(data)
    if missing:
        raise ConfigError(f"layer {index}: missing key(s) {sorted(missing)}")
    try:
        return LayerConfig(
            feature_size_nm=float(data["feature_size_nm"]),
            clk_period_ps=int(data["clk_period_ps"]),
            head_delay=int(data["head_delay"]),
            pipeline_depth=int(data["pipeline_depth"]),
            router_pitch_um=float(data["router_pitch_um"]),
            rows=int(data["rows"]),
            cols=int(data["cols"]),
            stride=int(data.get("stride", 1)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"layer {index}: {exc}") from exc


def _traffic_from_dict(data: dict[str, Any]) -> TrafficConfig:
    mode = data.get("mode")
    if mode not in ("uniform", "flows", "trace"):
        raise ConfigError(f"traffic.mode must be uniform, flows, or trace, got {mode!r}")
    stages: dict[str, tuple[RouterRef, ...]] = {}
    for name, members in _mapping(data.get("stages", {}), "traffic.stages").items():
        if not isinstance(members, list):
            raise ConfigError(f"traffic.stages[{name!r}] must be a list")
        stages[str(name)] = tuple(_router_ref(m) for m in members)
    flows = tuple(
        _build(FlowConfig, _mapping(f, "traffic.flows[]"), "traffic.flows[]")
        for f in data.get("flows", [])
    )
    packets = []
    for p in data.get("packets", []):
        pd = _mapping(p, "traffic.packets[]")
        try:
            packets.append(
                (int(pd["tick"]), _router_ref(pd["src"]), _router_ref(pd["dst"]), int(pd["length"]))
            )
        except KeyError as exc:
            raise ConfigError(f"traffic.packets[] missing key {exc}") from exc
    try:
        return TrafficConfig(
            mode=mode,
            rate=None if data.get("rate") is None else float(data["rate"]),
            packet_length=None if data.get("packet_length") is None else int(data["packet_length"]),
            duration_ticks=None if data.get("duration_ticks") is None else int(data["duration_ticks"]),
            stages=stages,
            flows=flows,
            entry_stage=data.get("entry_stage"),
            rounds=None if data.get("rounds") is None else int(data["rounds"]),
            round_period_ticks=(
                None if data.get("round_period_ticks") is None else int(data["round_period_ticks"])
            ),
            entry_sources_per_round=(
                None
                if data.get("entry_sources_per_round") is None
                else int(data["entry_sources_per_round"])
            ),
            packets=tuple(packets),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"traffic section: {exc}") from exc


def _router_ref(value: Any) -> RouterRef:
    if isinstance(value, bool):
        raise ConfigError(f"invalid router reference {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, (list, tuple)) and len(value) == 3:
        return tuple(int(v) for v in value)
    raise ConfigError(f"router reference must be an id or [x, y, z], got {value!r}")


def _section(raw: dict[str, Any], name: str, optional: bool = False) -> dict[str, Any]:
    value = raw.get(name)
    if value is None:
        if optional:
            return {}
        raise ConfigError(f"config is missing the `{name}` section")
    return _mapping(value, name)


def _mapping(value: Any, name: str) -> dict[str, Any]:
    if not isinstance(value, dict):
        raise ConfigError(f"`{name}` must be a mapping")
    return dict(value)


def _build(cls, data: dict[str, Any], name: str):
    allowed = set(cls.__dataclass_fields__)
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"`{name}` has unknown key(s): {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"`{name}` section: {exc}") from exc


def config_to_dict(cfg: ExperimentConfig) -> dict[str, Any]:
    out: dict[str, Any] = {
        "stack": {
            "layers": [
                {
                    "feature_size_nm": lc.feature_size_nm,
                    "clk_period_ps": lc.clk_period_ps,
                    "head_delay": lc.head_delay,
                    "pipeline_depth": lc.pipeline_depth,
                    "router_pitch_um": lc.router_pitch_um,
                    "rows": lc.rows,
                    "cols": lc.cols,
                    "stride": lc.stride,
                }
                for lc in cfg.layers
            ]
        },
        "routing": {
            "variant": cfg.routing.variant,
            "target_layer": cfg.routing.target_layer,
            "phi_override": cfg.routing.phi_override,
            "tie_break": cfg.routing.tie_break,
        },
        "router": {
            "kind": cfg.router.kind,
            "buffer_depth": cfg.router.buffer_depth,
            "vc_count_fast": cfg.router.vc_count_fast,
            "vc_count_slow": cfg.router.vc_count_slow,
        },
        "sim": {
            "warmup_ticks": cfg.sim.warmup_ticks,
            "measure_ticks": cfg.sim.measure_ticks,
            "seed": cfg.sim.seed,
            "watchdog_window": cfg.sim.watchdog_window,
        },
        "energy": {
            "buffer_write": cfg.energy.buffer_write,
            "buffer_read": cfg.energy.buffer_read,
            "crossbar": cfg.energy.crossbar,
            "hlink": cfg.energy.hlink,
            "vlink": cfg.energy.vlink,
            "scale_with_feature_size": cfg.energy.scale_with_feature_size,
        },
        "output": {"dir": cfg.output_dir},
    }
    if cfg.traffic is not None:
        tc = cfg.traffic
        traffic: dict[str, Any] = {"mode": tc.mode}
        if tc.mode == "uniform":
            traffic.update(
                rate=tc.rate, packet_length=tc.packet_length, duration_ticks=tc.duration_ticks
            )
        elif tc.mode == "flows":
            traffic.update(
                stages={k: [list(m) if isinstance(m, tuple) else m for m in v] for k, v in tc.stages.items()},
                flows=[
                    {
                        "src_stage": f.src_stage,
                        "dst_stage": f.dst_stage,
                        "length": f.length,
                        "packets_per_trigger": f.packets_per_trigger,
                        "stage_delay_ticks": f.stage_delay_ticks,
                    }
                    for f in tc.flows
                ],
                entry_stage=tc.entry_stage,
                rounds=tc.rounds,
                round_period_ticks=tc.round_period_ticks,
                entry_sources_per_round=tc.entry_sources_per_round,
            )
        else:
            traffic["packets"] = [
                {
                    "tick": tick,
                    "src": list(src) if isinstance(src, tuple) else src,
                    "dst": list(dst) if isinstance(dst, tuple) else dst,
                    "length": length,
                }
                for tick, src, dst, length in tc.packets
            ]
        out["traffic"] = traffic
    if cfg.techmodel.area is not None or cfg.techmodel.clock is not None:
        tm: dict[str, Any] = {}
        if cfg.techmodel.area is not None:
            a = cfg.techmodel.area
            tm["area"] = {"alpha": a.alpha, "alpha_hat": a.alpha_hat}
        if cfg.techmodel.clock is not None:
            c = cfg.techmodel.clock
            tm["clock"] = {
                "beta": c.beta, "beta_hat": c.beta_hat,
                "beta_tilde": c.beta_tilde, "beta_bar": c.beta_bar,
            }
        out["techmodel"] = tm
    return out


def save_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=True)
