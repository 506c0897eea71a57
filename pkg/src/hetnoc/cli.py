"""Batch command-line front end.

Subcommands: fit, eval-model, verify, simulate, sweep, route-trace.
Exit codes: 0 success, 1 configuration error, 2 verification failure,
3 simulation watchdog abort.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import experiments, perfmodel, routing, sim, techmodel, verify
from .config import ConfigError, ExperimentConfig, load_config
from .topology import Address, TopologyError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VERIFY = 2
EXIT_WATCHDOG = 3

_CONFIG_ERRORS = (
    ConfigError,
    TopologyError,
    routing.RoutingError,
    sim.SimConfigError,
    techmodel.TechModelError,
    perfmodel.PerfModelError,
    ValueError,
    OSError,
)


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except sim.SimDeadlockError as exc:
        print(f"watchdog abort: {exc}", file=sys.stderr)
        return EXIT_WATCHDOG


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetnoc",
        description="Models, verification, and flit-level simulation for heterogeneous 3D NoCs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit the area or clock scaling model to CSV samples")
    p_fit.add_argument("--input", required=True, help="sample CSV with columns xi,value")
    p_fit.add_argument("--model", required=True, choices=["area", "clock"])
    p_fit.add_argument("--beta-fixed", type=float, default=None,
                       help="pin the clock model's asymptote instead of fitting it")
    p_fit.add_argument("--out", default="out")
    p_fit.set_defaults(func=cmd_fit)

    for name, func in [
        ("eval-model", cmd_eval_model),
        ("verify", cmd_verify),
        ("simulate", cmd_simulate),
        ("sweep", cmd_sweep),
        ("route-trace", cmd_route_trace),
    ]:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="experiment config (YAML)")
        p.add_argument("--out", default=None, help="output directory (default: config output.dir)")
        if name == "simulate":
            p.add_argument("--seed", type=int, default=None, help="override the config seed")
            p.add_argument("--trace", action="store_true", help="write a per-event trace CSV")
        if name == "sweep":
            p.add_argument("--axis", required=True,
                           choices=["hop_distance", "injection_rate", "cf"])
            p.add_argument("--values", required=True,
                           help="comma-separated axis values, e.g. 1,2,3,4,5,6")
            p.add_argument("--plot", action="store_true", help="emit an SVG next to the CSV")
        if name == "route-trace":
            p.add_argument("--src", required=True, help="source address x,y,z")
            p.add_argument("--dst", required=True, help="destination address x,y,z")
        p.set_defaults(func=func)
    return parser


def _outdir(args, cfg: ExperimentConfig | None = None) -> Path:
    out = args.out or (cfg.output_dir if cfg is not None else "out")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_fit(args) -> int:
    samples = techmodel.load_samples_csv(args.input)
    if args.model == "area":
        result = techmodel.fit_area(samples)
    else:
        result = techmodel.fit_clock(samples, beta_fixed=args.beta_fixed)
    out = _outdir(args)
    xs = sorted({x for x, _ in samples})
    lo, hi = xs[0], xs[-1]
    curve = [lo + (hi - lo) * i / 40 for i in range(41)]
    path = out / f"fit_{args.model}.csv"
    techmodel.write_fit_csv(path, result, curve)
    print(f"fit written to {path}: params={result.params} rmse={result.rmse:.6g}")
    return EXIT_OK


def cmd_eval_model(args) -> int:
    cfg = load_config(args.config)
    stack = cfg.build_stack()
    graph = cfg.build_graph()
    out = _outdir(args, cfg)
    graph.write_adjacency_csv(out / "topology.csv")

    area_params = cfg.techmodel.area or techmodel.AreaParams(alpha=1.0, alpha_hat=0.0)
    clock_params = cfg.techmodel.clock
    bottom = stack.num_layers
    bottom_tech = stack.layer(bottom).tech
    max_grid_distance = max(
        (spec.cols - 1 + spec.rows - 1) * spec.grid_stride for spec in stack.layers
    )

    path = out / "model_eval.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["record", "layer", "fast_layer", "feature_size_nm", "clk_period_ps",
             "xi", "s_f_model", "c_f_actual", "c_f_model", "omega_m_per_s",
             "phi_um", "phi_hops", "detour_pays"]
        )
        for z in range(1, stack.num_layers + 1):
            tech = stack.layer(z).tech
            xi = techmodel.relative_scaling(tech.feature_size, bottom_tech.feature_size)
            s_f = techmodel.area_scaling(xi, area_params)
            c_f_actual = tech.clk_period / bottom_tech.clk_period
            c_f_model = (
                repr(techmodel.clock_scaling(xi, clock_params)) if clock_params else ""
            )
            omega = perfmodel.propagation_speed(perfmodel.LayerTiming.of(tech))
            writer.writerow(
                ["layer", z, "", repr(tech.feature_size), tech.clk_period,
                 repr(xi), repr(s_f), repr(c_f_actual), c_f_model, repr(omega),
                 "", "", ""]
            )
        for slow_z in range(1, stack.num_layers + 1):
            for fast_z in range(slow_z + 1, stack.num_layers + 1):
                phi_um = perfmodel.detour_threshold_um(stack, slow_z, fast_z)
                phi_hops = perfmodel.rerouting_threshold_hops(
                    phi_um, stack.layer(fast_z).tech.router_pitch
                )
                pays = phi_hops <= max_grid_distance
                writer.writerow(
                    ["layer_pair", slow_z, fast_z, "", "", "", "", "", "", "",
                     repr(phi_um), phi_hops, "yes" if pays else "no"]
                )
    print(f"model table written to {path}")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    graph = cfg.build_graph()
    alg = cfg.build_algorithm()
    out = _outdir(args, cfg)
    report = verify.run_verification(graph, alg)
    verify.write_report_csv(out / "verify_report.csv", report)
    verify.write_witness_json(out / "verify_witnesses.json", report)
    with open(out / "turn_matrix.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + [d.value for d in list(verify.Direction)])
        grid = verify.turn_matrix_grid(report.observed_turns)
        for d, row in zip(list(verify.Direction), grid):
            writer.writerow([d.value] + row)
    for check, ok in [
        ("connected", report.connected),
        ("cdg_acyclic", report.cdg_acyclic),
        ("livelock_free", report.livelock_free),
        ("turns_within_allowed", report.turns_within_allowed),
    ]:
        print(f"{check}: {'pass' if ok else 'FAIL'}")
    if report.sampled:
        print("note: pair enumeration was sampled (large graph)")
    return EXIT_OK if report.all_passed else EXIT_VERIFY


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    graph = cfg.build_graph()
    alg = cfg.build_algorithm()
    router_cfg = cfg.build_router_config()
    traffic = cfg.build_traffic(graph)
    params = cfg.build_sim_params(seed=args.seed, collect_trace=args.trace)
    out = _outdir(args, cfg)
    report = sim.run(graph, alg, router_cfg, traffic, params, cfg.build_energy())
    report.write_report_csv(out / "report.csv")
    report.write_histogram_csv(out / "flit_latency_hist.csv")
    if args.trace:
        report.write_trace_csv(out / "trace.csv")
    throughput = sum(report.throughput_by_layer.values())
    print(
        f"avg_flit_latency_ps={report.avg_flit_latency_ps:.3f} "
        f"accepted_throughput_flits_per_tick={throughput:.6f} "
        f"ejected_flits={report.ejected_flits}"
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("sweep needs at least one axis value")
    if args.axis == "hop_distance":
        rows = experiments.sweep_hop_distance(cfg, [int(v) for v in values])
    elif args.axis == "injection_rate":
        rows = experiments.sweep_injection_rate(cfg, [float(v) for v in values])
    else:
        rows = experiments.sweep_clock_ratio(cfg, [int(v) for v in values])
    out = _outdir(args, cfg)
    path = out / f"sweep_{args.axis}.csv"
    experiments.write_sweep_csv(path, rows)
    print(f"sweep written to {path} ({len(rows)} rows)")
    if args.plot:
        svg = out / f"sweep_{args.axis}.svg"
        _plot_sweep(rows, args.axis, svg)
        print(f"plot written to {svg}")
    return EXIT_OK


def _plot_sweep(rows, axis: str, path) -> None:
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 3.5))
    algorithms = sorted({r.algorithm for r in rows})
    for alg in algorithms:
        pts = sorted((r.axis_value, r.enhancement) for r in rows if r.algorithm == alg)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=alg)
    ax.axhline(1.0, color="grey", linewidth=0.8, linestyle=":")
    ax.set_xlabel(axis)
    ax.set_ylabel("latency enhancement vs xyz")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def cmd_route_trace(args) -> int:
    cfg = load_config(args.config)
    stack = cfg.build_stack()
    graph = cfg.build_graph()
    alg = cfg.build_algorithm(stack)
    src = _parse_address(args.src)
    dst = _parse_address(args.dst)
    route = experiments.trace_route(graph, alg, graph.id_of(src), graph.id_of(dst))
    cumulative = 0
    print("step,router_id,x,y,z,direction,cumulative_latency_ps")
    for i, (addr, direction) in enumerate(route):
        tech = stack.layer(addr.z).tech
        cumulative += tech.head_delay * tech.clk_period
        if direction is perfmodel.Direction.UP:
            upper = stack.layer(addr.z - 1).tech.clk_period
            if upper > tech.clk_period:
                cumulative += upper
        print(
            f"{i},{graph.id_of(addr)},{addr.x},{addr.y},{addr.z},"
            f"{direction.value if direction else 'deliver'},{cumulative}"
        )
    return EXIT_OK


def _parse_address(text: str) -> Address:
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError(f"address must be x,y,z, got {text!r}")
    try:
        return Address(int(parts[0]), int(parts[1]), int(parts[2]))
    except ValueError as exc:
        raise ConfigError(f"address must be three integers, got {text!r}") from exc


if __name__ == "__main__":
    sys.exit(main())
