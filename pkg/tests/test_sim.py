import pytest

from hetnoc import experiments, perfmodel
from hetnoc.routing import ADVERSARIAL, R1, XYZ, RoutingAlgorithm, r2_params_for_stack
from hetnoc.sim import (
    ClockDomain,
    EnergyWeights,
    RouterConfig,
    SimConfigError,
    SimDeadlockError,
    SimParams,
    run,
)
from hetnoc.topology import Address, Direction, LayerSpec, StackConfig, TechnologyNode, build_topology
from hetnoc.traffic import PacketRequest, UniformTraffic


def two_layer_stack(c=2, rows_fast=4, cols_fast=4, delta=3, chi=2):
    return StackConfig((
        LayerSpec(rows=4, cols=4,
                  tech=TechnologyNode(130, 1000 * c, delta, chi, 800.0)),
        LayerSpec(rows=rows_fast, cols=cols_fast,
                  tech=TechnologyNode(45, 1000, delta, chi, 1000.0)),
    ))


def homogeneous_stack():
    return StackConfig((
        LayerSpec(rows=4, cols=4, tech=TechnologyNode(45, 1000, 3, 2, 500.0)),
        LayerSpec(rows=4, cols=4, tech=TechnologyNode(45, 1000, 3, 2, 500.0)),
    ))


R1_ALG = RoutingAlgorithm(variant=R1)
XYZ_ALG = RoutingAlgorithm(variant=XYZ)
STD = RouterConfig()


class TestZeroLoadLatency:
    def test_horizontal_head_latency_matches_closed_form(self):
        g = build_topology(homogeneous_stack())
        src = g.id_of(Address(0, 0, 2))
        dst = g.id_of(Address(3, 2, 2))
        report = run(g, XYZ_ALG, STD, [PacketRequest(0, src, dst, 1)], SimParams())
        rec = report.packets[0]
        hops = 5
        assert rec.head_eject - rec.create == (hops + 1) * 3  # (hops+1) * delta cycles

    def test_upward_crossing_matches_vertical_formula(self):
        stack = two_layer_stack(c=2)
        g = build_topology(stack)
        src = g.id_of(Address(1, 1, 2))
        dst = g.id_of(Address(1, 1, 1))
        report = run(g, R1_ALG, STD, [PacketRequest(0, src, dst, 1)], SimParams())
        rec = report.packets[0]
        want_ps = perfmodel.head_latency_v(
            perfmodel.Packet(perfmodel.Position(0, 0, 2), perfmodel.Position(0, 0, 1)),
            stack,
            Direction.UP,
        )
        assert (rec.head_eject - rec.create) * stack.fastest_clk == want_ps == 11_000

    def test_matches_route_estimate_for_sampled_pairs(self):
        stack = two_layer_stack(c=2)
        g = build_topology(stack)
        pairs = [(s, d) for s in (0, 5, 20, 27) for d in (3, 10, 18, 31) if s != d]
        for alg in (XYZ_ALG, R1_ALG):
            rows = experiments.compare_zero_load(g, alg, STD, pairs)
            for s, d, simulated, model in rows:
                assert simulated == model, (s, d, alg.variant)


class TestRouterPipeline:
    def test_packet_occupies_router_for_delta_plus_length_cycles(self):
        g = build_topology(homogeneous_stack())
        rid = g.id_of(Address(2, 2, 2))
        length = 6
        report = run(g, XYZ_ALG, STD, [PacketRequest(0, rid, rid, length)], SimParams())
        rec = report.packets[0]
        assert rec.head_eject == 3
        assert rec.tail_eject == 3 + (length - 1)

    def test_back_to_back_bubble(self):
        # delta=3, chi=2: the second head launches one idle cycle after the
        # first tail, i.e. at tail + (delta - chi) + 1.
        g = build_topology(homogeneous_stack())
        rid = g.id_of(Address(0, 0, 2))
        length = 5
        report = run(
            g, XYZ_ALG, STD,
            [PacketRequest(0, rid, rid, length), PacketRequest(0, rid, rid, length)],
            SimParams(),
        )
        first, second = report.packets
        assert first.tail_eject == 3 + length - 1
        assert second.head_eject == first.tail_eject + (3 - 2) + 1

    def test_full_downstream_buffer_blocks_without_loss(self):
        g = build_topology(homogeneous_stack())
        src = g.id_of(Address(0, 0, 2))
        dst = g.id_of(Address(3, 0, 2))
        cfg = RouterConfig(buffer_depth=2, vc_count_fast=1)
        report = run(g, XYZ_ALG, cfg, [PacketRequest(0, src, dst, 40)], SimParams())
        assert report.injected_flits == report.ejected_flits == 40


class TestThroughputLaws:
    @pytest.mark.parametrize("c", [2, 4])
    def test_weakest_link_rate_down(self, c):
        stack = two_layer_stack(c=c)
        g = build_topology(stack)
        src = g.id_of(Address(1, 1, 1))
        dst = g.id_of(Address(1, 1, 2))
        length = 3000
        params = SimParams(warmup_ticks=500, measure_ticks=2000)
        report = run(g, R1_ALG, STD, [PacketRequest(0, src, dst, length)], params)
        ejected = round(report.throughput_by_layer[2] * 2000)
        assert abs(ejected - 2000 // c) <= 1

    @pytest.mark.parametrize("c", [2, 4])
    def test_high_vt_restores_fast_rate(self, c):
        stack = two_layer_stack(c=c)
        g = build_topology(stack)
        src = g.id_of(Address(1, 1, 1))
        dst = g.id_of(Address(1, 1, 2))
        params = SimParams(warmup_ticks=500, measure_ticks=2000)
        report = run(
            g, R1_ALG, RouterConfig(kind="high_vt"),
            [PacketRequest(0, src, dst, 4000)], params,
        )
        ejected = round(report.throughput_by_layer[2] * 2000)
        assert abs(ejected - 2000) <= 1

    def test_single_flit_packet_latency_unchanged_by_high_vt(self):
        stack = two_layer_stack(c=2)
        g = build_topology(stack)
        src = g.id_of(Address(0, 0, 1))
        dst = g.id_of(Address(2, 1, 2))
        traffic = [PacketRequest(0, src, dst, 1)]
        std = run(g, R1_ALG, STD, traffic, SimParams()).packets[0]
        hvt = run(g, R1_ALG, RouterConfig(kind="high_vt"), traffic, SimParams()).packets[0]
        assert std.head_eject == hvt.head_eject

    def test_homogeneous_vertical_link_full_rate(self):
        g = build_topology(homogeneous_stack())
        src = g.id_of(Address(1, 1, 1))
        dst = g.id_of(Address(1, 1, 2))
        params = SimParams(warmup_ticks=200, measure_ticks=1000)
        report = run(g, XYZ_ALG, STD, [PacketRequest(0, src, dst, 2000)], params)
        assert abs(round(report.throughput_by_layer[2] * 1000) - 1000) <= 1


class TestConservationAndCounters:
    def test_flit_conservation_uniform(self):
        g = build_topology(two_layer_stack())
        traffic = UniformTraffic(rate=0.05, packet_length=4, duration_ticks=500)
        report = run(g, R1_ALG, STD, traffic, SimParams(seed=3))
        assert report.injected_flits == report.ejected_flits
        assert report.injected_flits > 0

    def test_crossbar_count_is_flits_times_routers(self):
        g = build_topology(homogeneous_stack())
        src = g.id_of(Address(0, 0, 2))
        dst = g.id_of(Address(3, 0, 2))
        length = 5
        report = run(g, XYZ_ALG, STD, [PacketRequest(0, src, dst, length)], SimParams())
        crossbar = sum(layer["crossbar"] for layer in report.activity_by_layer.values())
        assert crossbar == length * 4  # 4 routers on the path
        reads = sum(layer["buffer_read"] for layer in report.activity_by_layer.values())
        writes = sum(layer["buffer_write"] for layer in report.activity_by_layer.values())
        assert reads == writes == length * 4

    def test_energy_proxy_zero_with_zero_weights(self):
        g = build_topology(homogeneous_stack())
        report = run(
            g, XYZ_ALG, STD, [PacketRequest(0, 0, 5, 3)], SimParams(),
            EnergyWeights(0, 0, 0, 0, 0),
        )
        assert report.energy_proxy == 0.0

    def test_rate_zero_is_empty_run(self):
        g = build_topology(homogeneous_stack())
        report = run(g, XYZ_ALG, STD, UniformTraffic(0.0, 4, 100), SimParams())
        assert report.injected_flits == 0
        assert report.avg_flit_latency_ps == 0.0


class TestWormholeIntegrity:
    def test_flits_eject_in_sequence_order(self):
        g = build_topology(two_layer_stack())
        traffic = UniformTraffic(rate=0.1, packet_length=6, duration_ticks=400)
        params = SimParams(seed=11, collect_trace=True)
        report = run(g, R1_ALG, STD, traffic, params)
        ejects: dict[int, list[tuple[int, int]]] = {}
        for tick, _router, _port, flit_uid, event in report.trace:
            if event == "eject":
                pid, seq = divmod(flit_uid, 100_000)
                ejects.setdefault(pid, []).append((tick, seq))
        assert ejects
        for pid, entries in ejects.items():
            seqs = [seq for _t, seq in sorted(entries)]
            assert seqs == sorted(seqs)
            assert len(seqs) == report.packets[pid].length


class TestDeterminism:
    def test_same_seed_same_report(self, tmp_path):
        g = build_topology(two_layer_stack())
        traffic = UniformTraffic(rate=0.08, packet_length=4, duration_ticks=600)
        params = SimParams(warmup_ticks=100, measure_ticks=400, seed=21)
        a = run(g, R1_ALG, STD, traffic, params)
        b = run(g, R1_ALG, STD, traffic, params)
        pa, pb = tmp_path / "a.csv", tmp_path / "b.csv"
        a.write_report_csv(pa)
        b.write_report_csv(pb)
        assert pa.read_bytes() == pb.read_bytes()
        a.write_histogram_csv(pa)
        b.write_histogram_csv(pb)
        assert pa.read_bytes() == pb.read_bytes()

    def test_different_seed_differs(self):
        g = build_topology(two_layer_stack())
        traffic = UniformTraffic(rate=0.08, packet_length=4, duration_ticks=600)
        a = run(g, R1_ALG, STD, traffic, SimParams(seed=1))
        b = run(g, R1_ALG, STD, traffic, SimParams(seed=2))
        assert a.injected_flits != b.injected_flits or a.avg_flit_latency_ps != b.avg_flit_latency_ps


class TestDeadlockWatchdog:
    def test_cyclic_wait_aborts(self):
        # Four long packets chase each other around a 2x2 ring under the
        # mixed-order adversarial routing with a single VC and tiny buffers.
        g = build_topology(homogeneous_stack())
        z = 2
        ring = [
            (Address(0, 0, z), Address(1, 1, z)),
            (Address(1, 0, z), Address(0, 1, z)),
            (Address(1, 1, z), Address(0, 0, z)),
            (Address(0, 1, z), Address(1, 0, z)),
        ]
        traffic = [
            PacketRequest(0, g.id_of(s), g.id_of(d), 12) for s, d in ring
        ]
        cfg = RouterConfig(buffer_depth=2, vc_count_fast=1)
        params = SimParams(watchdog_window=300)
        with pytest.raises(SimDeadlockError, match="no flit movement"):
            run(g, RoutingAlgorithm(variant=ADVERSARIAL), cfg, traffic, params)


class TestConfigValidation:
    def test_high_vt_requires_descend_first_routing(self):
        g = build_topology(two_layer_stack())
        with pytest.raises(SimConfigError, match="high_vt"):
            run(g, XYZ_ALG, RouterConfig(kind="high_vt"), [], SimParams())

    def test_clock_domain_bounds(self):
        with pytest.raises(SimConfigError):
            ClockDomain(0)
        with pytest.raises(SimConfigError):
            ClockDomain(2, phase=2)
        assert ClockDomain(4, 1).period == 4

    def test_buffer_depth_minimum(self):
        with pytest.raises(SimConfigError):
            RouterConfig(buffer_depth=1)

    def test_unknown_destination_rejected(self):
        g = build_topology(homogeneous_stack())
        with pytest.raises(SimConfigError):
            run(g, XYZ_ALG, STD, [PacketRequest(0, 0, 999, 1)], SimParams())
