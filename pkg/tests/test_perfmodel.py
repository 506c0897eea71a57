import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hetnoc.perfmodel import (
    INF_HOPS,
    LayerTiming,
    Packet,
    PerfModelError,
    detour_threshold_um,
    head_latency_h,
    head_latency_v,
    horizontal_distance,
    layer_timing,
    propagation_speed,
    rerouting_threshold_hops,
    rerouting_threshold_phi,
    route_latency_estimate,
    throughput_h,
    throughput_v,
)
from hetnoc.topology import (
    Address,
    Direction,
    LayerSpec,
    Position,
    StackConfig,
    TechnologyNode,
)


def timing(clk=1000, delta=3, chi=2, pitch=500.0):
    return LayerTiming(clk_period=clk, head_delay=delta, pipeline_depth=chi, router_pitch=pitch)


def stack_two(clk_slow=2000, clk_fast=1000, pitch_slow=900.0, pitch_fast=500.0,
              delta=3, chi=2):
    return StackConfig((
        LayerSpec(rows=4, cols=4, grid_stride=2,
                  tech=TechnologyNode(130, clk_slow, delta, chi, pitch_slow)),
        LayerSpec(rows=8, cols=8,
                  tech=TechnologyNode(45, clk_fast, delta, chi, pitch_fast)),
    ))


def pkt(src, dst, length=1):
    return Packet(src=Position(*src), dst=Position(*dst), length=length)


class TestHorizontalDistance:
    def test_zero(self):
        assert horizontal_distance(pkt((0, 0, 1), (0, 0, 1))) == 0

    def test_manhattan(self):
        assert horizontal_distance(pkt((0, 0, 1), (1500.0, 1000.0, 1))) == 2500.0

    @given(st.floats(0, 1e4), st.floats(0, 1e4), st.floats(0, 1e4), st.floats(0, 1e4))
    def test_symmetric(self, ax, ay, bx, by):
        a, b = (ax, ay, 1), (bx, by, 1)
        assert horizontal_distance(pkt(a, b)) == horizontal_distance(pkt(b, a))


class TestHeadLatencyH:
    def test_single_router(self):
        t = timing(clk=1000, delta=3)
        assert head_latency_h(pkt((0, 0, 1), (0, 0, 1)), t) == 3000

    def test_three_hops(self):
        t = timing(clk=1000, delta=3, pitch=500.0)
        assert head_latency_h(pkt((0, 0, 1), (1500.0, 0, 1)), t) == 12000

    def test_cross_layer_rejected(self):
        with pytest.raises(PerfModelError):
            head_latency_h(pkt((0, 0, 1), (0, 0, 2)), timing())

    def test_asymptotic_linearity(self):
        t = timing(clk=1000, delta=3, pitch=500.0)
        base = head_latency_h(pkt((0, 0, 1), (50_000.0, 0, 1)), t)
        double = head_latency_h(pkt((0, 0, 1), (100_000.0, 0, 1)), t)
        assert double == pytest.approx(2 * base, rel=0.02)


class TestThroughputH:
    def test_fully_pipelined(self):
        t = timing(clk=2000, delta=3, chi=3)
        assert throughput_h(pkt((0, 0, 1), (0, 0, 1), length=7), t) == pytest.approx(
            1 / (2000e-12)
        )

    def test_hand_evaluation(self):
        t = timing(clk=2000, delta=3, chi=2)
        got = throughput_h(pkt((0, 0, 1), (0, 0, 1), length=31), t)
        assert got == pytest.approx(484375000.0)

    def test_long_packet_limit(self):
        t = timing(clk=2000, delta=3, chi=0)
        got = throughput_h(pkt((0, 0, 1), (0, 0, 1), length=100_000), t)
        assert got == pytest.approx(1 / 2000e-12, rel=1e-4)


class TestHeadLatencyV:
    def test_same_layer_down_degenerates(self):
        s = stack_two()
        assert head_latency_v(pkt((0, 0, 1), (0, 0, 1)), s, Direction.DOWN) == 6000

    def test_up_adds_sync_cycle(self):
        s = stack_two(clk_slow=2000, clk_fast=1000)
        got = head_latency_v(pkt((0, 0, 2), (0, 0, 1)), s, Direction.UP)
        assert got == 3 * 2000 + 3 * 1000 + 2000  # 11000

    def test_down_never_exceeds_up(self):
        s = stack_two()
        down = head_latency_v(pkt((0, 0, 1), (0, 0, 2)), s, Direction.DOWN)
        up = head_latency_v(pkt((0, 0, 2), (0, 0, 1)), s, Direction.UP)
        assert down <= up

    def test_same_layer_up_rejected(self):
        s = stack_two()
        with pytest.raises(PerfModelError):
            head_latency_v(pkt((0, 0, 1), (0, 0, 1)), s, Direction.UP)


class TestThroughputV:
    def test_homogeneous_span(self):
        s = stack_two(clk_slow=1000, clk_fast=1000, pitch_slow=500.0)
        p = pkt((0, 0, 1), (0, 0, 2), length=9)
        assert throughput_v(p, s, (1, 2)) == throughput_h(p, layer_timing(s, 1))

    def test_slow_layer_wins(self):
        s = stack_two(clk_slow=2000, clk_fast=1000, delta=3, chi=3)
        p = pkt((0, 0, 1), (0, 0, 2), length=9)
        assert throughput_v(p, s, (1, 2)) == pytest.approx(1 / 2000e-12)

    def test_adding_fast_layer_never_raises_min(self):
        s = stack_two()
        p = pkt((0, 0, 1), (0, 0, 2), length=9)
        assert throughput_v(p, s, (1, 2)) <= throughput_h(p, layer_timing(s, 1))

    def test_empty_span_rejected(self):
        with pytest.raises(PerfModelError):
            throughput_v(pkt((0, 0, 1), (0, 0, 2)), stack_two(), (2, 1))


class TestPropagationSpeed:
    def test_hand_evaluation(self):
        assert propagation_speed(timing(clk=1000, delta=3, pitch=1000.0)) == pytest.approx(
            3.33e5, rel=1e-2
        )

    def test_halving_clock_doubles_speed(self):
        slow = propagation_speed(timing(clk=2000, delta=3, pitch=1000.0))
        fast = propagation_speed(timing(clk=1000, delta=3, pitch=1000.0))
        assert fast == pytest.approx(2 * slow)

    def test_consistency_with_head_latency(self):
        t = timing(clk=1000, delta=3, pitch=500.0)
        s = 1_000_000.0
        latency_s = head_latency_h(pkt((0, 0, 1), (s, 0, 1)), t) * 1e-12
        omega = propagation_speed(t)
        assert omega * latency_s / (s * 1e-6) == pytest.approx(1.0, rel=1e-2)


class TestReroutingThresholds:
    def test_wrong_order_gives_sentinel(self):
        t = timing()
        phi = rerouting_threshold_phi(t, 2, t, 1)
        assert rerouting_threshold_hops(phi, t.router_pitch) == INF_HOPS

    def test_no_speed_advantage_gives_sentinel(self):
        same = timing(clk=1000, delta=3, pitch=500.0)
        phi = rerouting_threshold_phi(same, 1, same, 2)
        assert rerouting_threshold_hops(phi, same.router_pitch) == INF_HOPS

    def test_band_fraction_of_chip_edge(self):
        # Constructed set: delta 3/3, clocks 4000/1000 ps, pitches 700/500 um,
        # 8x8 fast grid -> edge 3500 um.  phi = 1705.128... um by hand.
        slow = timing(clk=4000, delta=3, pitch=700.0)
        fast = timing(clk=1000, delta=3, pitch=500.0)
        phi = rerouting_threshold_phi(slow, 1, fast, 2)
        assert phi == pytest.approx(1705.128205128205)
        assert 0.45 <= phi / 3500.0 <= 0.63

    def test_hop_conversion_exact_multiple(self):
        assert rerouting_threshold_hops(1500.0, 500.0) == 3

    def test_small_hop_thresholds(self):
        # Detour thresholds land on 2..3 hops for moderate clock ratios.
        slow2 = timing(clk=2000, delta=3, pitch=800.0)
        slow4 = timing(clk=4000, delta=3, pitch=800.0)
        fast = timing(clk=1000, delta=3, pitch=1000.0)
        phi2 = rerouting_threshold_phi(slow2, 1, fast, 2)
        phi4 = rerouting_threshold_phi(slow4, 1, fast, 2)
        assert phi2 == pytest.approx(2444.4444444444443)
        assert rerouting_threshold_hops(phi2, fast.router_pitch) == 3
        assert rerouting_threshold_hops(phi4, fast.router_pitch) == 2

    def test_sentinel_exceeds_all_grid_spans(self):
        t = timing()
        phi = rerouting_threshold_phi(t, 2, t, 1)
        hops = rerouting_threshold_hops(phi, t.router_pitch)
        assert hops > 10_000  # far beyond any configured mesh dimension


class TestDetourThresholdStackAware:
    def test_adjacent_matches_pairwise_formula(self):
        s = stack_two(clk_slow=4000, clk_fast=1000, pitch_slow=700.0, pitch_fast=500.0)
        got = detour_threshold_um(s, 1, 2)
        want = rerouting_threshold_phi(layer_timing(s, 1), 1, layer_timing(s, 2), 2)
        assert got == pytest.approx(want)

    def test_nonadjacent_costs_more_than_adjacent_formula(self):
        s = StackConfig((
            LayerSpec(rows=2, cols=2, tech=TechnologyNode(130, 4000, 3, 2, 800.0)),
            LayerSpec(rows=2, cols=2, tech=TechnologyNode(65, 2000, 3, 2, 600.0)),
            LayerSpec(rows=2, cols=2, tech=TechnologyNode(45, 1000, 3, 2, 500.0)),
        ))
        general = detour_threshold_um(s, 1, 3)
        pairwise = rerouting_threshold_phi(layer_timing(s, 1), 1, layer_timing(s, 3), 3)
        assert general > pairwise


class TestRouteLatencyEstimate:
    def test_single_router(self):
        s = stack_two()
        assert route_latency_estimate([(Address(0, 0, 1), None)], s) == 6000

    def test_matches_horizontal_formula(self):
        s = stack_two()
        route = [(Address(x, 0, 2), Direction.EAST) for x in range(4)]
        route.append((Address(4, 0, 2), None))
        got = route_latency_estimate(route, s)
        p = pkt((0, 0, 2), (4 * 500.0, 0, 2))
        assert got == head_latency_h(p, layer_timing(s, 2))

    def test_detour_composition_matches_vertical_formulas(self):
        # down, h fast hops, up: equals V-down + H(fast) + V-up minus the
        # double-counted junction routers.
        s = stack_two()
        h = 4
        route = [(Address(0, 0, 1), Direction.DOWN)]
        route += [(Address(x, 0, 2), Direction.EAST) for x in range(h)]
        route += [(Address(h, 0, 2), Direction.UP), (Address(h, 0, 1), None)]
        got = route_latency_estimate(route, s)
        ft = layer_timing(s, 2)
        down = head_latency_v(pkt((0, 0, 1), (0, 0, 2)), s, Direction.DOWN)
        across = head_latency_h(pkt((0, 0, 2), (h * 500.0, 0, 2)), ft)
        up = head_latency_v(pkt((0, 0, 2), (0, 0, 1)), s, Direction.UP)
        assert got == down + across + up - 2 * ft.head_delay * ft.clk_period

    def test_disconnected_route_rejected(self):
        s = stack_two()
        with pytest.raises(PerfModelError, match="disconnected"):
            route_latency_estimate(
                [(Address(0, 0, 1), Direction.EAST), (Address(0, 4, 1), None)], s
            )

    def test_missing_direction_rejected(self):
        s = stack_two()
        with pytest.raises(PerfModelError):
            route_latency_estimate(
                [(Address(0, 0, 1), None), (Address(2, 0, 1), None)], s
            )

    def test_pure_and_deterministic(self):
        s = stack_two()
        route = [(Address(0, 0, 1), Direction.DOWN), (Address(0, 0, 2), None)]
        assert route_latency_estimate(route, s) == route_latency_estimate(route, s)


class TestDetourBreakEvenBoundary:
    def test_inequality_flips_at_phi(self):
        # Just above the threshold the detour estimate strictly beats the
        # in-layer latency; just below it strictly loses.
        slow = timing(clk=4000, delta=3, pitch=700.0)
        fast = timing(clk=1000, delta=3, pitch=500.0)
        s = StackConfig((
            LayerSpec(rows=4, cols=4, tech=TechnologyNode(130, 4000, 3, 2, 700.0)),
            LayerSpec(rows=8, cols=8, tech=TechnologyNode(45, 1000, 3, 2, 500.0)),
        ))
        phi = rerouting_threshold_phi(slow, 1, fast, 2)

        def in_layer(distance):
            return head_latency_h(pkt((0, 0, 1), (distance, 0, 1)), slow)

        def detour(distance):
            down = head_latency_v(pkt((0, 0, 1), (0, 0, 2)), s, Direction.DOWN)
            across = head_latency_h(pkt((0, 0, 2), (distance, 0, 2)), fast)
            up = head_latency_v(pkt((0, 0, 2), (0, 0, 1)), s, Direction.UP)
            return down + across + up - 2 * fast.head_delay * fast.clk_period

        eps = 1e-6
        assert detour(phi * (1 + eps)) < in_layer(phi * (1 + eps))
        assert detour(phi * (1 - eps)) > in_layer(phi * (1 - eps))
        assert detour(phi) == pytest.approx(in_layer(phi), rel=1e-9)
