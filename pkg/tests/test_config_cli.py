import csv

import pytest
import yaml

from hetnoc import cli
from hetnoc.config import ConfigError, config_from_dict, load_config, save_config
from hetnoc.perfmodel import INF_HOPS


def base_config(**overrides):
    cfg = {
        "stack": {
            "layers": [
                {"feature_size_nm": 130, "clk_period_ps": 2000, "head_delay": 3,
                 "pipeline_depth": 2, "router_pitch_um": 800, "rows": 4, "cols": 4},
                {"feature_size_nm": 45, "clk_period_ps": 1000, "head_delay": 3,
                 "pipeline_depth": 2, "router_pitch_um": 1000, "rows": 4, "cols": 4},
            ]
        },
        "routing": {"variant": "r1"},
        "router": {"kind": "standard", "buffer_depth": 8},
        "traffic": {
            "mode": "trace",
            "packets": [
                {"tick": 0, "src": [0, 0, 1], "dst": [3, 2, 2], "length": 4},
            ],
        },
        "sim": {"warmup_ticks": 0, "seed": 3},
        "output": {"dir": "out"},
    }
    cfg.update(overrides)
    return cfg


def write_config(tmp_path, data, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


class TestConfigLoading:
    def test_round_trip_identical(self, tmp_path):
        path = write_config(tmp_path, base_config())
        cfg1 = load_config(path)
        out = tmp_path / "resaved.yaml"
        save_config(cfg1, out)
        cfg2 = load_config(out)
        assert cfg1 == cfg2
        out2 = tmp_path / "resaved2.yaml"
        save_config(cfg2, out2)
        assert out.read_bytes() == out2.read_bytes()

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigError, match="unknown config section"):
            config_from_dict(base_config(extra={"x": 1}))

    def test_unknown_layer_key_rejected(self):
        data = base_config()
        data["stack"]["layers"][0]["bogus"] = 1
        with pytest.raises(ConfigError, match="unknown key"):
            config_from_dict(data)

    def test_missing_stack_rejected(self):
        data = base_config()
        del data["stack"]
        with pytest.raises(ConfigError, match="stack"):
            config_from_dict(data)

    def test_high_vt_requires_descend_routing(self):
        data = base_config()
        data["routing"]["variant"] = "xyz"
        data["router"]["kind"] = "high_vt"
        with pytest.raises(ConfigError, match="high_vt"):
            config_from_dict(data)

    def test_speed_ordering_enforced_for_r1(self):
        data = base_config()
        # Bottom layer made slower per hop than the top one.
        data["stack"]["layers"][1]["router_pitch_um"] = 100
        with pytest.raises(ConfigError, match="slower"):
            config_from_dict(data)

    def test_r2_threshold_precomputed(self):
        data = base_config()
        data["routing"] = {"variant": "r2"}
        cfg = config_from_dict(data)
        alg = cfg.build_algorithm()
        assert alg.r2_params.target_layer == 2
        assert alg.r2_params.phi(1) == 3
        assert alg.r2_params.phi(2) == INF_HOPS

    def test_bad_traffic_mode(self):
        data = base_config()
        data["traffic"] = {"mode": "nope"}
        with pytest.raises(ConfigError, match="traffic.mode"):
            config_from_dict(data)


class TestCliExitCodes:
    def test_simulate_ok(self, tmp_path):
        path = write_config(tmp_path, base_config())
        out = tmp_path / "out"
        assert cli.main(["simulate", "--config", str(path), "--out", str(out)]) == 0
        assert (out / "report.csv").exists()
        assert (out / "flit_latency_hist.csv").exists()

    def test_config_error_exit_1(self, tmp_path, capsys):
        data = base_config()
        data["routing"]["variant"] = "bogus"
        path = write_config(tmp_path, data)
        assert cli.main(["simulate", "--config", str(path)]) == 1
        assert "error:" in capsys.readouterr().err

    def test_verification_failure_exit_2(self, tmp_path):
        data = base_config()
        data["routing"] = {"variant": "adversarial_allturns"}
        path = write_config(tmp_path, data)
        out = tmp_path / "v"
        assert cli.main(["verify", "--config", str(path), "--out", str(out)]) == 2
        witness = (out / "verify_witnesses.json").read_text()
        assert '"cdg_acyclic": false' in witness

    def test_verify_pass_exit_0(self, tmp_path):
        path = write_config(tmp_path, base_config())
        out = tmp_path / "v"
        assert cli.main(["verify", "--config", str(path), "--out", str(out)]) == 0
        text = (out / "verify_report.csv").read_text()
        assert "connected,pass" in text

    def test_watchdog_exit_3(self, tmp_path, capsys):
        data = base_config()
        data["routing"] = {"variant": "adversarial_allturns"}
        data["router"] = {"kind": "standard", "buffer_depth": 2, "vc_count_fast": 1,
                          "vc_count_slow": 1}
        data["traffic"] = {
            "mode": "trace",
            "packets": [
                {"tick": 0, "src": [0, 0, 2], "dst": [1, 1, 2], "length": 12},
                {"tick": 0, "src": [1, 0, 2], "dst": [0, 1, 2], "length": 12},
                {"tick": 0, "src": [1, 1, 2], "dst": [0, 0, 2], "length": 12},
                {"tick": 0, "src": [0, 1, 2], "dst": [1, 0, 2], "length": 12},
            ],
        }
        data["sim"] = {"watchdog_window": 200}
        path = write_config(tmp_path, data)
        assert cli.main(["simulate", "--config", str(path), "--out", str(tmp_path / "w")]) == 3
        assert "watchdog abort" in capsys.readouterr().err


class TestCliOutputs:
    def test_eval_model_schema(self, tmp_path):
        path = write_config(tmp_path, base_config())
        out = tmp_path / "m"
        assert cli.main(["eval-model", "--config", str(path), "--out", str(out)]) == 0
        with open(out / "model_eval.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == [
            "record", "layer", "fast_layer", "feature_size_nm", "clk_period_ps",
            "xi", "s_f_model", "c_f_actual", "c_f_model", "omega_m_per_s",
            "phi_um", "phi_hops", "detour_pays",
        ]
        kinds = {r[0] for r in rows[1:]}
        assert kinds == {"layer", "layer_pair"}
        assert (out / "topology.csv").exists()

    def test_eval_model_identical_layers_sentinel(self, tmp_path):
        data = base_config()
        data["stack"]["layers"][0] = dict(data["stack"]["layers"][1])
        data["routing"] = {"variant": "xyz"}
        path = write_config(tmp_path, data)
        out = tmp_path / "m2"
        assert cli.main(["eval-model", "--config", str(path), "--out", str(out)]) == 0
        with open(out / "model_eval.csv") as fh:
            rows = [r for r in csv.reader(fh)][1:]
        layer_rows = [r for r in rows if r[0] == "layer"]
        assert layer_rows[0][9] == layer_rows[1][9]  # equal omega
        pair_rows = [r for r in rows if r[0] == "layer_pair"]
        assert pair_rows[0][11] == str(INF_HOPS)
        assert pair_rows[0][12] == "no"

    def test_route_trace_matches_model(self, tmp_path, capsys):
        path = write_config(tmp_path, base_config())
        assert cli.main([
            "route-trace", "--config", str(path), "--src", "0,0,1", "--dst", "3,2,2",
        ]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].startswith("step,router_id")
        final_ps = int(lines[-1].rsplit(",", 1)[1])

        from hetnoc import experiments, perfmodel
        cfg = load_config(path)
        graph = cfg.build_graph()
        alg = cfg.build_algorithm()
        src = graph.id_of((0, 0, 1))
        dst = graph.id_of((3, 2, 2))
        route = experiments.trace_route(graph, alg, src, dst)
        assert final_ps == perfmodel.route_latency_estimate(route, cfg.build_stack())

    def test_sweep_csv_schema(self, tmp_path):
        path = write_config(tmp_path, base_config())
        out = tmp_path / "s"
        assert cli.main([
            "sweep", "--config", str(path), "--axis", "hop_distance",
            "--values", "1,2", "--out", str(out),
        ]) == 0
        with open(out / "sweep_hop_distance.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == [
            "axis", "axis_value", "algorithm", "model_latency_ps",
            "sim_latency_ps", "enhancement",
        ]
        algs = {r[2] for r in rows[1:]}
        assert algs == {"xyz", "r1"}

    def test_sweep_clock_ratio_axis(self, tmp_path):
        path = write_config(tmp_path, base_config())
        out = tmp_path / "cf"
        assert cli.main([
            "sweep", "--config", str(path), "--axis", "cf", "--values", "2,3",
            "--out", str(out),
        ]) == 0
        with open(out / "sweep_cf.csv") as fh:
            rows = list(csv.reader(fh))
        values = {r[1] for r in rows[1:]}
        assert values == {"2.0", "3.0"}

    def test_sweep_injection_rate_axis_with_plot(self, tmp_path):
        data = base_config()
        data["traffic"] = {
            "mode": "uniform", "rate": 0.05, "packet_length": 4, "duration_ticks": 300,
        }
        data["sim"] = {"warmup_ticks": 50, "measure_ticks": 200, "seed": 5}
        path = write_config(tmp_path, data)
        out = tmp_path / "ir"
        assert cli.main([
            "sweep", "--config", str(path), "--axis", "injection_rate",
            "--values", "0.02,0.05", "--out", str(out), "--plot",
        ]) == 0
        assert (out / "sweep_injection_rate.csv").exists()
        svg = (out / "sweep_injection_rate.svg").read_bytes()
        assert svg.startswith(b"<?xml")

    def test_fit_round_trip_via_cli(self, tmp_path, capsys):
        from hetnoc.techmodel import AreaParams, area_scaling

        truth = AreaParams(2.0, 0.5)
        src = tmp_path / "samples.csv"
        xs = [1.0, 1.5, 2.0, 3.0, 4.0]
        src.write_text(
            "xi,value\n" + "\n".join(f"{x},{area_scaling(x, truth)}" for x in xs) + "\n"
        )
        out = tmp_path / "fit"
        assert cli.main(["fit", "--input", str(src), "--model", "area", "--out", str(out)]) == 0
        text = (out / "fit_area.csv").read_text()
        assert "rmse" in text

    def test_fit_missing_column_exit_1(self, tmp_path, capsys):
        src = tmp_path / "bad.csv"
        src.write_text("a,b\n1,2\n")
        assert cli.main(["fit", "--input", str(src), "--model", "area"]) == 1

    def test_simulate_trace_flag(self, tmp_path):
        path = write_config(tmp_path, base_config())
        out = tmp_path / "t"
        assert cli.main([
            "simulate", "--config", str(path), "--out", str(out), "--trace",
        ]) == 0
        header = (out / "trace.csv").read_text().splitlines()[0]
        assert header == "tick,router,port,flit_id,event"
