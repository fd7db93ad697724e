import json
import xml.etree.ElementTree as ET

import numpy as np

from xplab.cli import main
from xplab.plotsvg import Axes, emit_plot
from xplab.trajectory import theoretical_growth_bounds


def run(args):
    return main([str(a) for a in args])


class TestBasicCommands:
    def test_region_bounds_prints_value(self, capsys):
        assert run(["region-bounds", "--k", 3, "--m", 2]) == 0
        assert capsys.readouterr().out.strip() == "7"

    def test_region_bounds_json_report(self, tmp_path):
        out = tmp_path / "rb"
        assert run(["region-bounds", "--k", 4, "--m", 2, "--out", out]) == 0
        report = json.loads((out / "arrangement.json").read_text())
        assert report == {"k": 4, "m": 2, "bound": 11, "exact_generic": 11}

    def test_regions2d_svg_and_csv(self, tmp_path):
        svg = tmp_path / "fig1.svg"
        assert run(["regions2d", "--width", 4, "--depth", 3, "--seed", 1, "--out", svg]) == 0
        root = ET.parse(svg).getroot()
        assert root.tag.endswith("svg")
        csv_lines = svg.with_suffix(".cells.csv").read_text().splitlines()
        assert csv_lines[0] == "cell_id,area,pattern,depth_introduced_edges"
        assert len(csv_lines) > 2

    def test_selftest_exits_zero(self, capsys):
        assert run(["selftest"]) == 0
        assert "checks passed" in capsys.readouterr().out

    def test_unknown_subcommand_is_config_error(self, capsys):
        assert run(["frobnicate"]) == 1

    def test_unknown_flag_is_config_error(self):
        assert run(["region-bounds", "--k", 3, "--m", 2, "--frob", 1]) == 1

    def test_missing_required_flag(self, capsys):
        assert run(["region-bounds", "--k", 3]) == 1
        assert "missing required" in capsys.readouterr().err


class TestConfigFiles:
    def test_json_config_with_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"k": 3, "m": 2}))
        assert run(["region-bounds", "--config", cfg]) == 0
        assert capsys.readouterr().out.strip() == "7"
        # flags win over config
        assert run(["region-bounds", "--config", cfg, "--k", 4]) == 0
        assert capsys.readouterr().out.strip() == "11"

    def test_toml_config(self, tmp_path, capsys):
        cfg = tmp_path / "c.toml"
        cfg.write_text("k = 5\nm = 2\n")
        assert run(["region-bounds", "--config", cfg]) == 0
        assert capsys.readouterr().out.strip() == "16"

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"k": 3, "m": 2, "frobs": 1}))
        assert run(["region-bounds", "--config", cfg]) == 1
        assert "unknown config key" in capsys.readouterr().err

    def test_manifest_written(self, tmp_path):
        out = tmp_path / "gb"
        assert run(["growth-bounds", "--ks", "8", "--sigma-ws", "2", "--out", out]) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["subcommand"] == "growth-bounds"
        assert "config_sha256" in manifest and "version" in manifest


class TestThinShell:
    def test_growth_bounds_csv_matches_module(self, tmp_path):
        out = tmp_path / "gb"
        assert run([
            "growth-bounds", "--ks", "8,100", "--sigma-ws", "2,4",
            "--sigma-b", 1, "--activation", "hard_tanh", "--out", out,
        ]) == 0
        lines = (out / "bounds.csv").read_text().splitlines()
        assert lines[0] == "k,sigma_w,sigma_b,activation,lower,upper"
        rows = [line.split(",") for line in lines[1:]]
        for row in rows:
            gb = theoretical_growth_bounds(int(row[0]), float(row[1]), float(row[2]), row[3])
            assert float(row[4]) == gb.lower_ratio
            assert float(row[5]) == gb.upper_ratio

    def test_transitions_csv_schema_and_determinism(self, tmp_path):
        args = [
            "transitions", "--width", 6, "--input-dim", 3, "--depths", "1,2",
            "--sigma-w-sq", 8, "--seeds", 2, "--seed", 3,
        ]
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert run([*args, "--out", out_a]) == 0
        assert run([*args, "--out", out_b]) == 0
        a = (out_a / "summary.csv").read_bytes()
        assert a == (out_b / "summary.csv").read_bytes()
        header = a.decode().splitlines()[0]
        assert header == "depth,width,sigma_w_sq,seed,length,transitions,patterns"
        events_header = (out_a / "events.csv").read_text().splitlines()[0]
        assert events_header == "t,layer,neuron,boundary,direction"

    def test_dichotomies_csv_schema(self, tmp_path):
        out = tmp_path / "d"
        assert run([
            "dichotomies", "--width", 8, "--depths", "2", "--s", 5,
            "--num-t", 64, "--seeds", 2, "--out", out,
        ]) == 0
        lines = (out / "dichotomies.csv").read_text().splitlines()
        assert lines[0] == "sweep_layer,remaining_depth,s,dichotomies,label_transitions,seed"
        assert len(lines) == 3

    def test_traj_growth_csv_schema(self, tmp_path):
        out = tmp_path / "tg"
        assert run([
            "traj-growth", "--width", 8, "--depth", 3, "--sigma-w-sqs", "4",
            "--sigma-b-sq", 1, "--seeds", 3, "--num-points", 33, "--rel-tol", 0.05,
            "--out", out,
        ]) == 0
        lines = (out / "growth_sw4.csv").read_text().splitlines()
        assert lines[0] == "layer,mean_length,ci_lo,ci_hi,ratio,ratio_ci_lo,ratio_ci_hi,excluded"
        assert len(lines) == 5  # layers 0..3
        assert (out / "growth.svg").exists()


class TestEmitPlot:
    def test_empty_series_valid_svg(self, tmp_path):
        path = tmp_path / "empty.svg"
        emit_plot([], Axes(xlabel="x", ylabel="y", title="t"), path)
        root = ET.parse(path).getroot()
        assert root.tag.endswith("svg")

    def test_single_point_has_marker_and_finite_viewbox(self, tmp_path):
        path = tmp_path / "one.svg"
        emit_plot([("s", [1.0], [2.0])], Axes(), path)
        root = ET.parse(path).getroot()
        circles = [el for el in root.iter() if el.tag.endswith("circle")]
        assert len(circles) == 1
        assert all(np.isfinite(float(v)) for v in root.get("viewBox").split())

    def test_byte_identical_output(self, tmp_path):
        series = [("a", [1, 2, 3], [1.0, 4.0, 9.0]), ("b", [1, 2, 3], [2.0, 3.0, 5.0])]
        p1, p2 = tmp_path / "p1.svg", tmp_path / "p2.svg"
        emit_plot(series, Axes(xlabel="x", log_y=True), p1)
        emit_plot(series, Axes(xlabel="x", log_y=True), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_log_y_drops_nonpositive(self, tmp_path):
        path = tmp_path / "log.svg"
        emit_plot([("s", [1, 2, 3], [0.0, 10.0, 100.0])], Axes(log_y=True), path)
        root = ET.parse(path).getroot()
        circles = [el for el in root.iter() if el.tag.endswith("circle")]
        assert len(circles) == 2


class TestWorkerPoolEnv:
    def test_thread_cap_respected(self, monkeypatch):
        from xplab.cli import worker_count

        monkeypatch.setenv("XPLAB_THREADS", "3")
        assert worker_count() == 3
        monkeypatch.setenv("XPLAB_THREADS", "")
        assert worker_count() >= 1

    def test_pool_order_independent_of_workers(self, tmp_path, monkeypatch):
        from xplab.cli import pmap

        monkeypatch.setenv("XPLAB_THREADS", "4")
        a = pmap(lambda v: v * v, range(10))
        monkeypatch.setenv("XPLAB_THREADS", "1")
        b = pmap(lambda v: v * v, range(10))
        assert a == b == [v * v for v in range(10)]
