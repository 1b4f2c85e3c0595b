import csv
import json
import math

import pytest

from qcsmc.cli import EXIT_DIVERGED, EXIT_INVALID, EXIT_OK, TRAJECTORY_COLUMNS, main, sidecar_path

from conftest import SCENARIOS


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def run(capsys, *argv):
    rc = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return rc, out, err


class TestSimulate:
    def test_csv_and_sidecar(self, tmp_path, capsys):
        out = tmp_path / "run.csv"
        rc, _, err = run(capsys, "simulate", "--config", SCENARIOS / "unperturbed_U.json", "--out", out)
        assert rc == EXIT_OK and "captured at" in err
        rows = list(csv.reader(out.open()))
        assert tuple(rows[0]) == TRAJECTORY_COLUMNS
        assert [float(v) for v in rows[1][1:3]] == [1.0, 2.0]
        meta = json.loads(sidecar_path(out).read_text())
        assert meta["n_samples"] == len(rows) - 1
        assert meta["provenance"]["gamma"] == "config"
        assert meta["provenance"]["dt"] == "config"
        assert meta["provenance"]["delta_cap"] == "default"
        assert meta["config"]["delta_cap"] == 1e5

    def test_cli_override_recorded(self, tmp_path, capsys):
        out = tmp_path / "run.json"
        rc, _, _ = run(
            capsys, "simulate", "--config", SCENARIOS / "unperturbed_U.json", "--dt", "5e-4", "--format", "json", "--out", out
        )
        meta = json.loads(out.read_text())
        assert rc == EXIT_OK
        assert meta["provenance"]["dt"] == "cli"
        assert meta["data"]["t"][1] == pytest.approx(5e-4)

    def test_seed_override(self, tmp_path, capsys):
        cfg = write_json(tmp_path / "c.json", {"x0": [1, 2], "gamma": 150, "D": 100, "t_end": 0.05,
                                                "disturbance": {"type": "uniform_random", "bound": 100, "seed": 1}})
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run(capsys, "simulate", "--config", cfg, "--seed", 9, "--out", a)[0] == EXIT_OK
        assert run(capsys, "simulate", "--config", cfg, "--seed", 10, "--out", b)[0] == EXIT_OK
        assert a.read_bytes() != b.read_bytes()
        assert json.loads(sidecar_path(a).read_text())["config"]["disturbance"]["seed"] == 9

    def test_seed_without_random_disturbance(self, tmp_path, capsys):
        rc, _, err = run(capsys, "simulate", "--config", SCENARIOS / "unperturbed_U.json", "--seed", 3, "--out", tmp_path / "x.csv")
        assert rc == EXIT_INVALID and "seed" in err

    @pytest.mark.parametrize(
        "raw,key",
        [
            ({"x0": [1, 2], "gamma": 150, "D": 100, "dt": -1}, "dt"),
            ({"x0": [1, 2], "gamma": 100, "D": 100}, "gamma"),
            ({"x0": [1, 2], "gamma": 150, "gama": 3}, "gama"),
            ({"x0": [1, 2], "gamma": 150, "D": 100, "disturbance": {"type": "sinusoid", "amplitude": 200, "frequency": 1, "phase": 0}}, "disturbance"),
        ],
    )
    def test_invalid_config(self, tmp_path, capsys, raw, key):
        rc, _, err = run(capsys, "simulate", "--config", write_json(tmp_path / "c.json", raw), "--out", tmp_path / "o.csv")
        assert rc == EXIT_INVALID
        assert key in err
        assert not (tmp_path / "o.csv").exists()

    def test_missing_file(self, tmp_path, capsys):
        rc, _, err = run(capsys, "simulate", "--config", tmp_path / "nope.json", "--out", tmp_path / "o.csv")
        assert rc == EXIT_INVALID and err.startswith("error:")

    def test_divergence_exit_code(self, tmp_path, capsys):
        cfg = write_json(tmp_path / "c.json", {"x0": [1e308, 1e308], "gamma": 1, "dt": 1, "t_end": 2})
        rc, _, err = run(capsys, "simulate", "--config", cfg, "--out", tmp_path / "o.csv")
        assert rc == EXIT_DIVERGED and "diverged" in err
        meta = json.loads(sidecar_path(tmp_path / "o.csv").read_text())
        assert meta["diverged"] is not None


class TestAnalytic:
    def test_harmonic_start(self, capsys):
        rc, out, _ = run(capsys, "analytic", "--x1", 1, "--x2", -10, "--gamma", 100)
        res = json.loads(out)
        assert rc == EXIT_OK
        (arc,) = res["arcs"]
        assert arc["kind"] == "harmonic"
        assert arc["B"] == pytest.approx(1.0)
        assert arc["omega"] == pytest.approx(10.0)
        assert arc["phi"] == pytest.approx(3 * math.pi / 2)
        assert arc["t_reach"] == pytest.approx(math.pi / 20)
        assert res["t_reach_alt_denominator"] is None

    def test_u_start_two_arcs(self, capsys):
        res = json.loads(run(capsys, "analytic", "--x1", 1, "--x2", 2, "--gamma", 100)[1])
        assert [a["kind"] for a in res["arcs"]] == ["parabolic", "harmonic"]
        assert res["arcs"][0]["t_exit"] == pytest.approx(0.02)
        assert res["total_time"] == pytest.approx(0.02 + 0.22435, abs=1e-4)

    def test_outside_ca_rejected(self, capsys):
        rc, out, err = run(capsys, "analytic", "--x1", 0.1, "--x2", -10, "--gamma", 100)
        assert rc == EXIT_INVALID and out == ""
        assert "not in C_a" in err

    def test_csv_output(self, tmp_path, capsys):
        out = tmp_path / "a.csv"
        assert run(capsys, "analytic", "--x1", 1, "--x2", -10, "--gamma", 100, "--out", out)[0] == EXIT_OK
        rows = list(csv.reader(out.open()))
        assert tuple(rows[0]) == TRAJECTORY_COLUMNS
        assert json.loads(sidecar_path(out).read_text())["command"] == "analytic"


class TestCompare:
    def test_against_closed_form(self, capsys):
        rc, out, _ = run(capsys, "compare", "--config", SCENARIOS / "unperturbed_Ca.json")
        res = json.loads(out)
        assert rc == EXIT_OK and res["against"] == "analytic"
        assert max(res["max_x1_err"], res["max_x2_err"]) < 1e-2

    def test_axis_start_uses_reference(self, tmp_path, capsys):
        cfg = write_json(tmp_path / "c.json", {"x0": [0, 5], "gamma": 100, "t_end": 0.1})
        rc, out, _ = run(capsys, "compare", "--config", cfg)
        res = json.loads(out)
        assert rc == EXIT_OK and res["against"].startswith("simulation")


class TestGain:
    @pytest.mark.parametrize("D,old,new", [(100, 1100.5, 2928.93), (0, 0.5, 0.5), (1, 2.5, 4.3284)])
    def test_thresholds(self, capsys, D, old, new):
        res = json.loads(run(capsys, "gain", "--D", D)[1])
        assert res["gamma_min_old"] == pytest.approx(old)
        assert res["gamma_min_new"] == pytest.approx(new, abs=1e-2)
        lo, hi = res["epsilon_interval_at"]["interval"]
        assert 0 < lo < hi

    def test_negative_bound(self, capsys):
        assert run(capsys, "gain", "--D", -1)[0] == EXIT_INVALID


class TestLyapunovMap:
    def test_resolution_one_rejected(self, tmp_path, capsys):
        rc, _, err = run(capsys, "lyapunov-map", "--gamma", 2929, "--D", 100, "--resolution", 1, "--out", tmp_path / "m.csv")
        assert rc == EXIT_INVALID and "resolution" in err

    @pytest.mark.parametrize("gamma", [2929, 150])
    def test_default_grid(self, tmp_path, capsys, gamma):
        out = tmp_path / "m.csv"
        assert run(capsys, "lyapunov-map", "--gamma", gamma, "--D", 100, "--out", out)[0] == EXIT_OK
        rows = list(csv.reader(out.open()))
        assert rows[0] == ["x1", "x2", "v_new"]
        assert len(rows) == 1 + 201 * 201
        values = {(float(a), float(b)): float(v) for a, b, v in rows[1:]}
        assert values[(0.0, 0.0)] == 0.0
        assert min(values.values()) >= 0.0
        meta = json.loads(sidecar_path(out).read_text())
        assert meta["provenance"]["x1_range"] == "default"
        assert meta["x2_range"] == [-20.0, 20.0]

    def test_bad_epsilon(self, tmp_path, capsys):
        rc, _, _ = run(capsys, "lyapunov-map", "--gamma", 150, "--D", 100, "--epsilon", 50, "--out", tmp_path / "m.csv")
        assert rc == EXIT_INVALID


class TestSweep:
    def test_zero_samples(self, tmp_path, capsys):
        cfg = write_json(tmp_path / "s.json", {"base": {"gamma": 150, "D": 100}, "samples": 0})
        rc, _, err = run(capsys, "sweep", "--config", cfg)
        assert rc == EXIT_INVALID and "samples" in err

    def test_small_sweep(self, tmp_path, capsys):
        cfg = write_json(tmp_path / "s.json", {"base": {"gamma": 150, "D": 100, "t_end": 0.2}, "samples": 3,
                                                "x0_region": "U", "x0_box": [[0.1, 1], [0.1, 5]], "seed": 4})
        rc, out, err = run(capsys, "sweep", "--config", cfg, "--workers", 1)
        res = json.loads(out)
        assert rc == EXIT_OK and "3 runs" in err
        assert res["aggregate"]["u_exit_in_bracket"] == {"checked": 3, "pass": 3}

    def test_divergence_exit_code(self, tmp_path, capsys):
        cfg = write_json(tmp_path / "s.json", {"base": {"gamma": 1, "dt": 1, "t_end": 2}, "samples": 1,
                                                "x0_box": [[1e308, 1.1e308], [1e308, 1.1e308]]})
        rc, out, _ = run(capsys, "sweep", "--config", cfg, "--workers", 1)
        assert rc == EXIT_DIVERGED
        assert json.loads(out)["aggregate"]["diverged"] == 1


def test_no_command(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
