import csv
import json
from importlib import resources

import jsonschema
import numpy as np
import pytest

from gliderdec import bundle
from gliderdec.cli import EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK, EXIT_SOLVER, main, parse_grid_arg
from gliderdec.config import ConfigError, apply_override, parse_text, run_config_from
from gliderdec.domain import validate_dive

BUNDLE_FILES = ("adcp.csv", "ttw.csv", "depth.csv", "gps.csv")
# weights tuned for noisy dives (see scripts/calibrate_weights.py)
CALIBRATED = "[inversion]\nlambda_g = 1e4\nlambda_o = 1e4\n[statespace]\nsigma_accel = 1e-2\neta3 = 3e3\n"


def schema(name):
    return json.loads(resources.files("gliderdec").joinpath("schemas", name).read_text())


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    scenario = out / "scenario.toml"
    scenario.write_text("noise_adcp = 0.03\nnoise_ttw = 0.05\nseed = 2\n")
    assert main(["simulate", str(scenario), "--out", str(out / "bundle")]) == EXIT_OK
    return out / "bundle"


def test_simulate_defaults(tmp_path):
    assert main(["simulate", "--out", str(tmp_path)]) == EXIT_OK
    for name in BUNDLE_FILES + ("truth_profile.csv", "truth_states.csv"):
        assert (tmp_path / name).is_file()
    assert validate_dive(bundle.load_bundle(tmp_path)) == []


def test_simulate_malformed_field(tmp_path, capsys):
    scenario = tmp_path / "bad.toml"
    scenario.write_text('max_depth = "deep"\n')
    assert main(["simulate", str(scenario), "--out", str(tmp_path / "o")]) == EXIT_INPUT
    assert "scenario.max_depth" in capsys.readouterr().err


def test_simulate_syntax_error_has_position(tmp_path, capsys):
    scenario = tmp_path / "bad.json"
    scenario.write_text('{"max_depth": 100,\n "seed": }\n')
    assert main(["simulate", str(scenario), "--out", str(tmp_path / "o")]) == EXIT_INPUT
    err = capsys.readouterr().err
    assert "line 2" in err and "column" in err


def test_simulate_unknown_field(tmp_path, capsys):
    scenario = tmp_path / "bad.toml"
    scenario.write_text("max_depht = 100\n")
    assert main(["simulate", str(scenario), "--out", str(tmp_path / "o")]) == EXIT_INPUT
    assert "max_depht" in capsys.readouterr().err


def test_simulate_infeasible(tmp_path):
    scenario = tmp_path / "s.toml"
    scenario.write_text("dive_duration = 600\nmax_depth = 200\n")
    assert main(["simulate", str(scenario), "--out", str(tmp_path / "o")]) == EXIT_INFEASIBLE


def test_simulate_is_byte_identical(tmp_path):
    for run in ("a", "b"):
        assert main(["simulate", "--out", str(tmp_path / run), "--seed", "9"]) == EXIT_OK
    for name in BUNDLE_FILES + ("truth_profile.csv", "truth_states.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_bundle_round_trip_is_exact(tmp_path, noisy_dive):
    bundle.write_bundle(tmp_path, noisy_dive.dive)
    back = bundle.load_bundle(tmp_path)
    a, b = noisy_dive.dive, back
    for name in ("u_rel", "v_rel", "t", "z", "ping_index"):
        np.testing.assert_array_equal(getattr(a.adcp, name), getattr(b.adcp, name))
    np.testing.assert_array_equal(a.ttw.u_ttw, b.ttw.u_ttw)
    np.testing.assert_array_equal(a.depth.z, b.depth.z)
    assert a.gps_end == b.gps_end


def test_bundle_latlon_gps(tmp_path, default_dive):
    bundle.write_bundle(tmp_path, default_dive.dive)
    (tmp_path / "gps.csv").write_text("role,time_s,east_m,north_m,lat,lon\n"
                                      "start,0,,,10.0,20.0\n"
                                      "end,3600,,,10.001,20.0\n")
    dive = bundle.load_bundle(tmp_path)
    assert dive.gps_start.position.tolist() == [0.0, 0.0]
    assert dive.gps_end.north == pytest.approx(111.195, rel=1e-4)
    assert abs(dive.gps_end.east) < 1e-9


def test_bundle_parse_error_location(tmp_path, default_dive):
    bundle.write_bundle(tmp_path, default_dive.dive)
    lines = (tmp_path / "ttw.csv").read_text().splitlines()
    lines[3] = lines[3].split(",")[0] + ",fast,0.1"
    (tmp_path / "ttw.csv").write_text("\n".join(lines) + "\n")
    with pytest.raises(bundle.BundleParseError) as err:
        bundle.load_bundle(tmp_path)
    assert err.value.line == 4
    assert "u_ttw_mps" in str(err.value)


def test_process_both(simulated, tmp_path):
    out = tmp_path / "out"
    config = tmp_path / "calibrated.toml"
    config.write_text(CALIBRATED)
    assert main(["process", str(simulated), "--out", str(out), "--method", "both", "--plots",
                 "--config", str(config)]) == EXIT_OK
    for name in ("profile_invert.csv", "profile_joint.csv", "trajectory_dead.csv", "trajectory_avg.csv",
                 "trajectory_adcp.csv", "traces_profile.svg", "method_comparison.svg", "trajectories.svg"):
        assert (out / name).is_file(), name
    comparison = json.loads((out / "comparison.json").read_text())
    residuals = json.loads((out / "residuals.json").read_text())
    jsonschema.validate(comparison, schema("comparison.schema.json"))
    jsonschema.validate(residuals, schema("residuals.schema.json"))
    assert comparison["correlation"]["u"] >= 0.95 and comparison["correlation"]["v"] >= 0.95
    assert set(residuals) == {"invert", "joint"}
    rows = read_rows(out / "profile_invert.csv")
    assert rows and "depth_m" in rows[0]
    assert (out / "traces_profile.svg").read_text().lstrip().startswith("<?xml")


def test_process_is_deterministic(simulated, tmp_path):
    for run in ("a", "b"):
        assert main(["process", str(simulated), "--out", str(tmp_path / run), "--plots"]) == EXIT_OK
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name


def test_process_invert_only(simulated, tmp_path):
    out = tmp_path / "out"
    assert main(["process", str(simulated), "--out", str(out), "--method", "invert"]) == EXIT_OK
    assert (out / "profile_invert.csv").is_file()
    assert not (out / "profile_joint.csv").exists()
    assert not (out / "trajectory_adcp.csv").exists()
    comparison = json.loads((out / "comparison.json").read_text())
    assert comparison["methods"] == ["invert"] and comparison["correlation"] is None
    jsonschema.validate(comparison, schema("comparison.schema.json"))


def test_process_rejects_invalid_dive(simulated, tmp_path, capsys):
    broken = tmp_path / "broken"
    broken.mkdir()
    for name in BUNDLE_FILES:
        (broken / name).write_bytes((simulated / name).read_bytes())
    (broken / "gps.csv").write_text("role,time_s,east_m,north_m\nstart,0,0,0\nend,100,5,5\n")
    assert main(["process", str(broken), "--out", str(tmp_path / "o")]) == EXIT_INPUT
    err = capsys.readouterr().err
    assert "violation" in err and "gps_end_before_last_ping" in err


def test_process_solver_failure(simulated, tmp_path, capsys):
    config = tmp_path / "c.toml"
    config.write_text("method = \"invert\"\n[inversion]\nlambda_o = 0\n")
    code = main(["process", str(simulated), "--out", str(tmp_path / "o"), "--config", str(config)])
    assert code == EXIT_SOLVER
    assert "condition estimate" in capsys.readouterr().err


def test_process_json_config(simulated, tmp_path):
    config = tmp_path / "c.json"
    config.write_text(json.dumps({"method": "joint", "statespace.eta3": 10.0}))
    assert main(["process", str(simulated), "--out", str(tmp_path / "o"), "--config", str(config)]) == EXIT_OK
    assert (tmp_path / "o" / "profile_joint.csv").is_file()
    assert not (tmp_path / "o" / "profile_invert.csv").exists()


def test_sweep_grid(tmp_path):
    out = tmp_path / "sweep.csv"
    code = main(["sweep", "--grid", "inversion.lambda_o=0.1,1,10", "--grid", "inversion.sigma_ttw=0.02,0.05,0.1",
                 "--out", str(out)])
    assert code == EXIT_OK
    rows = read_rows(out)
    assert len(rows) == 9
    assert all(r["status"] == "ok" for r in rows)
    assert [r["cell"] for r in rows] == [str(i) for i in range(9)]
    assert all(float(r["rmse_invert"]) >= 0 for r in rows)


def test_sweep_records_failures(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--grid", "inversion.lambda_o=0,1", "--grid", "inversion.sigma_adcp=-1,0.03",
                 "--out", str(out)]) == EXIT_OK
    statuses = [r["status"] for r in read_rows(out)]
    assert statuses == ["invalid_config", "solver_failure", "invalid_config", "ok"]


def test_sweep_grid_from_scenario_file(tmp_path, monkeypatch):
    monkeypatch.setenv("GLIDERDEC_THREADS", "3")
    scenario = tmp_path / "s.toml"
    scenario.write_text("noise_adcp = 0.03\nseed = 4\n[sweep]\n\"statespace.eta3\" = [0.1, 1.0, 10.0, 100.0]\n")
    serial = tmp_path / "parallel.csv"
    assert main(["sweep", str(scenario), "--out", str(serial)]) == EXIT_OK
    monkeypatch.setenv("GLIDERDEC_THREADS", "1")
    assert main(["sweep", str(scenario), "--out", str(tmp_path / "serial.csv")]) == EXIT_OK
    assert serial.read_bytes() == (tmp_path / "serial.csv").read_bytes()
    assert len(read_rows(serial)) == 4


def test_sweep_rmse_smallest_at_matched_weight(tmp_path):
    # noise drawn with sigma 0.03; the matched ADCP weight should beat badly mismatched ones
    scenario = tmp_path / "s.toml"
    scenario.write_text("noise_adcp = 0.03\nnoise_ttw = 0.05\nseed = 21\n")
    out = tmp_path / "sweep.csv"
    assert main(["sweep", str(scenario), "--grid", "inversion.sigma_adcp=0.0003,0.03,3.0",
                 "--out", str(out)]) == EXIT_OK
    rmse = [float(r["rmse_invert"]) for r in read_rows(out)]
    assert rmse[1] == min(rmse)


def test_sweep_empty_grid(tmp_path):
    assert main(["sweep", "--out", str(tmp_path / "s.csv")]) == EXIT_INPUT


def test_grid_arg_parsing():
    assert parse_grid_arg("inversion.lambda_o=0.1, 1,10") == ("inversion.lambda_o", [0.1, 1, 10])
    with pytest.raises(ConfigError):
        parse_grid_arg("inversion.lambda_o")


def test_config_helpers():
    cfg = run_config_from(parse_text("method = 'joint'\n[inversion]\nlambda_o = 3\n"))
    assert cfg.method == "joint" and cfg.inversion.lambda_o == 3
    assert apply_override(cfg, "statespace.eta3", 5.0).statespace.eta3 == 5.0
    with pytest.raises(ConfigError, match="inversion.lambda_x"):
        apply_override(cfg, "inversion.lambda_x", 1.0)
    with pytest.raises(ConfigError):
        run_config_from({"method": "neither"})
