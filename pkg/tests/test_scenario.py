import io
import json

import numpy as np
import pytest

from tpmon.cli import cli_main
from tpmon.errors import ConfigError, TraceValidationError
from tpmon.monitor import energy_quanta
from tpmon.power import reference_trace, write_trace_csv
from tpmon.scenario import (
    SimOutput,
    emit_csv,
    load_scenario,
    run_simulation,
    steady_power,
)
from tpmon.topology import Floorplan

from conftest import SCENARIOS

REF_CAL = {"targets": str(SCENARIOS / "reference_targets.json")}


def write_scenario(tmp_path, **overrides):
    data = {
        "calibration": REF_CAL,
        "workload": {"profile": ["medium"] + ["idle"] * 7},
        "duration_steps": 200,
    }
    data.update(overrides)
    for key, value in list(data.items()):
        if value is None:
            del data[key]
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(data))
    return path


def run_cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = cli_main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


# --- loading -----------------------------------------------------------------------

def test_minimal_calibrated_scenario(tmp_path):
    cfg = load_scenario(write_scenario(tmp_path))
    assert cfg.params.t_amb == pytest.approx(43.818, abs=1e-3)
    assert cfg.floorplan == Floorplan()
    assert cfg.mode == "profile"
    assert all(abs(v) <= 0.05 for v in cfg.calibration_residuals.values())
    assert len(cfg.tasks) == 8


def test_both_workload_modes_rejected(tmp_path):
    path = write_scenario(
        tmp_path, workload={"profile": ["idle"] * 8, "trace": "x.csv"}, power_lut="lut.json"
    )
    with pytest.raises(ConfigError, match="profile.*trace|exactly one"):
        load_scenario(path)


def test_step_above_stability_limit_rejected(tmp_path):
    path = write_scenario(tmp_path, step_dt=2e-3)
    with pytest.raises(ConfigError, match="stability limit 0.00125"):
        load_scenario(path)


def test_parse_error_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "workload": {\n    "profile": [,]\n  }\n}')
    with pytest.raises(ConfigError, match="line 3"):
        load_scenario(path)


@pytest.mark.parametrize(
    "overrides, match",
    [
        ({"duration_steps": 0}, "duration_steps"),
        ({"readout_interval_steps": 1.5}, "readout_interval_steps"),
        ({"workload": {"profile": ["idle"] * 7}}, "one power class per core"),
        ({"workload": {"profile": ["warm"] * 8}}, "unknown power class"),
        ({"workload": {"profile": [{"start_step": 3, "levels": ["idle"] * 8}]}}, "start at step 0"),
        ({"floorplan": {"n_tiles": 0}}, "floorplan"),
        ({"thermal": {"g_amb": 0.1}}, "exactly one of"),
        ({"calibration": None, "thermal": {"g_amb": 0.1, "g_lat": 0.1, "cap": 1e-3, "t_amb": 40}}, "power_levels"),
        ({"workload": {"trace": "t.csv"}}, "power_lut"),
        ({"tasks": {"low": 9}}, "tasks"),
        ({"tasks": {"warm": 1}}, "unknown classes"),
        ({"step_dt": 0}, "step_dt"),
        ({"power_lut": "nope.json"}, "nope.json"),
    ],
)
def test_validation_errors_name_field(tmp_path, overrides, match):
    with pytest.raises(ConfigError, match=match):
        load_scenario(write_scenario(tmp_path, **overrides))


def test_explicit_thermal_and_params_file(tmp_path, calibrated):
    params, levels = calibrated
    path = write_scenario(
        tmp_path, calibration=None, thermal=params.to_dict(), power_levels=levels.to_dict()
    )
    cfg = load_scenario(path)
    assert cfg.params == params and cfg.levels == levels
    doc = tmp_path / "params.json"
    code, _, _ = run_cli("calibrate", "--targets", str(SCENARIOS / "reference_targets.json"), "--out", str(doc))
    assert code == 0
    cfg2 = load_scenario(write_scenario(tmp_path, calibration=None, params=str(doc)))
    assert cfg2.params.t_amb == pytest.approx(params.t_amb, abs=1e-12)
    assert cfg2.levels.p_med == pytest.approx(levels.p_med, abs=1e-12)


def test_task_list(tmp_path):
    cfg = load_scenario(write_scenario(tmp_path, tasks=[{"id": "a", "level": "high"}, {"id": "b", "level": "low"}]))
    assert [t.id for t in cfg.tasks] == ["a", "b"]


# --- simulation ------------------------------------------------------------------------

def test_idle_scenario_stays_at_ambient(tmp_path):
    cfg = load_scenario(write_scenario(tmp_path, workload={"profile": ["idle"] * 8}))
    out = run_simulation(cfg)
    assert np.allclose(out.temps, cfg.params.t_amb, rtol=0, atol=1e-12)
    assert not out.energy_aj.any()


def test_single_medium_reaches_47():
    cfg = load_scenario(SCENARIOS / "eq_single_medium.json")
    out = run_simulation(cfg)
    assert out.temps[-1, 0] == pytest.approx(47.0, abs=0.01)


def test_segregated_reaches_54_and_47():
    cfg = load_scenario(SCENARIOS / "eq_segregated.json")
    out = run_simulation(cfg)
    assert np.allclose(out.temps[-1, :4], 54.0, atol=0.01)
    assert np.allclose(out.temps[-1, 4:], 47.0, atol=0.01)


def test_profile_phases(tmp_path):
    phases = [
        {"start_step": 0, "levels": ["high"] * 8},
        {"start_step": 50, "levels": ["low"] * 8},
    ]
    cfg = load_scenario(write_scenario(tmp_path, workload={"profile": phases}))
    out = run_simulation(cfg, 100)
    assert np.all(out.power[:50] == cfg.levels.p_high)
    assert np.all(out.power[50:] == cfg.levels.p_low)
    assert np.array_equal(steady_power(cfg), np.full(8, cfg.levels.p_low))


def test_readouts_match_series(tmp_path):
    phases = [
        {"start_step": 0, "levels": ["high", "low"] * 4},
        {"start_step": 130, "levels": ["medium", "idle"] * 4},
    ]
    cfg = load_scenario(write_scenario(tmp_path, workload={"profile": phases}, readout_interval_steps=50))
    out = run_simulation(cfg, 300)
    assert [step for step, _ in out.readouts] == [49, 99, 149, 199, 249, 299]
    start = 0
    for step, tiles in out.readouts:
        energy = energy_quanta(out.power[start:step + 1], cfg.step_dt).sum(axis=0)
        assert np.array_equal(np.concatenate([r.energy_aj for r in tiles]), energy)
        assert np.array_equal(np.concatenate([r.temps for r in tiles]), out.temps[step])
        start = step + 1
    assert len(out.abstracts) == len(out.readouts)
    for step, abstracts in out.abstracts:
        for a in abstracts:
            assert a.max_temp >= out.temps[step, cfg.floorplan.tile_slice(a.tile)].max()


def test_trace_mode_and_exhaustion(tmp_path):
    trace = reference_trace(["high", "low"] * 4, 150)
    write_trace_csv(trace, tmp_path / "t.csv")
    (tmp_path / "lut.json").write_text((SCENARIOS / "reference_lut.json").read_text())
    path = write_scenario(
        tmp_path,
        workload={"trace": "t.csv", "power_scale": "bridge"},
        power_lut="lut.json",
        duration_steps=150,
    )
    cfg = load_scenario(path)
    out = run_simulation(cfg)
    assert np.allclose(out.power[:, 0], cfg.levels.p_high, rtol=0, atol=1e-9)
    with pytest.raises(ConfigError, match="shorter than"):
        run_simulation(cfg, 151)


def test_trace_over_clock_budget(tmp_path):
    trace = np.zeros((10, 8, 8), dtype=int)
    trace[4, 2, 0] = 500
    write_trace_csv(trace, tmp_path / "t.csv")
    (tmp_path / "lut.json").write_text((SCENARIOS / "reference_lut.json").read_text())
    cfg = load_scenario(write_scenario(tmp_path, workload={"trace": "t.csv"}, power_lut="lut.json", duration_steps=10))
    with pytest.raises(TraceValidationError, match="step 4, core 2"):
        run_simulation(cfg)


def test_trace_demo_scenario_loads():
    cfg = load_scenario(SCENARIOS / "trace_demo.json")
    out = run_simulation(cfg)
    assert out.n_steps == 2000


# --- CSV -------------------------------------------------------------------------------

def empty_output(n_steps=0):
    fp = Floorplan(n_tiles=1, rows_per_tile=1, cols_per_tile=1)
    return SimOutput(fp, 1e-6, np.zeros((n_steps, 1)), np.zeros((n_steps, 1)), energy_aj=np.zeros(1, dtype=np.int64))


def test_empty_series_is_header_only(tmp_path):
    emit_csv(empty_output(), tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_bytes() == b"step,time_us,core,power_w,temp_c\n"


def test_row_format(tmp_path, calibrated):
    params, _ = calibrated
    out = empty_output(1)
    out.power[0, 0] = 0.5
    out.temps[0, 0] = params.t_amb
    emit_csv(out, tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[1] == "0,1.000000,0,0.500000,43.818182"


def test_emit_twice_identical(tmp_path):
    cfg = load_scenario(write_scenario(tmp_path))
    out = run_simulation(cfg)
    emit_csv(out, tmp_path / "a.csv")
    emit_csv(out, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert b"\r" not in (tmp_path / "a.csv").read_bytes()


def test_emit_to_bad_path(tmp_path):
    from tpmon.errors import TpmonError

    with pytest.raises(TpmonError, match="cannot write"):
        emit_csv(empty_output(), tmp_path / "missing" / "s.csv")


# --- CLI ----------------------------------------------------------------------------------

def test_cli_simulate(tmp_path):
    path = write_scenario(tmp_path)
    code, out, err = run_cli("simulate", "--scenario", str(path), "--out", str(tmp_path / "s.csv"), "--steps", "20")
    assert code == 0, err
    assert out.startswith("steps 20\n")
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 1 + 20 * 8


def test_cli_steady():
    code, out, _ = run_cli("steady", "--scenario", str(SCENARIOS / "eq_medium_high_neighbors.json"))
    assert code == 0
    assert "core 0 tile 0 row 0 col 0 temp_c 53.000000" in out


def test_cli_allocate_min_max():
    code, out, _ = run_cli(
        "allocate", "--scenario", str(SCENARIOS / "eq_segregated.json"),
        "--target", "min-max-temp", "--method", "exhaustive",
    )
    assert code == 0
    assert "objective 51.000000" in out


def test_cli_allocate_min_spread():
    code, out, _ = run_cli("allocate", "--scenario", str(SCENARIOS / "eq_segregated.json"), "--target", "min-spread")
    assert code == 0
    assert "tile 0 temps_c 54.000000 54.000000 54.000000 54.000000 spread_c 0.000000" in out
    assert "tile 1 temps_c 47.000000 47.000000 47.000000 47.000000 spread_c 0.000000" in out


def test_cli_calibrate_writes_params(tmp_path):
    code, out, _ = run_cli("calibrate", "--targets", str(SCENARIOS / "reference_targets.json"), "--out", str(tmp_path / "p.json"))
    assert code == 0
    assert "t_amb_c 43.818182" in out
    doc = json.loads((tmp_path / "p.json").read_text())
    assert set(doc) == {"thermal", "power_levels", "targets", "residuals"}
    assert doc["thermal"]["g_lat"] == pytest.approx(0.15)


def test_cli_calibrate_inconsistent_targets(tmp_path):
    bad = tmp_path / "t.json"
    bad.write_text(json.dumps({"t_single_medium": 47, "t_medium_high_neighbors": 53, "t_mixed_max": 54.5,
                               "t_all_high": 54, "t_all_low": 47}))
    code, out, err = run_cli("calibrate", "--targets", str(bad), "--out", str(tmp_path / "p.json"))
    assert code == 2
    assert "residual_c" in out and "t_mixed_max" in out
    assert "calibration failed" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate", "--bogus"],
        ["allocate", "--scenario", "x.json", "--target", "coolest"],
        [],
        ["frobnicate"],
    ],
)
def test_cli_usage_errors(argv):
    code, out, err = run_cli(*argv)
    assert code == 1
    assert "usage:" in err
    assert out == ""


def test_cli_validation_error_exit_1(tmp_path):
    path = write_scenario(tmp_path, duration_steps=-1)
    code, _, err = run_cli("steady", "--scenario", str(path))
    assert code == 1 and "duration_steps" in err
    code, _, err = run_cli("steady", "--scenario", str(tmp_path / "missing.json"))
    assert code == 1


def test_cli_help_exits_zero(capsys):
    assert cli_main(["--help"]) == 0
