"""Scenario files, the global simulation engine and CSV emission.

A scenario is a JSON object::

    {
      "floorplan": {"n_tiles": 2, "rows_per_tile": 2, "cols_per_tile": 2},
      "calibration": {"targets": {...} | "targets.json", "g_amb_scale": 0.1, "tau": 0.005},
      "thermal": {...}, "power_levels": {...},     # instead of "calibration"
      "params": "params.json",                     # or a calibrate output file
      "power_lut": "reference_lut.json",
      "workload": {"profile": [{"start_step": 0, "levels": ["medium", "idle", ...]}]}
               | {"trace": "trace.csv", "power_scale": 1.0 | "bridge"},
      "tasks": {"low": 4, "high": 4} | [{"id": "a", "level": "high"}, ...],
      "step_dt": 1e-6, "duration_steps": 50000,
      "readout_interval_steps": 100, "abstraction_window": 10,
      "initial_temp": null
    }

Relative paths resolve against the scenario file's directory.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .alloc import Task, TaskSet
from .errors import ConfigError, DomainError, TpmonError
from .monitor import AJ_PER_NJ, MonitorSystem, energy_quanta
from .power import (
    PowerClass,
    PowerConfig,
    PowerLut,
    bridge_scale,
    load_trace_csv,
    profile_power,
    trace_power_series,
)
from .thermal import (
    CalibrationTargets,
    PowerLevels,
    ThermalNetwork,
    ThermalParams,
    build_network,
    calibrate,
    calibration_residuals,
)
from .topology import Floorplan

DEFAULT_DURATION_STEPS = 50_000
CSV_HEADER = "step,time_us,core,power_w,temp_c"


@dataclass(frozen=True)
class ProfilePhase:
    start_step: int
    levels: tuple  # PowerClass per core


@dataclass
class ScenarioConfig:
    floorplan: Floorplan
    params: ThermalParams
    levels: PowerLevels
    profile: tuple = ()  # ProfilePhase, sorted by start_step
    trace_path: Path | None = None
    power_lut: PowerLut | None = None
    power_scale: float = 1.0
    tasks: TaskSet = field(default_factory=TaskSet.reference)
    step_dt: float = 1e-6
    duration_steps: int = DEFAULT_DURATION_STEPS
    readout_interval_steps: int = 100
    abstraction_window: int = 10
    initial_temp: float | None = None
    calibration_residuals: dict | None = None

    @property
    def power_config(self) -> PowerConfig:
        return PowerConfig.for_step(self.step_dt)

    @property
    def network(self) -> ThermalNetwork:
        return build_network(self.floorplan, self.params)

    @property
    def mode(self) -> str:
        return "trace" if self.trace_path is not None else "profile"


# ---------------------------------------------------------------------------
# loading


def read_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data


def _section(data, key, cls, required=False):
    raw = data.get(key)
    if raw is None:
        if required:
            raise ConfigError(f"{key}: required")
        return None
    if not isinstance(raw, dict):
        raise ConfigError(f"{key}: must be an object")
    try:
        return cls(**raw)
    except TypeError as exc:
        raise ConfigError(f"{key}: {exc}") from None
    except DomainError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _number(data, key, default, kind=float, minimum=None):
    value = data.get(key, default)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: must be a number, got {value!r}")
    if kind is int:
        if value != int(value):
            raise ConfigError(f"{key}: must be an integer, got {value!r}")
        value = int(value)
    else:
        value = float(value)
    if not math.isfinite(value) or (minimum is not None and value < minimum):
        raise ConfigError(f"{key}: must be >= {minimum}, got {value!r}")
    return value


def load_targets(source, base: Path) -> CalibrationTargets:
    raw = read_json(base / source) if isinstance(source, str) else source
    if not isinstance(raw, dict):
        raise ConfigError("calibration.targets: must be an object or a path")
    try:
        return CalibrationTargets(**raw)
    except TypeError as exc:
        raise ConfigError(f"calibration.targets: {exc}") from None


def load_params_file(path) -> tuple[ThermalParams, PowerLevels]:
    data = read_json(path)
    params = _section(data, "thermal", ThermalParams, required=True)
    levels = _section(data, "power_levels", PowerLevels, required=True)
    return params, levels


def _thermal_setup(data, base):
    present = [k for k in ("calibration", "thermal", "params") if k in data]
    if len(present) != 1:
        raise ConfigError(
            "exactly one of 'calibration', 'thermal', 'params' must be given, found "
            f"{present or 'none'}"
        )
    residuals = None
    if "calibration" in data:
        cal = data["calibration"]
        if not isinstance(cal, dict) or "targets" not in cal:
            raise ConfigError("calibration: needs a 'targets' entry")
        targets = load_targets(cal["targets"], base)
        params, levels = calibrate(
            targets,
            g_amb_scale=_number(cal, "g_amb_scale", 0.1, minimum=0),
            tau=_number(cal, "tau", 5e-3, minimum=0),
        )
        residuals = calibration_residuals(targets, params, levels)
        override = _section(data, "power_levels", PowerLevels)
        levels = override or levels
    elif "thermal" in data:
        params = _section(data, "thermal", ThermalParams, required=True)
        levels = _section(data, "power_levels", PowerLevels, required=True)
    else:
        params, levels = load_params_file(base / data["params"])
    return params, levels, residuals


def _parse_profile(raw, n_cores) -> tuple:
    if raw and all(isinstance(x, str) for x in raw):
        raw = [{"start_step": 0, "levels": raw}]
    if not isinstance(raw, list) or not raw:
        raise ConfigError("workload.profile: must be a non-empty list")
    phases = []
    for k, phase in enumerate(raw):
        where = f"workload.profile[{k}]"
        if not isinstance(phase, dict) or "levels" not in phase:
            raise ConfigError(f"{where}: needs 'levels'")
        levels = phase["levels"]
        if not isinstance(levels, list) or len(levels) != n_cores:
            raise ConfigError(f"{where}.levels: needs one power class per core ({n_cores})")
        try:
            levels = tuple(PowerClass.parse(lv) for lv in levels)
        except DomainError as exc:
            raise ConfigError(f"{where}.levels: {exc}") from None
        phases.append(ProfilePhase(_number(phase, "start_step", 0, int, 0), levels))
    phases.sort(key=lambda p: p.start_step)
    if phases[0].start_step != 0:
        raise ConfigError("workload.profile: the first phase must start at step 0")
    if len({p.start_step for p in phases}) != len(phases):
        raise ConfigError("workload.profile: duplicate start_step")
    return tuple(phases)


def _parse_tasks(raw) -> TaskSet:
    if raw is None:
        return TaskSet.reference()
    try:
        if isinstance(raw, dict):
            unknown = set(raw) - {"low", "medium", "high"}
            if unknown:
                raise ConfigError(f"tasks: unknown classes {sorted(unknown)}")
            return TaskSet.from_counts(**{k: int(v) for k, v in raw.items()})
        if isinstance(raw, list):
            return TaskSet(tuple(Task(str(t["id"]), t["level"]) for t in raw))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"tasks: malformed entry ({exc})") from None
    except DomainError as exc:
        raise ConfigError(f"tasks: {exc}") from None
    raise ConfigError("tasks: must be an object of class counts or a list of tasks")


def load_scenario(path) -> ScenarioConfig:
    """Parse and fully validate a scenario file; calibration runs here."""
    path = Path(path)
    base = path.parent
    data = read_json(path)
    fp = _section(data, "floorplan", Floorplan) or Floorplan()
    params, levels, residuals = _thermal_setup(data, base)

    workload = data.get("workload")
    if not isinstance(workload, dict):
        raise ConfigError("workload: required object with 'profile' or 'trace'")
    modes = [k for k in ("profile", "trace") if k in workload]
    if len(modes) != 1:
        raise ConfigError(
            "workload: exactly one of 'profile' and 'trace' must be set, found "
            f"{modes or 'neither'}"
        )
    lut = None
    if data.get("power_lut") is not None:
        lut = PowerLut.load(base / data["power_lut"])
    profile, trace_path, scale = (), None, 1.0
    step_dt = _number(data, "step_dt", 1e-6, minimum=0)
    if step_dt <= 0:
        raise ConfigError("step_dt: must be > 0")
    if "profile" in workload:
        profile = _parse_profile(workload["profile"], fp.n_cores)
    else:
        if lut is None:
            raise ConfigError("workload.trace: requires 'power_lut'")
        trace_path = base / workload["trace"]
        raw_scale = workload.get("power_scale", 1.0)
        if raw_scale == "bridge":
            scale = bridge_scale(lut, levels.p_high, PowerConfig.for_step(step_dt))
        else:
            scale = _number(workload, "power_scale", 1.0, minimum=0)

    cfg = ScenarioConfig(
        floorplan=fp,
        params=params,
        levels=levels,
        profile=profile,
        trace_path=trace_path,
        power_lut=lut,
        power_scale=scale,
        tasks=_parse_tasks(data.get("tasks")),
        step_dt=step_dt,
        duration_steps=_number(data, "duration_steps", DEFAULT_DURATION_STEPS, int, 1),
        readout_interval_steps=_number(data, "readout_interval_steps", 100, int, 1),
        abstraction_window=_number(data, "abstraction_window", 10, int, 1),
        initial_temp=None if data.get("initial_temp") is None else _number(data, "initial_temp", 0.0),
        calibration_residuals=residuals,
    )
    validate(cfg)
    return cfg


def validate(cfg: ScenarioConfig) -> None:
    limit = cfg.network.dt_max
    if cfg.step_dt > limit:
        raise ConfigError(f"step_dt: {cfg.step_dt:g} s exceeds the stability limit {limit:g} s")
    if len(cfg.tasks) > cfg.floorplan.n_cores:
        raise ConfigError(f"tasks: {len(cfg.tasks)} tasks exceed {cfg.floorplan.n_cores} cores")
    if cfg.mode == "profile" and not cfg.profile:
        raise ConfigError("workload.profile: empty")


# ---------------------------------------------------------------------------
# engine


@dataclass(eq=False)
class SimOutput:
    floorplan: Floorplan
    step_dt: float
    power: np.ndarray  # (steps, cores) W
    temps: np.ndarray  # (steps, cores) degC after each step
    readouts: list = field(default_factory=list)  # (step, [TileReadout]) after that step
    abstracts: list = field(default_factory=list)  # (step, [AbstractReadout])
    energy_aj: np.ndarray | None = None  # total per core, int64

    @property
    def n_steps(self) -> int:
        return self.power.shape[0]

    def summary(self) -> dict:
        fp = self.floorplan
        if self.n_steps == 0:
            return {}
        final = self.temps[-1]
        tiles = [final[fp.tile_slice(t)] for t in range(fp.n_tiles)]
        return {
            "steps": self.n_steps,
            "tile_max_temp": [float(t.max()) for t in tiles],
            "global_max_temp": float(final.max()),
            "tile_spread": [float(t.max() - t.min()) for t in tiles],
            "energy_nj": [int(e) / AJ_PER_NJ for e in self.energy_aj],
        }


def profile_series(cfg: ScenarioConfig, n_steps: int) -> np.ndarray:
    out = np.empty((n_steps, cfg.floorplan.n_cores))
    for k, phase in enumerate(cfg.profile):
        stop = cfg.profile[k + 1].start_step if k + 1 < len(cfg.profile) else n_steps
        watts = [profile_power(lv, cfg.levels) for lv in phase.levels]
        out[phase.start_step:min(stop, n_steps)] = watts
    return out


def power_series(cfg: ScenarioConfig, n_steps: int) -> np.ndarray:
    if cfg.mode == "profile":
        return profile_series(cfg, n_steps)
    counts = load_trace_csv(cfg.trace_path, cfg.floorplan.n_cores)
    if counts.shape[0] < n_steps:
        raise ConfigError(
            f"{cfg.trace_path}: trace has {counts.shape[0]} steps, shorter than the "
            f"{n_steps}-step duration"
        )
    lut = cfg.power_lut.scaled(cfg.power_scale) if cfg.power_scale != 1.0 else cfg.power_lut
    return trace_power_series(lut, counts[:n_steps], cfg.power_config)


def run_simulation(cfg: ScenarioConfig, n_steps: int | None = None) -> SimOutput:
    n_steps = cfg.duration_steps if n_steps is None else n_steps
    if n_steps < 1:
        raise DomainError(f"step count must be >= 1, got {n_steps}")
    net = cfg.network
    fp = cfg.floorplan
    power = power_series(cfg, n_steps)
    quanta = energy_quanta(power, cfg.step_dt)
    init = None if cfg.initial_temp is None else np.full(fp.n_cores, cfg.initial_temp)
    system = MonitorSystem(net, cfg.power_config, init, history=cfg.abstraction_window)

    temps = np.empty_like(power)
    out = SimOutput(fp, cfg.step_dt, power, temps)
    interval = cfg.readout_interval_steps
    for k in range(n_steps):
        temps[k] = system.step(power[k], quanta[k])
        if (k + 1) % interval == 0:
            out.readouts.append((k, system.readout_local()))
            out.abstracts.append((k, system.readout_abstract(cfg.abstraction_window)))
    out.energy_aj = quanta.sum(axis=0, dtype=np.int64)
    return out


def steady_power(cfg: ScenarioConfig) -> np.ndarray:
    """Constant power vector of the configured workload.

    Profile mode uses the phase in force at the last step; trace mode the mean
    power over the run.
    """
    if cfg.mode == "profile":
        return profile_series(cfg, cfg.duration_steps)[-1]
    return power_series(cfg, cfg.duration_steps).mean(axis=0)


# ---------------------------------------------------------------------------
# output


def csv_lines(out: SimOutput):
    yield CSV_HEADER
    n_cores = out.power.shape[1] if out.power.ndim == 2 else 0
    dt_us = out.step_dt * 1e6
    for k in range(out.n_steps):
        time_us = f"{(k + 1) * dt_us:.6f}"
        for c in range(n_cores):
            yield f"{k},{time_us},{c},{out.power[k, c]:.6f},{out.temps[k, c]:.6f}"


def emit_csv(out: SimOutput, path) -> None:
    path = Path(path)
    try:
        with path.open("w", newline="\n", encoding="ascii") as fh:
            for line in csv_lines(out):
                fh.write(line + "\n")
    except OSError as exc:
        raise TpmonError(f"{path}: cannot write series ({exc.strerror or exc})") from None


def format_summary(out: SimOutput) -> str:
    s = out.summary()
    lines = [f"steps {s['steps']}"]
    for t, (tmax, spread) in enumerate(zip(s["tile_max_temp"], s["tile_spread"])):
        lines.append(f"tile {t} max_temp_c {tmax:.6f} spread_c {spread:.6f}")
    lines.append(f"global_max_temp_c {s['global_max_temp']:.6f}")
    for c, e in enumerate(s["energy_nj"]):
        lines.append(f"core {c} energy_nj {e:.6f}")
    return "\n".join(lines)


def params_document(params: ThermalParams, levels: PowerLevels, targets=None, residuals=None) -> dict:
    doc = {"thermal": params.to_dict(), "power_levels": levels.to_dict()}
    if targets is not None:
        doc["targets"] = targets.to_dict()
    if residuals is not None:
        doc["residuals"] = residuals
    return doc

