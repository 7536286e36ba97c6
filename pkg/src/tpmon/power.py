"""Instruction-level energy model.

A :class:`PowerLut` stores the average energy of one executed instruction of
each class. Per monitor step, a core's energy is the count-weighted sum of
LUT entries plus static power over the step; cycles without a counted
instruction cost static power only.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, TraceValidationError
from .thermal import PowerLevels

NJ_PER_J = 1e9


class InstructionClass(Enum):
    LD = "ld"
    ST = "st"
    ALU = "alu"
    BRANCH = "branch"
    MUL = "mul"
    DIV = "div"
    FPU = "fpu"
    NOP = "nop"


CLASSES = tuple(InstructionClass)
TRACE_HEADER = ("step", "core") + tuple(c.value for c in CLASSES)


class PowerClass(Enum):
    IDLE = "idle"
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"

    @classmethod
    def parse(cls, value) -> "PowerClass":
        if isinstance(value, cls):
            return value
        aliases = {"med": "medium", "lowest": "low", "highest": "high"}
        try:
            return cls(aliases.get(value, value))
        except ValueError:
            names = ", ".join(c.value for c in cls)
            raise DomainError(f"unknown power class {value!r}; expected one of {names}") from None


@dataclass(frozen=True)
class PowerConfig:
    step_dt: float = 1e-6
    cycles_per_step: int = 400
    core_clock_hz: float = 4e8

    def __post_init__(self):
        if not self.step_dt > 0:
            raise DomainError(f"step_dt must be > 0, got {self.step_dt}")
        if self.cycles_per_step != round(self.step_dt * self.core_clock_hz):
            raise DomainError(
                f"cycles_per_step={self.cycles_per_step} inconsistent with "
                f"step_dt*core_clock_hz={self.step_dt * self.core_clock_hz:g}"
            )

    @classmethod
    def for_step(cls, step_dt: float, core_clock_hz: float = 4e8) -> "PowerConfig":
        return cls(step_dt=step_dt, cycles_per_step=round(step_dt * core_clock_hz), core_clock_hz=core_clock_hz)


def snap(value: float, quantum: float) -> float:
    """Round ``value`` to the nearest multiple of ``quantum``, ties upward."""
    if quantum <= 0:
        return value
    return math.floor(value / quantum + 0.5) * quantum


@dataclass(frozen=True)
class PowerLut:
    energies: dict  # InstructionClass -> nJ per instruction
    static_power: float = 0.0  # W
    quantum: float = 0.0  # nJ, 0 disables fixed-point snapping
    _vector: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        table = {}
        for key, value in self.energies.items():
            cls = key if isinstance(key, InstructionClass) else _parse_class(key)
            table[cls] = float(value)
        missing = [c.value for c in CLASSES if c not in table]
        if missing:
            raise DomainError(f"LUT lacks entries for {', '.join(missing)}")
        if not self.quantum >= 0:
            raise DomainError(f"quantum must be >= 0, got {self.quantum}")
        if not self.static_power >= 0:
            raise DomainError(f"static_power must be >= 0, got {self.static_power}")
        for cls, value in table.items():
            if not (value >= 0 and math.isfinite(value)):
                raise DomainError(f"energy for {cls.value} must be finite and >= 0, got {value}")
        snapped = {c: snap(table[c], self.quantum) for c in CLASSES}
        object.__setattr__(self, "energies", snapped)
        vec = np.array([snapped[c] for c in CLASSES])
        vec.setflags(write=False)
        object.__setattr__(self, "_vector", vec)

    @property
    def vector(self) -> np.ndarray:
        """Energies in enumeration order, nJ."""
        return self._vector

    def scaled(self, k: float) -> "PowerLut":
        if not k >= 0:
            raise DomainError(f"scale must be >= 0, got {k}")
        return PowerLut(
            {c: e * k for c, e in self.energies.items()}, self.static_power * k, self.quantum * k
        )

    @classmethod
    def from_dict(cls, data: dict) -> "PowerLut":
        try:
            energies = data["energy_nJ"]
        except (KeyError, TypeError):
            raise ConfigError("LUT file needs an 'energy_nJ' object mapping class -> nJ") from None
        return cls(
            energies=energies,
            static_power=float(data.get("static_power_w", 0.0)),
            quantum=float(data.get("quantum_nJ", 0.0)),
        )

    @classmethod
    def load(cls, path) -> "PowerLut":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except OSError as exc:
            raise ConfigError(f"{path}: {exc.strerror or exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {
            "energy_nJ": {c.value: self.energies[c] for c in CLASSES},
            "static_power_w": self.static_power,
            "quantum_nJ": self.quantum,
        }


def _parse_class(key) -> InstructionClass:
    try:
        return InstructionClass(key)
    except ValueError:
        raise DomainError(f"unknown instruction class {key!r}") from None


def lut_lookup(lut: PowerLut, c: InstructionClass) -> float:
    return lut.energies[c]


def _counts_vector(counts) -> np.ndarray:
    if isinstance(counts, dict):
        vec = [0] * len(CLASSES)
        for key, value in counts.items():
            cls = key if isinstance(key, InstructionClass) else _parse_class(key)
            vec[CLASSES.index(cls)] = value
        counts = vec
    arr = np.asarray(counts)
    if arr.shape != (len(CLASSES),):
        raise TraceValidationError(f"expected {len(CLASSES)} instruction counts, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.round(arr)):
            raise TraceValidationError("instruction counts must be integers")
        arr = arr.astype(np.int64)
    return arr


def accumulate_step(lut: PowerLut, counts, cfg: PowerConfig = PowerConfig()) -> tuple[float, float]:
    """Energy (nJ) and average power (W) of one core over one monitor step.

    ``counts`` is a mapping of class -> count or a sequence in enumeration order.
    """
    arr = _counts_vector(counts)
    if np.any(arr < 0):
        raise TraceValidationError("instruction counts must be >= 0")
    total = int(arr.sum())
    if total > cfg.cycles_per_step:
        raise TraceValidationError(
            f"{total} instructions exceed {cfg.cycles_per_step} cycles in one step"
        )
    energy = 0.0
    for n, e in zip(arr.tolist(), lut.vector.tolist()):
        energy = energy + n * e
    energy = energy + lut.static_power * cfg.step_dt * NJ_PER_J
    return energy, energy / (cfg.step_dt * NJ_PER_J)


def trace_power_series(lut: PowerLut, trace, cfg: PowerConfig = PowerConfig()) -> np.ndarray:
    """Per-step, per-core average power in W for a ``(steps, cores, classes)`` count array.

    Sums in the same class order as :func:`accumulate_step`, so each entry is
    bit-identical to the scalar computation.
    """
    counts = np.asarray(trace)
    if counts.ndim != 3 or counts.shape[2] != len(CLASSES):
        raise TraceValidationError(
            f"trace must have shape (steps, cores, {len(CLASSES)}), got {counts.shape}"
        )
    bad = np.argwhere(counts < 0)
    if bad.size:
        step, core, _ = bad[0]
        raise TraceValidationError(f"step {step}, core {core}: negative instruction count")
    totals = counts.sum(axis=2)
    over = np.argwhere(totals > cfg.cycles_per_step)
    if over.size:
        step, core = over[0]
        raise TraceValidationError(
            f"step {step}, core {core}: {totals[step, core]} instructions exceed "
            f"{cfg.cycles_per_step} cycles"
        )
    energy = np.zeros(counts.shape[:2])
    for k, e in enumerate(lut.vector.tolist()):
        energy = energy + counts[:, :, k] * e
    energy = energy + lut.static_power * cfg.step_dt * NJ_PER_J
    return energy / (cfg.step_dt * NJ_PER_J)


def profile_power(level, levels: PowerLevels) -> float:
    level = PowerClass.parse(level)
    return {
        PowerClass.IDLE: levels.p_idle,
        PowerClass.LOW: levels.p_low,
        PowerClass.MEDIUM: levels.p_med,
        PowerClass.HIGH: levels.p_high,
    }[level]


# Synthetic per-step instruction mixes (400-cycle step) used to drive traces.
# Fixture data, not measured LEON3 figures.
REFERENCE_MIXES = {
    PowerClass.IDLE: {},
    PowerClass.LOW: {"ld": 20, "st": 10, "alu": 40, "branch": 20, "nop": 200},
    PowerClass.MEDIUM: {"ld": 60, "st": 30, "alu": 150, "branch": 40, "mul": 20, "nop": 40},
    PowerClass.HIGH: {"ld": 80, "st": 40, "alu": 140, "branch": 30, "mul": 40, "div": 10, "fpu": 60},
}


def reference_trace(levels_per_core, n_steps: int) -> np.ndarray:
    """Count array replaying each core's reference mix for ``n_steps`` steps."""
    rows = [_counts_vector(REFERENCE_MIXES[PowerClass.parse(lv)]) for lv in levels_per_core]
    one_step = np.stack(rows) if rows else np.zeros((0, len(CLASSES)), dtype=np.int64)
    return np.broadcast_to(one_step, (n_steps,) + one_step.shape).copy()


def bridge_scale(lut: PowerLut, p_high: float, cfg: PowerConfig = PowerConfig()) -> float:
    """Factor that makes the reference high-power mix draw exactly ``p_high`` W."""
    _, unscaled = accumulate_step(lut, REFERENCE_MIXES[PowerClass.HIGH], cfg)
    if not unscaled > 0:
        raise DomainError("reference high mix draws no power under this LUT")
    return p_high / unscaled


def load_trace_csv(path, n_cores: int) -> np.ndarray:
    """Read a trace CSV into a ``(steps, n_cores, classes)`` int array.

    Missing (step, core) rows are all-zero; the step count is the largest
    step index plus one.
    """
    path = Path(path)
    rows = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TRACE_HEADER:
            raise ConfigError(f"{path}: header must be {','.join(TRACE_HEADER)}")
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(TRACE_HEADER):
                raise ConfigError(f"{path}: line {lineno}: expected {len(TRACE_HEADER)} fields")
            try:
                values = [int(v) for v in rec]
            except ValueError:
                raise ConfigError(f"{path}: line {lineno}: non-integer field") from None
            step, core = values[0], values[1]
            if step < 0 or not 0 <= core < n_cores:
                raise ConfigError(f"{path}: line {lineno}: step/core ({step}, {core}) out of range")
            if (step, core) in rows:
                raise ConfigError(f"{path}: line {lineno}: duplicate row for step {step}, core {core}")
            rows[(step, core)] = values[2:]
    n_steps = 1 + max((s for s, _ in rows), default=-1)
    out = np.zeros((n_steps, n_cores, len(CLASSES)), dtype=np.int64)
    for (step, core), counts in rows.items():
        out[step, core] = counts
    return out


def write_trace_csv(trace, path) -> None:
    """Write a count array as trace CSV, omitting all-zero rows."""
    counts = np.asarray(trace)
    with Path(path).open("w", newline="") as fh:
        fh.write(",".join(TRACE_HEADER) + "\n")
        for step in range(counts.shape[0]):
            for core in range(counts.shape[1]):
                row = counts[step, core]
                # the final step is always written so trailing idle steps keep the length
                if row.any() or (step == counts.shape[0] - 1 and core == counts.shape[1] - 1):
                    fh.write(",".join(str(int(v)) for v in (step, core, *row)) + "\n")
