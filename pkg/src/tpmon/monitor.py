"""Per-tile temperature and power monitor (TPMon).

Each tile carries one power accumulator per core and a single temperature
monitor exposing the per-core temperatures of the tile. Energy accumulators
are integer counters of attojoules, like a fixed-point hardware register, so
read-and-clear never loses or invents energy: the sum of all readouts equals
the sum of all ticks exactly.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ReadoutError, StabilityError
from .power import PowerConfig
from .thermal import ThermalNetwork

AJ_PER_J = 10**18
AJ_PER_NJ = 10**9


def energy_quanta(power, dt: float) -> np.ndarray:
    """Energy of ``power`` W held for ``dt`` s, as int64 attojoules."""
    return np.rint(np.asarray(power, dtype=float) * (dt * AJ_PER_J)).astype(np.int64)


@dataclass(frozen=True, eq=False)
class TileReadout:
    tile: int
    energy_aj: np.ndarray  # int64 per core
    temps: np.ndarray  # degC per core
    first_step: int  # first tick covered (0-based)
    n_steps: int
    step_dt: float

    @property
    def energy_nj(self) -> np.ndarray:
        return self.energy_aj / AJ_PER_NJ

    @property
    def covered_time(self) -> float:
        return self.n_steps * self.step_dt

    @property
    def mean_power(self) -> np.ndarray:
        return self.energy_aj / AJ_PER_J / self.covered_time

    @property
    def last_step(self) -> int:
        return self.first_step + self.n_steps - 1


@dataclass(frozen=True)
class AbstractReadout:
    tile: int
    max_temp: float
    mean_power: float  # mean tile total power over the window, W
    window: int


class Tpmon:
    """Monitor state of one tile.

    The monitor does not integrate temperatures itself: the system steps the
    full thermal network once and hands each tile its slice via :meth:`tick`.
    """

    def __init__(self, tile: int, n_cores: int, initial_temps, step_dt: float, history: int = 10):
        if history < 1:
            raise DomainError(f"history length must be >= 1, got {history}")
        self.tile = tile
        self.n_cores = n_cores
        self.step_dt = step_dt
        self.energy_acc = np.zeros(n_cores, dtype=np.int64)
        self.last_power = np.zeros(n_cores)
        self.temps = np.array(initial_temps, dtype=float)
        if self.temps.shape != (n_cores,):
            raise DomainError(f"tile {tile}: need {n_cores} initial temperatures")
        self.step_count = 0
        self.history = deque(maxlen=history)
        self._window_start = 0

    def tick(self, power, temps, quanta=None) -> None:
        power = np.asarray(power, dtype=float)
        if power.shape != (self.n_cores,) or np.shape(temps) != (self.n_cores,):
            raise DomainError(
                f"tile {self.tile}: expected {self.n_cores} power and temperature entries"
            )
        if quanta is None:
            quanta = energy_quanta(power, self.step_dt)
        self.energy_acc += quanta
        self.last_power = power
        self.temps = np.array(temps, dtype=float)
        self.step_count += 1

    def readout_local(self) -> TileReadout:
        """Read-and-clear the accumulators; temperatures persist."""
        span = self.step_count - self._window_start
        if span <= 0:
            raise ReadoutError(f"tile {self.tile}: no ticks since the last readout")
        out = TileReadout(
            tile=self.tile,
            energy_aj=self.energy_acc.copy(),
            temps=self.temps.copy(),
            first_step=self._window_start,
            n_steps=span,
            step_dt=self.step_dt,
        )
        self.energy_acc[:] = 0
        self._window_start = self.step_count
        self.history.append(out)
        return out

    def readout_abstract(self, window: int = 10) -> AbstractReadout:
        if window < 1:
            raise DomainError(f"window must be >= 1, got {window}")
        if not self.history:
            raise ReadoutError(f"tile {self.tile}: no readouts to abstract")
        recent = list(self.history)[-window:]
        return AbstractReadout(
            tile=self.tile,
            max_temp=max(float(r.temps.max()) for r in recent),
            mean_power=float(np.mean([r.mean_power.sum() for r in recent])),
            window=len(recent),
        )


class MonitorSystem:
    """The whole chip: global thermal state plus one Tpmon per tile."""

    def __init__(self, net: ThermalNetwork, cfg: PowerConfig = PowerConfig(), initial_temps=None,
                 history: int = 10):
        if cfg.step_dt > net.dt_max:
            raise StabilityError(
                f"step_dt={cfg.step_dt:g} s exceeds stability limit {net.dt_max:g} s"
            )
        self.net = net
        self.cfg = cfg
        fp = net.floorplan
        if initial_temps is None:
            initial_temps = np.full(fp.n_cores, net.t_amb)
        self.temps = np.array(initial_temps, dtype=float)
        if self.temps.shape != (fp.n_cores,):
            raise DomainError(f"need {fp.n_cores} initial temperatures")
        self.slices = [fp.tile_slice(t) for t in range(fp.n_tiles)]
        self.tiles = [
            Tpmon(t, fp.cores_per_tile, self.temps[s], cfg.step_dt, history)
            for t, s in enumerate(self.slices)
        ]
        self._gain = cfg.step_dt / net.cap_vec
        self.step_count = 0

    def step(self, power, quanta=None) -> np.ndarray:
        """Advance one monitor step with per-core ``power`` (W); returns new temperatures."""
        net = self.net
        power = np.asarray(power, dtype=float)
        if power.shape != (net.n,):
            raise DomainError(f"power vector needs {net.n} entries, got shape {power.shape}")
        # same arithmetic as thermal.transient_step; the dt guard ran in __init__
        self.temps = self.temps + self._gain * (power - net.A @ self.temps + net.b)
        if quanta is None:
            quanta = energy_quanta(power, self.cfg.step_dt)
        for mon, s in zip(self.tiles, self.slices):
            mon.tick(power[s], self.temps[s], quanta[s])
        self.step_count += 1
        return self.temps

    def readout_local(self) -> list[TileReadout]:
        return [mon.readout_local() for mon in self.tiles]

    def readout_abstract(self, window: int = 10) -> list[AbstractReadout]:
        return [mon.readout_abstract(window) for mon in self.tiles]
