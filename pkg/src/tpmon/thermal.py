"""Lumped thermal RC network with one node per core.

Each core node has a conductance ``g_amb`` to ambient, a capacitance ``cap``,
and lateral conductances to its adjacent cores. In matrix form the heat
balance is ``cap * dT/dt = P + b - A @ T`` with ``b = g_amb * t_amb``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import CalibrationError, DomainError, StabilityError
from .topology import Floorplan, edges

STABILITY_SAFETY = 0.5
CALIBRATION_TOLERANCE = 0.05  # degC, per target


@dataclass(frozen=True)
class ThermalParams:
    g_amb: float  # W/degC, core -> ambient
    g_lat: float  # W/degC, adjacent cores in one tile
    cap: float  # J/degC
    t_amb: float  # degC
    g_tile: float = 0.0  # W/degC, adjacent cores across a tile boundary

    def __post_init__(self):
        if not self.g_amb > 0:
            raise DomainError(f"g_amb must be > 0, got {self.g_amb}")
        if not self.g_lat >= 0:
            raise DomainError(f"g_lat must be >= 0, got {self.g_lat}")
        if not self.g_tile >= 0:
            raise DomainError(f"g_tile must be >= 0, got {self.g_tile}")
        if not self.cap > 0:
            raise DomainError(f"cap must be > 0, got {self.cap}")
        if not math.isfinite(self.t_amb):
            raise DomainError(f"t_amb must be finite, got {self.t_amb}")

    @property
    def tau(self) -> float:
        """Node time constant cap / g_amb, in seconds."""
        return self.cap / self.g_amb

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class PowerLevels:
    """Steady power of a core running a task of each power class, in W."""

    p_low: float
    p_med: float
    p_high: float
    p_idle: float = 0.0

    def __post_init__(self):
        if not 0 <= self.p_low <= self.p_med <= self.p_high:
            raise DomainError(
                "power levels must satisfy 0 <= p_low <= p_med <= p_high, got "
                f"{self.p_low}, {self.p_med}, {self.p_high}"
            )
        if not self.p_idle >= 0:
            raise DomainError(f"p_idle must be >= 0, got {self.p_idle}")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True, eq=False)
class ThermalNetwork:
    floorplan: Floorplan
    A: np.ndarray
    cap_vec: np.ndarray
    b: np.ndarray
    t_amb: float
    dt_max: float = field(init=False)

    def __post_init__(self):
        for name in ("A", "cap_vec", "b"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.floorplan.n_cores
        if self.A.shape != (n, n) or self.cap_vec.shape != (n,) or self.b.shape != (n,):
            raise DomainError("network arrays do not match the floorplan core count")
        limit = STABILITY_SAFETY * float(np.min(2.0 * self.cap_vec / np.diag(self.A)))
        object.__setattr__(self, "dt_max", limit)

    @property
    def n(self) -> int:
        return self.floorplan.n_cores

    @property
    def g_amb(self) -> np.ndarray:
        # row sums of A are exactly the ambient conductances
        return self.A.sum(axis=1)


def build_network(fp: Floorplan, params: ThermalParams) -> ThermalNetwork:
    n = fp.n_cores
    A = np.zeros((n, n))
    per_tile = fp.cores_per_tile
    for i, j in edges(fp):
        g = params.g_lat if i // per_tile == j // per_tile else params.g_tile
        A[i, j] -= g
        A[j, i] -= g
        A[i, i] += g
        A[j, j] += g
    A[np.diag_indices(n)] += params.g_amb
    return ThermalNetwork(
        floorplan=fp,
        A=A,
        cap_vec=np.full(n, params.cap),
        b=np.full(n, params.g_amb * params.t_amb),
        t_amb=params.t_amb,
    )


def _power_vector(net: ThermalNetwork, power) -> np.ndarray:
    p = np.asarray(power, dtype=float)
    if p.shape != (net.n,):
        raise DomainError(f"power vector needs {net.n} entries, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise DomainError("power vector has non-finite entries")
    return p


def steady_state(net: ThermalNetwork, power) -> np.ndarray:
    """Equilibrium temperatures solving ``A @ T = P + b``."""
    p = _power_vector(net, power)
    if np.any(p < 0):
        raise DomainError("steady_state expects nonnegative power")
    rhs = p + net.b
    T = np.linalg.solve(net.A, rhs)
    residual = np.max(np.abs(net.A @ T - rhs))
    scale = max(1.0, float(np.max(np.abs(rhs))))
    if not residual <= 1e-9 * scale:
        raise np.linalg.LinAlgError(f"steady-state residual {residual:.3e} exceeds tolerance")
    return T


def stability_limit(net: ThermalNetwork) -> float:
    """Largest accepted explicit-Euler step, ``0.5 * min(2 cap_i / A_ii)``."""
    return net.dt_max


def transient_step(net: ThermalNetwork, T, power, dt: float) -> np.ndarray:
    """One explicit-Euler step of the RC network."""
    if not 0 < dt <= net.dt_max:
        raise StabilityError(f"dt={dt:g} s outside (0, {net.dt_max:g}] s stability range")
    p = _power_vector(net, power)
    T = np.asarray(T, dtype=float)
    if T.shape != (net.n,):
        raise DomainError(f"temperature vector needs {net.n} entries, got shape {T.shape}")
    return T + (dt / net.cap_vec) * (p - net.A @ T + net.b)


# ---------------------------------------------------------------------------
# calibration against published single-tile temperatures


@dataclass(frozen=True)
class CalibrationTargets:
    t_single_medium: float  # lone medium core, rest of tile idle
    t_medium_high_neighbors: float  # that medium core with 3 high tile-mates
    t_mixed_max: float  # hottest core, 2 high (diagonal) + 2 low
    t_all_high: float
    t_all_low: float

    def __post_init__(self):
        if not self.t_all_high > self.t_all_low:
            raise CalibrationError(
                f"t_all_high ({self.t_all_high}) must exceed t_all_low ({self.t_all_low})"
            )
        if not self.t_medium_high_neighbors > self.t_single_medium:
            raise CalibrationError(
                "t_medium_high_neighbors must exceed t_single_medium, got "
                f"{self.t_medium_high_neighbors} <= {self.t_single_medium}"
            )

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


REFERENCE_TARGETS = dict(
    t_single_medium=47.0,
    t_medium_high_neighbors=53.0,
    t_mixed_max=51.0,
    t_all_high=54.0,
    t_all_low=47.0,
)

TARGET_NAMES = tuple(REFERENCE_TARGETS)

# Per-core power classes of the five calibration tiles (flat order in a 2x2
# grid: 0 1 / 2 3), plus the core whose temperature is the target.
CALIBRATION_TILES = {
    "t_single_medium": (("med", "idle", "idle", "idle"), 0),
    "t_medium_high_neighbors": (("med", "high", "high", "high"), 0),
    "t_mixed_max": (("high", "low", "low", "high"), None),
    "t_all_high": (("high",) * 4, None),
    "t_all_low": (("low",) * 4, None),
}


def calibration_temperatures(params: ThermalParams, levels: PowerLevels) -> dict:
    """Steady temperatures of the five calibration tiles on one 2x2 tile.

    The value is the target core's temperature, or the tile maximum when no
    core is singled out.
    """
    net = build_network(Floorplan(n_tiles=1), params)
    watts = {"idle": levels.p_idle, "low": levels.p_low, "med": levels.p_med, "high": levels.p_high}
    out = {}
    for name, (classes, core) in CALIBRATION_TILES.items():
        T = steady_state(net, [watts[c] for c in classes])
        out[name] = float(T[core]) if core is not None else float(T.max())
    return out


def calibration_residuals(targets: CalibrationTargets, params: ThermalParams, levels: PowerLevels) -> dict:
    model = calibration_temperatures(params, levels)
    return {name: model[name] - getattr(targets, name) for name in TARGET_NAMES}


def _single_core_self_response(r: float) -> float:
    # Diagonal of the inverse of (1+2r)I - r*C4 for a 4-cycle C4, which has
    # eigenvalues 1, 1+2r, 1+2r, 1+4r; the diagonal is their mean inverse.
    return 0.25 * (1.0 + 2.0 / (1.0 + 2.0 * r) + 1.0 / (1.0 + 4.0 * r))


def calibrate(targets: CalibrationTargets, g_amb_scale: float = 0.1, tau: float = 5e-3):
    """Fit (ThermalParams, PowerLevels) reproducing all five targets on a 2x2 tile.

    Temperatures fix only ratios P/g_amb and g_lat/g_amb; ``g_amb_scale`` sets
    the absolute conductance and ``tau`` the time constant (cap = g_amb * tau).
    Raises CalibrationError when no physical solution exists.
    """
    if not g_amb_scale > 0:
        raise DomainError(f"g_amb_scale must be > 0, got {g_amb_scale}")
    if not tau > 0:
        raise DomainError(f"tau must be > 0, got {tau}")
    nan = {name: math.nan for name in TARGET_NAMES}

    # mixed tile: max + min = (pH + pL)/g + 2 t_amb and uniform tiles give
    # pH/g + t_amb = t_all_high, pL/g + t_amb = t_all_low
    t_mixed_min = targets.t_all_high + targets.t_all_low - targets.t_mixed_max
    spread = targets.t_mixed_max - t_mixed_min
    if not spread > 0:
        raise CalibrationError(
            f"mixed-tile spread {spread:g} degC must be positive to fix lateral coupling", nan
        )
    r = ((targets.t_all_high - targets.t_all_low) / spread - 1.0) / 4.0
    if not r >= 0:
        raise CalibrationError(f"lateral/ambient conductance ratio {r:g} is negative", nan)

    # medium core: alone it sees G00*pM/g; with high mates it adds (1-G00)*pH/g
    g00 = _single_core_self_response(r)
    t_amb = targets.t_all_high - (targets.t_medium_high_neighbors - targets.t_single_medium) / (1.0 - g00)
    p_high = (targets.t_all_high - t_amb) * g_amb_scale
    p_low = (targets.t_all_low - t_amb) * g_amb_scale
    p_med = (targets.t_single_medium - t_amb) / g00 * g_amb_scale

    if not 0 <= p_low <= p_med <= p_high:
        raise CalibrationError(
            f"derived powers violate 0 <= low <= med <= high: {p_low:g}, {p_med:g}, {p_high:g} W", nan
        )
    params = ThermalParams(
        g_amb=g_amb_scale, g_lat=r * g_amb_scale, cap=g_amb_scale * tau, t_amb=t_amb
    )
    levels = PowerLevels(p_low=p_low, p_med=p_med, p_high=p_high)
    residuals = calibration_residuals(targets, params, levels)
    worst = max(abs(v) for v in residuals.values())
    if worst > CALIBRATION_TOLERANCE:
        raise CalibrationError(
            f"calibrated model misses targets by up to {worst:.4f} degC", residuals
        )
    return params, levels
