"""Software emulation of a tile-level temperature and power monitor for MPSoCs."""

from .alloc import (
    ControlTarget,
    MappingScore,
    Task,
    TaskSet,
    evaluate_mapping,
    exhaustive_allocate,
    greedy_allocate,
)
from .errors import (
    CalibrationError,
    ConfigError,
    DomainError,
    ReadoutError,
    StabilityError,
    TpmonError,
    TraceValidationError,
)
from .monitor import AbstractReadout, MonitorSystem, TileReadout, Tpmon
from .power import (
    InstructionClass,
    PowerClass,
    PowerConfig,
    PowerLut,
    accumulate_step,
    lut_lookup,
    profile_power,
    trace_power_series,
)
from .scenario import ScenarioConfig, SimOutput, emit_csv, load_scenario, run_simulation
from .thermal import (
    REFERENCE_TARGETS,
    CalibrationTargets,
    PowerLevels,
    ThermalNetwork,
    ThermalParams,
    build_network,
    calibrate,
    stability_limit,
    steady_state,
    transient_step,
)
from .topology import CoreId, Floorplan, neighbors

__version__ = "0.1.0"
