"""Mean-field simulator of a two-level emitter coupled to a mechanical battery and a thermal bath."""

__version__ = "0.1.0"

from .dynamics import MeanFieldState, SegmentSpec, evolve_segment, reset_tls, rhs, step_rk4
from .energetics import EnergyLedger
from .errors import (
    ConfigError,
    IntegrationBlowupError,
    LevelCrossingError,
    OptothermError,
)
from .protocols import (
    Evolve,
    Protocol,
    Reset,
    RunRecord,
    SweepResult,
    run_protocol,
)
from .units import SystemParams, UnitConversion

__all__ = [
    "ConfigError",
    "EnergyLedger",
    "Evolve",
    "IntegrationBlowupError",
    "LevelCrossingError",
    "MeanFieldState",
    "OptothermError",
    "Protocol",
    "Reset",
    "RunRecord",
    "SegmentSpec",
    "SweepResult",
    "SystemParams",
    "UnitConversion",
    "evolve_segment",
    "reset_tls",
    "rhs",
    "run_protocol",
    "step_rk4",
]
