"""Named parameter sets for the standard experiments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .units import SystemParams

# emission rate used for SI reporting when none is given: a few GHz
DEFAULT_GAMMA_SI = 1e9


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    params: SystemParams
    protocol: str
    options: dict = field(default_factory=dict)
    gamma_si: float = DEFAULT_GAMMA_SI


# nu0/gamma = 1e4, gm/gamma = 0.1, nu0/kT = 10, beta(0) = 1e3
_FIG3 = SystemParams(nu0=1e4, gm=0.1, omega=1e-3, temperature=1e3)

_PRESETS = {
    "fig3a": Preset(
        "fig3a", "one mechanical period with the bath on, quasi-static by default",
        _FIG3, "isothermal", {"beta0": 1e3, "periods": 1.0, "omega_values": [1e-3, 1e-2, 1e-1, 1.0]}),
    "fig3b": Preset(
        "fig3b", "work during the erasure half-period against reversible and quench bounds",
        _FIG3, "erasure", {"beta0": 1e3, "omega_values": [1e-3, 1e-2, 1e-1, 1.0]}),
    "fig3c": Preset(
        "fig3c", "half-period work over reversible work as a function of Omega",
        _FIG3, "reversibility", {"beta0": 1e3, "omega_grid": "log:1e-3:1:20"}),
    # gm/gamma = 20, nu0/gamma = 5e3, Omega/gamma = 1e-3; temperatures are a free choice
    # and beta0 above ~115 drives nu0 + delta through zero for these values
    "fig3d": Preset(
        "fig3d", "heat vs erased information at three temperatures (Clausius equality)",
        SystemParams(nu0=5e3, gm=20.0, omega=1e-3, temperature=50.0), "clausius",
        {"beta0_grid": "lin:100:114:8", "temperatures": [40.0, 50.0, 60.0]}),
    # quantum dot in a nanowire: gamma ~ 1 ns^-1, Omega/2pi ~ 530 kHz, gm/2pi ~ 550 kHz,
    # optical transition ~ 2pi x 330 THz; order-of-magnitude values only
    "otto": Preset(
        "otto", "Otto engine with literature-scale quantum-dot/nanowire parameters",
        SystemParams(nu0=2.0 * math.pi * 3.3e14 / 1e9, gm=2.0 * math.pi * 5.5e5 / 1e9,
                     omega=2.0 * math.pi * 5.3e5 / 1e9, temperature=0.0),
        "otto", {"x_m": 0.0, "iterations": 100}, gamma_si=1e9),
}


def get_preset(name: str) -> Preset:
    try:
        return _PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(_PRESETS)}") from None


def preset_names() -> list:
    return sorted(_PRESETS)


def parse_grid(text) -> np.ndarray:
    """Grid from 'log:start:stop:n', 'lin:start:stop:n' or a comma list."""
    if isinstance(text, (list, tuple, np.ndarray)):
        return np.asarray(text, dtype=float)
    try:
        if text.startswith(("log:", "lin:")):
            kind, a, b, n = text.split(":")
            a, b, n = float(a), float(b), int(n)
            if n < 1:
                raise ValueError
            if kind == "log":
                if a <= 0 or b <= 0:
                    raise ValueError
                return np.logspace(math.log10(a), math.log10(b), n)
            return np.linspace(a, b, n)
        return np.array([float(x) for x in text.split(",") if x.strip()])
    except ValueError:
        raise ConfigError(f"cannot parse grid {text!r}") from None
