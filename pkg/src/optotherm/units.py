"""Dimensionless unit system and device parameters.

Internal units: hbar = k_B = 1 and the spontaneous emission rate gamma = 1.
Every frequency is an angular frequency expressed in units of gamma, energies
are in units of hbar*gamma and times in units of 1/gamma. SI values only
appear at the CLI boundary through :class:`UnitConversion`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

from scipy.constants import hbar, k as k_boltzmann

from .errors import DegenerateParameterError, DomainError

# ratio used to decide when "a >> b" holds for the regime flags
STRONG_INEQUALITY = 10.0


class RegimeWarning(UserWarning):
    """Parameters leave the regime where the mean-field model is trustworthy."""


@dataclass(frozen=True)
class SystemParams:
    nu0: float
    gm: float
    omega: float
    temperature: float = 0.0
    gamma: float = 1.0
    bath_exponent: int = 0

    def __post_init__(self):
        for name in ("nu0", "gm", "omega", "temperature", "gamma"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise DomainError(f"{name} must be finite, got {value!r}")
        if self.nu0 <= 0:
            raise DomainError(f"nu0 must be positive, got {self.nu0}")
        if self.omega <= 0:
            raise DegenerateParameterError(f"omega must be positive, got {self.omega}")
        if self.gamma != 1.0:
            raise DomainError("gamma is the unit of frequency and must equal 1")
        if self.temperature < 0:
            raise DomainError(f"temperature must be >= 0, got {self.temperature}")
        if int(self.bath_exponent) != self.bath_exponent:
            raise DomainError("bath_exponent must be an integer")

    @property
    def is_dispersive(self) -> bool:
        """nu0 >> |gm| >= omega."""
        return self.nu0 >= STRONG_INEQUALITY * abs(self.gm) and abs(self.gm) >= self.omega

    @property
    def is_semiclassical(self) -> bool:
        """gamma >> |gm|, needed for the factorized mean-field ansatz."""
        return self.gamma >= STRONG_INEQUALITY * abs(self.gm)

    def regime_violations(self) -> list[str]:
        out = []
        if not self.is_dispersive:
            out.append(
                f"not dispersive: need nu0 >> |gm| >= omega "
                f"(nu0={self.nu0:g}, gm={self.gm:g}, omega={self.omega:g})"
            )
        if not self.is_semiclassical:
            out.append(f"not semiclassical: need gamma >> |gm| (gm={self.gm:g})")
        return out

    def warn_regime(self, stacklevel: int = 2) -> None:
        for msg in self.regime_violations():
            warnings.warn(msg, RegimeWarning, stacklevel=stacklevel + 1)

    def replace(self, **changes) -> "SystemParams":
        data = asdict(self)
        data.update(changes)
        return SystemParams(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SystemParams":
        known = {"nu0", "gm", "omega", "temperature", "gamma", "bath_exponent"}
        unknown = set(data) - known
        if unknown:
            raise DomainError(f"unknown parameter(s): {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class UnitConversion:
    """Multiplicative conversions between internal units and SI.

    ``gamma_si`` is the emission rate in s^-1 (an angular rate, matching the
    angular-frequency convention used internally).
    """

    gamma_si: float

    def __post_init__(self):
        if not self.gamma_si > 0:
            raise DomainError(f"gamma_si must be positive, got {self.gamma_si}")

    def time_to_si(self, t):
        return t / self.gamma_si

    def time_from_si(self, t_s):
        return t_s * self.gamma_si

    def frequency_to_si(self, nu):
        """Angular frequency in rad/s."""
        return nu * self.gamma_si

    def frequency_from_si(self, w_rad_s):
        return w_rad_s / self.gamma_si

    def energy_to_si(self, e):
        return e * hbar * self.gamma_si

    def energy_from_si(self, e_joule):
        return e_joule / (hbar * self.gamma_si)

    def power_to_si(self, p):
        return p * hbar * self.gamma_si**2

    def power_from_si(self, p_watt):
        return p_watt / (hbar * self.gamma_si**2)

    def temperature_to_kelvin(self, temperature):
        return self.energy_to_si(temperature) / k_boltzmann

    def temperature_from_kelvin(self, kelvin):
        return self.energy_from_si(kelvin * k_boltzmann)


def mechanical_displacement(beta: complex) -> float:
    """Mean deflection x/x0 = 2 Re(beta)."""
    return 2.0 * complex(beta).real


def displaced_rest_position(params: SystemParams) -> float:
    """Rest position x/x0 of the oscillator while the TLS is excited."""
    if params.omega == 0:
        raise DegenerateParameterError("omega = 0 has no rest position")
    return -2.0 * params.gm / params.omega
