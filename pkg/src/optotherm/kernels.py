"""Stateless physical functions: occupations, populations, rates, entropy."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import DomainError, LevelCrossingError

LN2 = math.log(2.0)


class BathRates(NamedTuple):
    gamma_t: float
    nbar_t: float


def bose_occupation(nu: float, temperature: float) -> float:
    """Thermal photon number 1/(exp(nu/T) - 1); zero at T = 0."""
    if not nu > 0:
        raise DomainError(f"bose_occupation needs nu > 0, got {nu}")
    if temperature < 0:
        raise DomainError(f"temperature must be >= 0, got {temperature}")
    if temperature == 0:
        return 0.0
    x = nu / temperature
    # exp(-x)/(1-exp(-x)) never overflows
    return math.exp(-x) / -math.expm1(-x)


def fermi_population(energy, temperature):
    """Equilibrium upper-level population exp(-E/T)/(1+exp(-E/T)).

    Accepts scalars or arrays. At T = 0 this is a step: 0 above, 1/2 at and
    1 below E = 0.
    """
    if np.any(np.asarray(temperature) < 0):
        raise DomainError("temperature must be >= 0")
    e = np.asarray(energy, dtype=float)
    t = np.asarray(temperature, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(t > 0, e / np.where(t > 0, t, 1.0), np.sign(e) * np.inf)
        z = np.exp(-np.abs(x))
        upper = z / (1.0 + z)  # branch for x >= 0
        out = np.where(x >= 0, upper, 1.0 - upper)
    out = np.where((t == 0) & (e == 0), 0.5, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


def frequency_shift(beta: complex, gm: float) -> float:
    """TLS transition-frequency shift delta = 2 gm Re(beta)."""
    return 2.0 * gm * complex(beta).real


def bath_rates(delta: float, params) -> BathRates:
    """Emission rate and thermal occupation at the shifted frequency nu0 + delta."""
    nu = params.nu0 + delta
    if not nu > 0:
        raise LevelCrossingError(
            f"TLS frequency driven nonpositive: nu0 + delta = {nu:g}"
        )
    gamma_t = params.gamma * (nu / params.nu0) ** params.bath_exponent
    return BathRates(gamma_t, bose_occupation(nu, params.temperature))


def shannon_entropy_bits(p) -> float:
    """Binary Shannon entropy in bits; exactly 0 at the endpoints."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"probability outside [0, 1]: {p}")
    if p == 0.0 or p == 1.0:
        return 0.0
    # evaluate on the smaller probability so H(p) and H(1 - p) share one code path
    small = 1.0 - p if p > 0.5 else p
    large = 1.0 - small
    return -(small * math.log2(small) + large * math.log2(large))


def landauer_work(temperature: float) -> float:
    """Minimal erasure work k_B T ln 2."""
    if temperature < 0:
        raise DomainError(f"temperature must be >= 0, got {temperature}")
    return temperature * LN2


def steady_population(nbar: float) -> float:
    """Fixed point nbar/(2 nbar + 1) of the population relaxation."""
    if nbar < 0:
        raise DomainError(f"nbar must be >= 0, got {nbar}")
    if math.isinf(nbar):
        return 0.5
    return nbar / (2.0 * nbar + 1.0)
