"""Thermodynamic bookkeeping along a trajectory.

Sign conventions: ``work > 0`` means the oscillator (battery) delivers energy
to the TLS, ``heat > 0`` means the bath delivers energy to the TLS. The TLS
internal energy is u = (nu0 + delta) P_e and the mechanical energy is
E_m = Omega (N + 1/2), so the first law reads du = dw + dq and the battery
identity reads dE_m = -dw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import LedgerInconsistencyError, StateCorruptionError
from .kernels import (
    BathRates,
    bath_rates,
    frequency_shift,
    landauer_work,
    shannon_entropy_bits,
)

FIRST_LAW_RTOL = 1e-6
BATTERY_RTOL = 1e-8
# ledger errors are raised only beyond this multiple of the tolerance
LEDGER_ALARM = 100.0
# absolute floor (relative to nu0) for the first-law scale; roundoff in u
FIRST_LAW_FLOOR = 1e-12


def internal_energy(state, params) -> float:
    """TLS energy (nu0 + delta) P_e."""
    return (params.nu0 + frequency_shift(state.beta, params.gm)) * state.p_e


def mechanical_energy(state, params) -> float:
    """Mean oscillator energy Omega (N + 1/2)."""
    if state.n_phonon < 0:
        raise StateCorruptionError(f"negative phonon number {state.n_phonon!r}")
    return params.omega * (state.n_phonon + 0.5)


def work_rate(state, params) -> float:
    """P_e d(delta)/dt = 2 gm Omega P_e Im(beta); equals -Omega dN/dt."""
    return 2.0 * params.gm * params.omega * state.p_e * complex(state.beta).imag


def heat_rate(state, params, rates: Optional[BathRates]) -> float:
    """(nu0 + delta) times the dissipative part of dP_e/dt; 0 without a bath."""
    if rates is None:
        return 0.0
    gamma_t, nbar_t = rates
    if gamma_t == 0:
        return 0.0
    nu = params.nu0 + frequency_shift(state.beta, params.gm)
    return nu * (-gamma_t * (2.0 * nbar_t + 1.0) * state.p_e + gamma_t * nbar_t)


def _entropy(p_e: float) -> float:
    # tolerate the integrator's roundoff slack at the endpoints
    if -1e-12 <= p_e < 0.0:
        p_e = 0.0
    elif 1.0 < p_e <= 1.0 + 1e-12:
        p_e = 1.0
    elif not 0.0 <= p_e <= 1.0:
        # unphysical state: reported through MeanFieldState.check, not here
        return math.nan
    return shannon_entropy_bits(p_e)


@dataclass(frozen=True)
class EnergyLedger:
    """Running work, heat and energy balance of one trajectory.

    ``delta_u`` and ``delta_e_mech`` are assembled from integrated increments
    of (N, Re beta, P_e) rather than as differences of large absolute
    energies, which would lose the small balance terms to cancellation.
    """

    work: float
    heat: float
    u: float
    e_mech: float
    entropy_bits: float
    u_initial: float
    e_mech_initial: float
    n_initial: float
    steps: int = 0
    delta_u: float = 0.0
    delta_e_mech: float = 0.0
    delta_n: float = 0.0
    delta_beta_re: float = 0.0
    delta_p_e: float = 0.0
    beta_re_initial: float = 0.0

    @classmethod
    def start(cls, state, params) -> "EnergyLedger":
        u = internal_energy(state, params)
        em = mechanical_energy(state, params)
        return cls(0.0, 0.0, u, em, _entropy(state.p_e), u, em, state.n_phonon,
                   beta_re_initial=complex(state.beta).real)

    def _energy_change(self, params, p_e: float, d_br: float, d_pe: float) -> float:
        # u - u0 = nu0 dP + 2 gm (dRe(beta) P + Re(beta0) dP)
        return params.nu0 * d_pe + 2.0 * params.gm * (d_br * p_e + self.beta_re_initial * d_pe)

    def advance(self, state, params, dw: float, dq: float, increments, steps: int = 1
                ) -> "EnergyLedger":
        """Book one stretch of integration; ``increments`` = (dN, dRe beta, dP_e)."""
        dn, d_br, d_pe = increments
        delta_n = self.delta_n + dn
        delta_br = self.delta_beta_re + d_br
        delta_pe = self.delta_p_e + d_pe
        return replace(
            self,
            work=self.work + dw,
            heat=self.heat + dq,
            u=internal_energy(state, params),
            e_mech=mechanical_energy(state, params),
            entropy_bits=_entropy(state.p_e),
            steps=self.steps + steps,
            delta_n=delta_n,
            delta_beta_re=delta_br,
            delta_p_e=delta_pe,
            delta_u=self._energy_change(params, state.p_e, delta_br, delta_pe),
            delta_e_mech=params.omega * delta_n,
        )

    def after_reset(self, state_before, state, params) -> "EnergyLedger":
        """Book an instantaneous thermalization: the energy change is heat."""
        d_pe = state.p_e - state_before.p_e
        delta_pe = self.delta_p_e + d_pe
        du = self._energy_change(params, state.p_e, self.delta_beta_re, delta_pe)
        return replace(self, heat=self.heat + (du - self.delta_u), u=internal_energy(state, params),
                       entropy_bits=_entropy(state.p_e), delta_p_e=delta_pe, delta_u=du)

    def first_law_residual(self) -> float:
        return self.delta_u - (self.work + self.heat)

    def battery_residual(self) -> float:
        return self.delta_e_mech + self.work

    def first_law_scale(self, params) -> float:
        return max(abs(self.work), abs(self.heat), params.omega * self.n_initial,
                   FIRST_LAW_FLOOR * params.nu0)

    def check(self, params) -> "EnergyLedger":
        residual = abs(self.first_law_residual())
        limit = LEDGER_ALARM * FIRST_LAW_RTOL * self.first_law_scale(params)
        if not residual <= limit:
            raise LedgerInconsistencyError(
                f"first-law residual {residual:.3e} exceeds {limit:.3e} "
                f"(w = {self.work:.6g}, q = {self.heat:.6g}, du = {self.delta_u:.6g})")
        return self

    def to_dict(self) -> dict:
        return {
            "work": self.work, "heat": self.heat, "u": self.u, "e_mech": self.e_mech,
            "entropy_bits": self.entropy_bits, "u_initial": self.u_initial,
            "e_mech_initial": self.e_mech_initial, "n_initial": self.n_initial,
            "steps": self.steps, "delta_u": self.delta_u, "delta_e_mech": self.delta_e_mech,
            "delta_n": self.delta_n, "delta_beta_re": self.delta_beta_re,
            "delta_p_e": self.delta_p_e, "beta_re_initial": self.beta_re_initial,
        }


def _bath(state, params, bath_on):
    if not bath_on:
        return None
    return bath_rates(frequency_shift(state.beta, params.gm), params)


def accumulate(ledger: EnergyLedger, state_before, state_after, params, dt: float,
               bath_on: bool) -> EnergyLedger:
    """Advance the ledger over one RK4 step using the step's own stages."""
    from .dynamics import RK4_WEIGHTS, rk4_stages

    stages, ks = rk4_stages(state_before, params, bath_on, dt)
    dw = dt * sum(wi * work_rate(y, params) for wi, y in zip(RK4_WEIGHTS, stages))
    dq = dt * sum(wi * heat_rate(y, params, _bath(y, params, bath_on))
                  for wi, y in zip(RK4_WEIGHTS, stages))
    increments = (dt * sum(wi * k.d_n for wi, k in zip(RK4_WEIGHTS, ks)),
                  dt * sum(wi * k.d_beta.real for wi, k in zip(RK4_WEIGHTS, ks)),
                  dt * sum(wi * k.d_pe for wi, k in zip(RK4_WEIGHTS, ks)))
    return ledger.advance(state_after, params, dw, dq, increments).check(params)


def trapezoid_work(times, states, params) -> float:
    """Post-hoc trapezoid estimate of the work, for cross-checking the ledger."""
    rates = np.array([work_rate(s, params) for s in states])
    return float(np.trapezoid(rates, np.asarray(times, dtype=float)))


def trapezoid_heat(times, states, params, bath_on: bool = True) -> float:
    rates = np.array([heat_rate(s, params, _bath(s, params, bath_on)) for s in states])
    return float(np.trapezoid(rates, np.asarray(times, dtype=float)))


def clausius_gap(ledger_initial: EnergyLedger, ledger_final: EnergyLedger,
                 temperature: float) -> float:
    """-Q - W0 * dH, with dH = H_initial - H_final the information erased.

    Zero for a reversible isothermal transformation and positive otherwise.
    """
    q = ledger_final.heat - ledger_initial.heat
    erased = ledger_initial.entropy_bits - ledger_final.entropy_bits
    return -q - landauer_work(temperature) * erased


def quench_work(e_initial: float, e_final: float, p_e_initial: float) -> float:
    """Work of an instantaneous level shift at frozen population."""
    return p_e_initial * (e_final - e_initial)


def first_law_ok(ledger: EnergyLedger, params, rtol: float = FIRST_LAW_RTOL) -> bool:
    return abs(ledger.first_law_residual()) < rtol * ledger.first_law_scale(params)


def battery_ok(ledger: EnergyLedger, params, rtol: float = BATTERY_RTOL) -> bool:
    scale = max(abs(ledger.work), params.omega)
    return math.isfinite(ledger.battery_residual()) and abs(ledger.battery_residual()) < rtol * scale
