"""Invariant suite behind ``optotherm verify``."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import simpson

from .dynamics import MeanFieldState, SegmentSpec, evolve_segment
from .energetics import (
    BATTERY_RTOL,
    FIRST_LAW_RTOL,
    EnergyLedger,
    heat_rate,
    work_rate,
)
from .errors import OptothermError
from .kernels import (
    bath_rates,
    bose_occupation,
    fermi_population,
    frequency_shift,
    steady_population,
)
from .protocols import reversible_work_oracle, reversible_work_quadrature, thermal_state


@dataclass
class Check:
    name: str
    passed: bool
    measured: float
    threshold: float
    note: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{status}  {self.name}: measured {self.measured:.3e} (limit {self.threshold:.1e})"
        return text + (f"  [{self.note}]" if self.note else "")


def _sampled_run(params, beta0, duration, dt):
    state = thermal_state(params, beta0)
    rows = []

    def keep(t, s, ledger):
        rows.append((t, s, ledger))

    ledger = EnergyLedger.start(state, params)
    keep(0.0, state, ledger)
    evolve_segment(state, params, SegmentSpec(duration, True, dt, 1), keep, ledger,
                   check_ledger=False)
    return rows


def _dynamic_checks(params, beta0, duration, dt):
    rows = _sampled_run(params, beta0, duration, dt)
    t = np.array([r[0] for r in rows])
    states = [r[1] for r in rows]
    ledgers = [r[2] for r in rows]
    last = ledgers[-1]
    checks = []

    battery = max(abs(l.battery_residual()) / max(abs(l.work), params.omega) for l in ledgers)
    checks.append(Check("battery identity |dE_m + w| / max(|w|, Omega)",
                        battery < BATTERY_RTOL, battery, BATTERY_RTOL))

    first = max(abs(l.first_law_residual()) / l.first_law_scale(params) for l in ledgers)
    checks.append(Check("first law, in-loop ledger", first < FIRST_LAW_RTOL, first, FIRST_LAW_RTOL))

    # independent route: Simpson quadrature of the rates at the sampled states
    w_rates = np.array([work_rate(s, params) for s in states])
    q_rates = np.array([heat_rate(s, params, bath_rates(frequency_shift(s.beta, params.gm), params))
                        for s in states])
    w_post = simpson(w_rates, x=t)
    q_post = simpson(q_rates, x=t)
    resid = abs(last.delta_u - (w_post + q_post)) / last.first_law_scale(params)
    checks.append(Check("first law, post-hoc quadrature", resid < FIRST_LAW_RTOL, resid,
                        FIRST_LAW_RTOL))

    n0 = states[0].n_phonon
    inv = np.array([s.n_phonon - abs(s.beta) ** 2 for s in states])
    drift = float(np.max(np.abs(inv - inv[0]))) / max(1.0, n0)
    checks.append(Check("N - |beta|^2 conservation", drift < 1e-8, drift, 1e-8))

    pe = np.array([s.p_e for s in states])
    excursion = float(max(-pe.min(), pe.max() - 1.0, 0.0))
    checks.append(Check("population stays in [0, 1]", excursion <= 1e-12, excursion, 1e-12))

    if params.gm == 0:
        checks.append(Check("work vanishes without coupling", last.work == 0.0, abs(last.work), 0.0))
    return checks


def _static_checks(params):
    checks = []
    x = np.logspace(-6, np.log10(50.0), 200)
    worst = 0.0
    for T in (0.1, 1.0, 1e3):
        for xi in x:
            lhs = steady_population(bose_occupation(xi * T, T))
            rhs = fermi_population(xi * T, T)
            worst = max(worst, abs(lhs - rhs) / rhs)
    checks.append(Check("Lindblad fixed point = Fermi-Dirac", worst < 1e-12, worst, 1e-12))

    rng = np.random.default_rng(12345)
    worst = 0.0
    for _ in range(100):
        T = 10 ** rng.uniform(-1, 3)
        e_i, e_f = rng.uniform(-5, 20, size=2) * T
        exact = reversible_work_oracle(e_i, e_f, T)
        brute = reversible_work_quadrature(e_i, e_f, T)
        worst = max(worst, abs(exact - brute) / abs(exact))
    checks.append(Check("reversible-work oracle vs quadrature", worst < 1e-8, worst, 1e-8))

    # relaxation with the oscillator decoupled: ground state -> steady population
    bare = params.replace(gm=0.0)
    state, _ = evolve_segment(MeanFieldState.coherent(0.0, 0.0), bare, SegmentSpec(10.0, True))
    target = steady_population(bose_occupation(bare.nu0, bare.temperature))
    err = abs(state.p_e - target)
    checks.append(Check("relaxation to steady population within 10/gamma", err < 1e-6, err, 1e-6))

    _, led = evolve_segment(thermal_state(bare, 1e3 if bare.omega else 0.0), bare,
                            SegmentSpec(min(50.0, 2 * math.pi / bare.omega), True))
    checks.append(Check("work identically zero at gm = 0", led.work == 0.0, abs(led.work), 0.0))
    return checks


def run_checks(params, beta0: float = 1e3, duration: float = 50.0,
               dt: Optional[float] = None) -> list:
    """All invariant checks; dynamic ones use the given dt."""
    try:
        checks = _dynamic_checks(params, beta0, duration, dt)
    except OptothermError as exc:
        checks = [Check("trajectory checks", False, math.nan, 0.0, f"{type(exc).__name__}: {exc}")]
    try:
        checks += _static_checks(params)
    except OptothermError as exc:
        checks.append(Check("static checks", False, math.nan, 0.0, f"{type(exc).__name__}: {exc}"))
    return checks
