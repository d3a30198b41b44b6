"""Named experiments built from the dynamics and the energy ledger.

All protocols are deterministic: a :class:`RunRecord` carries the parameters
and the protocol it came from and can be re-executed bit-identically.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .dynamics import MeanFieldState, SegmentSpec, evolve_segment, reset_tls
from .energetics import EnergyLedger, quench_work
from .errors import DomainError, LevelCrossingError, OptothermError
from .kernels import (
    bath_rates,
    fermi_population,
    frequency_shift,
    landauer_work,
    steady_population,
)
from .units import SystemParams, UnitConversion

# ---------------------------------------------------------------------------
# protocol description


@dataclass(frozen=True)
class Evolve:
    segment: SegmentSpec


@dataclass(frozen=True)
class Reset:
    target: float

    def __post_init__(self):
        if not 0.0 <= self.target <= 1.0:
            raise DomainError(f"reset target must lie in [0, 1], got {self.target}")


Step = Union[Evolve, Reset]


@dataclass(frozen=True)
class Protocol:
    initial_state: MeanFieldState
    steps: tuple
    label: str = ""

    def __post_init__(self):
        if not self.steps:
            raise DomainError("a protocol needs at least one step")
        object.__setattr__(self, "steps", tuple(self.steps))

    @property
    def duration(self) -> float:
        return sum(s.segment.duration for s in self.steps if isinstance(s, Evolve))

    def to_dict(self) -> dict:
        steps = []
        for s in self.steps:
            if isinstance(s, Reset):
                steps.append({"reset": s.target})
            else:
                seg = s.segment
                steps.append({"evolve": seg.duration, "bath_on": seg.bath_on,
                              "dt": seg.dt, "sample_every": seg.sample_every})
        return {"label": self.label, "initial_state": self.initial_state.to_dict(),
                "steps": steps}

    @classmethod
    def from_dict(cls, d: dict) -> "Protocol":
        steps = []
        for s in d["steps"]:
            if "reset" in s:
                steps.append(Reset(float(s["reset"])))
            else:
                steps.append(Evolve(SegmentSpec(float(s["evolve"]), bool(s.get("bath_on", True)),
                                                s.get("dt"), int(s.get("sample_every", 100)))))
        return cls(MeanFieldState.from_dict(d["initial_state"]), tuple(steps), d.get("label", ""))


# ---------------------------------------------------------------------------
# run records

SAMPLE_COLUMNS = ("t", "beta_re", "beta_im", "n_phonon", "p_e", "s_rot_re", "s_rot_im",
                  "work", "heat", "u", "e_mech", "entropy_bits")


class _Recorder:
    def __init__(self):
        self.rows = []

    def __call__(self, t, state, ledger):
        self.rows.append((t, state.beta.real, state.beta.imag, state.n_phonon, state.p_e,
                          state.s_rot.real, state.s_rot.imag, ledger.work, ledger.heat,
                          ledger.u, ledger.e_mech, ledger.entropy_bits))


@dataclass
class RunRecord:
    params: SystemParams
    protocol: Protocol
    samples: dict
    final_state: MeanFieldState
    final_ledger: EnergyLedger
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.samples["t"])

    def column(self, name: str) -> np.ndarray:
        return self.samples[name]

    @property
    def beta(self) -> np.ndarray:
        return self.samples["beta_re"] + 1j * self.samples["beta_im"]

    @property
    def transition_energy(self) -> np.ndarray:
        """nu0 + delta(t) at each sample."""
        return self.params.nu0 + 2.0 * self.params.gm * self.samples["beta_re"]


def run_protocol(params: SystemParams, protocol: Protocol, check_ledger: bool = True) -> RunRecord:
    """Execute a protocol, sampling the state and ledger along the way."""
    started = time.perf_counter()
    state = protocol.initial_state
    ledger = EnergyLedger.start(state, params)
    rec = _Recorder()
    rec(0.0, state, ledger)
    t = 0.0
    for step in protocol.steps:
        if isinstance(step, Reset):
            before, state = state, reset_tls(state, step.target)
            ledger = ledger.after_reset(before, state, params)
            rec(t, state, ledger)
        else:
            state, ledger = evolve_segment(state, params, step.segment, rec, ledger, t0=t,
                                           check_ledger=check_ledger)
            t += step.segment.duration
    data = np.array(rec.rows, dtype=float)
    samples = {name: data[:, i].copy() for i, name in enumerate(SAMPLE_COLUMNS)}
    drift = (samples["n_phonon"] - samples["beta_re"] ** 2 - samples["beta_im"] ** 2)
    first_law = samples["u"] - samples["u"][0] - samples["work"] - samples["heat"]
    battery = samples["e_mech"] - samples["e_mech"][0] + samples["work"]
    diagnostics = {
        "steps": ledger.steps,
        "samples": len(data),
        "max_first_law_residual": float(np.max(np.abs(first_law))),
        "max_battery_residual": float(np.max(np.abs(battery))),
        "max_coherence_drift": float(np.max(np.abs(drift - drift[0]))),
        "wall_time": time.perf_counter() - started,
    }
    return RunRecord(params, protocol, samples, state, ledger, diagnostics)


# ---------------------------------------------------------------------------
# turning points


@dataclass(frozen=True)
class TurningPoint:
    t: float
    index: int
    values: dict

    def __getitem__(self, name):
        return self.values[name]


def _lagrange3(ts, ys, t):
    t0, t1, t2 = ts
    y0, y1, y2 = ys
    l0 = (t - t1) * (t - t2) / ((t0 - t1) * (t0 - t2))
    l1 = (t - t0) * (t - t2) / ((t1 - t0) * (t1 - t2))
    l2 = (t - t0) * (t - t1) / ((t2 - t0) * (t2 - t1))
    return l0 * y0 + l1 * y1 + l2 * y2


def _quadratic_root(ts, ys, lo, hi):
    """Root of the parabola through (ts, ys) inside [lo, hi], or None."""
    t0, t1, t2 = ts
    y0, y1, y2 = ys
    # y(t) = a (t - t1)^2 + b (t - t1) + c
    d0, d2 = t0 - t1, t2 - t1
    c = y1
    a = ((y0 - c) / d0 - (y2 - c) / d2) / (d0 - d2)
    b = (y0 - c) / d0 - a * d0
    if a == 0.0:
        roots = [-c / b] if b != 0.0 else []
    else:
        disc = b * b - 4.0 * a * c
        if disc < 0.0:
            return None
        q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
        roots = [q / a] + ([c / q] if q != 0.0 else [])
    inside = [t1 + r for r in roots if lo <= t1 + r <= hi]
    return inside[0] if inside else None


def _stencil(t, i):
    """Three samples with distinct times around the interval [i, i+1]."""
    n = len(t)
    for idx in ([i - 1, i, i + 1], [i, i + 1, i + 2]):
        if idx[0] >= 0 and idx[2] < n and t[idx[0]] < t[idx[1]] < t[idx[2]]:
            return idx
    return None


def find_turning_points(record: RunRecord, t_min: float = 0.0) -> list:
    """Extremal deflections: sign changes of Im(beta) strictly after ``t_min``.

    The crossing time comes from a parabola through three neighbouring
    samples; every sampled column is interpolated to that time the same way.
    """
    t = record.samples["t"]
    y = record.samples["beta_im"]
    out = []
    for i in range(len(t) - 1):
        if t[i + 1] == t[i] or t[i + 1] <= t_min:
            continue
        a, b = y[i], y[i + 1]
        if not (a * b < 0.0 or (a == 0.0 and t[i] > t_min)):
            continue
        linear = t[i] + (t[i + 1] - t[i]) * a / (a - b)
        idx = _stencil(t, i)
        hit = None
        if a == 0.0:
            hit = t[i]
        elif idx is not None:
            hit = _quadratic_root(t[idx], y[idx], t[i], t[i + 1])
        if hit is None:
            hit = linear
        values = {}
        for name, col in record.samples.items():
            if idx is not None:
                values[name] = float(_lagrange3(t[idx], col[idx], hit))
            else:
                w = (hit - t[i]) / (t[i + 1] - t[i])
                values[name] = float((1.0 - w) * col[i] + w * col[i + 1])
        values["t"] = float(hit)
        out.append(TurningPoint(float(hit), i, values))
    return out


# ---------------------------------------------------------------------------
# reversible-work oracle


def reversible_work_oracle(e_initial: float, e_final: float, temperature: float) -> float:
    """Work for a quasi-static level sweep E_i -> E_f with the TLS at equilibrium.

    Closed form of the integral of the Fermi population over E:
    T [ln(1 + exp(-E_i/T)) - ln(1 + exp(-E_f/T))].
    """
    if not temperature > 0:
        raise DomainError(f"temperature must be positive, got {temperature}")
    return temperature * (np.logaddexp(0.0, -e_initial / temperature)
                          - np.logaddexp(0.0, -e_final / temperature))


def reversible_work_quadrature(e_initial: float, e_final: float, temperature: float,
                               panels: int = 10_000) -> float:
    """Composite Simpson integral of the Fermi population, the brute-force check."""
    if panels % 2:
        panels += 1
    e = np.linspace(e_initial, e_final, panels + 1)
    f = fermi_population(e, temperature)
    h = (e_final - e_initial) / panels
    return float(h / 3.0 * (f[0] + f[-1] + 4.0 * f[1:-1:2].sum() + 2.0 * f[2:-1:2].sum()))


# ---------------------------------------------------------------------------
# states and segments


def thermal_state(params: SystemParams, beta0: complex) -> MeanFieldState:
    """Coherent oscillator at beta0 with the TLS at equilibrium for that deflection."""
    delta = frequency_shift(beta0, params.gm)
    nbar = bath_rates(delta, params).nbar_t
    return MeanFieldState.coherent(beta0, steady_population(nbar))


def rest_state(params: SystemParams) -> MeanFieldState:
    """Stationary state with the bath on: beta* = -gm P_eq(beta*) / Omega."""
    from scipy.optimize import brentq

    def mismatch(b):
        return b + params.gm * thermal_state(params, b).p_e / params.omega

    # P_eq lies in [0, 1/2], so beta* lies between 0 and -gm/(2 Omega)
    far = -params.gm / (2.0 * params.omega)
    if far == 0.0:
        return thermal_state(params, 0.0)
    # stay on the side where nu0 + 2 gm beta > 0
    crossing = -params.nu0 / (2.0 * params.gm)
    if abs(far) >= abs(crossing):
        far = crossing * (1.0 - 1e-12)
    # the branch connected to beta = 0: first sign change scanning away from 0
    grid = np.linspace(0.0, far, 2001)
    values = np.array([mismatch(b) for b in grid])
    if values[0] == 0.0:
        return thermal_state(params, 0.0)
    change = np.nonzero(np.sign(values[1:]) != np.sign(values[0]))[0]
    if len(change) == 0:
        raise LevelCrossingError("no rest state with a positive TLS frequency")
    k = change[0]
    lo, hi = sorted((grid[k], grid[k + 1]))
    beta = brentq(mismatch, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return thermal_state(params, beta)


def period(params: SystemParams) -> float:
    return 2.0 * math.pi / params.omega


def _sample_every(params, duration, samples, dt=None):
    h = dt if dt is not None else SegmentSpec(duration).step_size(params)
    return max(1, int(round(duration / h / samples)))


def isothermal_cycle(params: SystemParams, beta0: float, n_periods: float = 1.0,
                     samples_per_period: int = 4000, dt: Optional[float] = None) -> RunRecord:
    """Bath-coupled evolution of an oscillator pulled out to a real beta0 > 0.

    The TLS starts at equilibrium with the initial deflection.
    """
    if not (np.isreal(beta0) and float(np.real(beta0)) > 0):
        raise DomainError(f"beta0 must be real and positive, got {beta0}")
    params.warn_regime()
    duration = n_periods * period(params)
    seg = SegmentSpec(duration, True, dt,
                      _sample_every(params, duration, samples_per_period * n_periods, dt))
    proto = Protocol(thermal_state(params, float(np.real(beta0))), (Evolve(seg),),
                     label=f"isothermal beta0={float(np.real(beta0)):g} periods={n_periods:g}")
    return run_protocol(params, proto)


def cycle_closure(record: RunRecord) -> float:
    """Relative change of |beta| between the first and last sample."""
    b = np.abs(record.beta)
    return float((b[-1] - b[0]) / b[0])


@dataclass
class HalfPeriod:
    record: RunRecord
    start: dict
    turn: TurningPoint

    @property
    def work(self) -> float:
        return self.turn["work"] - self.start["work"]

    @property
    def heat_ledger(self) -> float:
        return self.turn["heat"] - self.start["heat"]

    @property
    def delta_u(self) -> float:
        return self.turn["u"] - self.start["u"]

    @property
    def delta_e_mech(self) -> float:
        return self.turn["e_mech"] - self.start["e_mech"]

    @property
    def heat_from_mechanics(self) -> float:
        """Q = dU + dE_m, the heat inferred from a mechanical readout."""
        return self.delta_u + self.delta_e_mech

    @property
    def erased_bits(self) -> float:
        """H(start) - H(turning point)."""
        return self.start["entropy_bits"] - self.turn["entropy_bits"]

    @property
    def energies(self) -> tuple:
        p = self.record.params
        return (p.nu0 + 2 * p.gm * self.start["beta_re"], p.nu0 + 2 * p.gm * self.turn["beta_re"])


def half_period(params: SystemParams, beta0: float, samples: int = 2000,
                dt: Optional[float] = None, overshoot: float = 0.1) -> HalfPeriod:
    """Evolve from a turning point at real beta0 to the next turning point."""
    params.warn_regime()
    duration = (0.5 + overshoot) * period(params)
    seg = SegmentSpec(duration, True, dt, _sample_every(params, 0.5 * period(params), samples, dt))
    proto = Protocol(thermal_state(params, float(beta0)), (Evolve(seg),),
                     label=f"half-period beta0={float(beta0):g}")
    record = run_protocol(params, proto)
    turns = find_turning_points(record, t_min=0.25 * period(params))
    if not turns:
        raise OptothermError("no turning point found within the half-period window")
    start = {name: float(col[0]) for name, col in record.samples.items()}
    return HalfPeriod(record, start, turns[0])


@dataclass
class WorkBracket:
    record: RunRecord
    t: np.ndarray
    work: np.ndarray
    reversible: np.ndarray
    quench: np.ndarray

    def violation(self) -> float:
        """Largest excursion of the work outside [reversible, quench]."""
        below = self.reversible - self.work
        above = self.work - self.quench
        return float(max(below.max(), above.max(), 0.0))


def erasure_half_period(params: SystemParams, beta_amplitude: float, samples: int = 2000,
                        dt: Optional[float] = None) -> WorkBracket:
    """Half a period starting at the deflection of lowest TLS energy.

    The transition energy then rises monotonically (Landauer erasure) and the
    work is compared with the reversible and quench bounds at every sample.
    """
    params.warn_regime()
    beta0 = -math.copysign(abs(beta_amplitude), params.gm) if params.gm else -abs(beta_amplitude)
    duration = 0.5 * period(params)
    seg = SegmentSpec(duration, True, dt, _sample_every(params, duration, samples, dt))
    proto = Protocol(thermal_state(params, beta0), (Evolve(seg),),
                     label=f"erasure amplitude={abs(beta_amplitude):g}")
    record = run_protocol(params, proto)
    energy = record.transition_energy
    w_rev = reversible_work_oracle(energy[0], energy, params.temperature)
    w_q = quench_work(energy[0], energy, record.samples["p_e"][0])
    return WorkBracket(record, record.samples["t"], record.samples["work"], w_rev, w_q)


# ---------------------------------------------------------------------------
# adiabatic transducer and Otto engine


@dataclass
class AdiabaticResult:
    work: float
    delta_nu0: float
    x_start: float
    x_turn: float
    x_turn_expected: float
    delta_e_mech: float
    record: RunRecord


def adiabatic_transducer(params: SystemParams, x_m: float, p_e: float = 1.0,
                         dt: Optional[float] = None, samples: int = 1000) -> AdiabaticResult:
    """Half a mechanical period with the bath decoupled and P_e frozen.

    ``work`` is the work received by the TLS (= -dE_m); ``delta_nu0`` is the
    mean TLS frequency change P_e * d(delta), so that work = delta_nu0.
    """
    duration = 0.5 * period(params)
    seg = SegmentSpec(duration, False, dt, _sample_every(params, duration, samples, dt))
    proto = Protocol(MeanFieldState.coherent(0.5 * x_m, p_e), (Evolve(seg),),
                     label=f"adiabatic x_m={x_m:g} p_e={p_e:g}")
    record = run_protocol(params, proto)
    x_turn = 2.0 * record.final_state.beta.real
    led = record.final_ledger
    return AdiabaticResult(
        work=led.work,
        delta_nu0=p_e * 2.0 * params.gm * (record.final_state.beta.real - 0.5 * x_m),
        x_start=x_m,
        x_turn=x_turn,
        x_turn_expected=-4.0 * params.gm * p_e / params.omega - x_m,
        delta_e_mech=led.delta_e_mech,
        record=record,
    )


def otto_work_formula(params: SystemParams, x_m_initial: float, n):
    """Mean work extracted at iteration n: gm (2 n gm / Omega + x_m / x0)."""
    return params.gm * (2.0 * np.asarray(n) * params.gm / params.omega + x_m_initial)


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepResult:
    label: str
    axis_name: str
    axis: np.ndarray
    observables: dict
    records: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    def __post_init__(self):
        self.axis = np.asarray(self.axis, dtype=float)
        n = len(self.axis)
        for name, col in self.observables.items():
            col = np.asarray(col, dtype=float)
            if len(col) != n:
                raise DomainError(f"observable {name!r} has {len(col)} entries, axis has {n}")
            self.observables[name] = col
        if n > 1 and not (np.all(np.diff(self.axis) > 0) or np.all(np.diff(self.axis) < 0)):
            raise DomainError("sweep axis must be strictly monotone")
        if not self.errors:
            self.errors = [None] * n

    def __len__(self):
        return len(self.axis)

    def __getitem__(self, name):
        return self.observables[name]

    def rows(self):
        names = list(self.observables)
        for i, x in enumerate(self.axis):
            yield {self.axis_name: x, **{k: self.observables[k][i] for k in names},
                   "error": self.errors[i] or ""}


def _guarded(fn, arg):
    try:
        return fn(*arg), None
    except OptothermError as exc:
        return None, f"{type(exc).__name__}: {exc}"


def map_points(fn: Callable, args: Sequence[tuple], jobs: int = 1) -> list:
    """Evaluate fn(*a) for every a, concurrently if jobs > 1, in input order.

    Each entry is (result, error_message); a failing point never aborts the rest.
    """
    if jobs <= 1 or len(args) <= 1:
        return [_guarded(fn, a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_guarded, fn, a) for a in args]
        return [f.result() for f in futures]


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("OPTOTHERM_JOBS", "1")))
    except ValueError:
        return 1


def _nan_row(keys):
    return {k: math.nan for k in keys}


def _collect(label, axis_name, axis, results, keys, keep_records):
    obs = {k: [] for k in keys}
    records, errors = [], []
    for value, err in results:
        row, record = value if value is not None else (_nan_row(keys), None)
        for k in keys:
            obs[k].append(row[k])
        records.append(record if keep_records else None)
        errors.append(err)
    return SweepResult(label, axis_name, axis, obs, records, errors)


_REVERSIBILITY_KEYS = ("work", "w_rev", "ratio", "w_quench", "e_initial", "e_final",
                       "t_turn", "closure")


def _reversibility_point(params, beta0, samples, dt):
    hp = half_period(params, beta0, samples=samples, dt=dt)
    e_i, e_f = hp.energies
    w_rev = reversible_work_oracle(e_i, e_f, params.temperature)
    b = np.abs(hp.record.beta)
    row = {
        "work": hp.work,
        "w_rev": w_rev,
        "ratio": hp.work / w_rev if w_rev != 0 else math.nan,
        "w_quench": quench_work(e_i, e_f, hp.start["p_e"]),
        "e_initial": e_i,
        "e_final": e_f,
        "t_turn": hp.turn.t,
        "closure": float(b[-1] / b[0] - 1.0),
    }
    return row, hp.record


def reversibility_sweep(params_base: SystemParams, omega_values, beta0: float = 1e3,
                        samples: int = 2000, dt: Optional[float] = None, jobs: int = 1,
                        keep_records: bool = False) -> SweepResult:
    """Half-period work relative to the reversible work, across Omega.

    The run starts at real beta0 > 0, so for gm > 0 the transition energy
    falls during the half period and W, W_rev are both negative (work
    extraction); W/W_rev approaches 1 from below in the quasi-static limit.
    """
    omegas = np.sort(np.asarray(omega_values, dtype=float))
    if np.any(omegas <= 0):
        raise DomainError("omega values must be positive")
    args = [(params_base.replace(omega=float(w)), beta0, samples, dt) for w in omegas]
    results = map_points(_reversibility_point, args, jobs)
    return _collect("reversibility", "omega", omegas, results, _REVERSIBILITY_KEYS, keep_records)


_CLAUSIUS_KEYS = ("heat", "heat_ledger", "erased_bits", "delta_u", "delta_e_mech", "work",
                  "clausius_gap", "h_initial", "h_final", "t_turn")


def _clausius_point(params, beta0, samples, dt):
    hp = half_period(params, beta0, samples=samples, dt=dt)
    q = hp.heat_from_mechanics
    row = {
        "heat": q,
        "heat_ledger": hp.heat_ledger,
        "erased_bits": hp.erased_bits,
        "delta_u": hp.delta_u,
        "delta_e_mech": hp.delta_e_mech,
        "work": hp.work,
        "clausius_gap": -q - landauer_work(params.temperature) * hp.erased_bits,
        "h_initial": hp.start["entropy_bits"],
        "h_final": hp.turn["entropy_bits"],
        "t_turn": hp.turn.t,
    }
    return row, hp.record


@dataclass
class ClausiusFit:
    temperature: float
    landauer_work: float
    slope: float
    intercept: float
    max_residual: float
    sweep: SweepResult

    @property
    def slope_error(self) -> float:
        """Relative deviation of the slope from -W0."""
        return abs(self.slope + self.landauer_work) / self.landauer_work

    @property
    def scatter(self) -> float:
        """Largest residual relative to |slope| times the dH range."""
        dh = self.sweep["erased_bits"]
        dh = dh[np.isfinite(dh)]
        span = dh.max() - dh.min() if len(dh) else 0.0
        return self.max_residual / (abs(self.slope) * span) if span > 0 else math.nan


def fit_clausius(temperature: float, sweep: SweepResult) -> ClausiusFit:
    dh = sweep["erased_bits"]
    q = sweep["heat"]
    ok = np.isfinite(dh) & np.isfinite(q)
    if ok.sum() < 2:
        return ClausiusFit(temperature, landauer_work(temperature), math.nan, math.nan,
                           math.nan, sweep)
    slope, intercept = np.polyfit(dh[ok], q[ok], 1)
    resid = q[ok] - (slope * dh[ok] + intercept)
    return ClausiusFit(temperature, landauer_work(temperature), float(slope), float(intercept),
                       float(np.max(np.abs(resid))), sweep)


def clausius_sweep(params_base: SystemParams, beta0_values, temperatures,
                   samples: int = 2000, dt: Optional[float] = None, jobs: int = 1,
                   keep_records: bool = False) -> list:
    """Heat vs erased information over half periods, one fit per temperature.

    Heat is inferred from the mechanical readout Q = dU + dE_m between the two
    turning points; the Clausius equality predicts Q = -W0 * dH with
    dH = H_initial - H_final.
    """
    betas = np.sort(np.asarray(beta0_values, dtype=float))
    temps = [float(T) for T in temperatures]
    args = [(params_base.replace(temperature=T), float(b), samples, dt)
            for T in temps for b in betas]
    results = map_points(_clausius_point, args, jobs)
    fits = []
    for k, T in enumerate(temps):
        chunk = results[k * len(betas):(k + 1) * len(betas)]
        sweep = _collect(f"clausius T={T:g}", "beta0", betas, chunk, _CLAUSIUS_KEYS, keep_records)
        fits.append(fit_clausius(T, sweep))
    return fits


# ---------------------------------------------------------------------------
# Otto engine


def _half_turn(state, params, dt):
    seg = SegmentSpec(0.5 * period(params), False, dt, sample_every=10**9)
    return evolve_segment(state, params, seg)


@dataclass
class OttoResult:
    sweep: SweepResult
    final_state: MeanFieldState

    def __getitem__(self, name):
        return self.sweep[name]


def otto_cycle(params: SystemParams, x_m_initial: float, n_iterations: int,
               dt: Optional[float] = None) -> OttoResult:
    """Iterated Otto engine with instantaneous heating (P_e -> 1/2) and cooling (-> 0).

    The oscillator follows the ensemble-mean trajectory, which by linearity of
    the beta equation in P_e is the mean-field run with P_e = 1/2. The work of
    iteration n is the branch average over the TLS outcome (excited with
    probability 1/2, ground otherwise) starting from that mean deflection;
    the branch work is affine in the deflection, so this is the exact
    ensemble average. ``work_mean_field`` reports -dE_m of the P_e = 1/2 run
    itself, which differs because the work is quadratic in P_e.
    """
    if n_iterations < 1:
        raise DomainError("n_iterations must be >= 1")
    state = MeanFieldState.coherent(0.5 * x_m_initial, 0.0)
    cols = {k: [] for k in ("work", "work_formula", "work_excited", "work_mean_field",
                            "x_start", "x_turn", "e_mech", "branch_beta_error")}
    for n in range(1, n_iterations + 1):
        x_start = 2.0 * state.beta.real
        excited, led_e = _half_turn(reset_tls(state, 1.0), params, dt)
        ground, led_g = _half_turn(reset_tls(state, 0.0), params, dt)
        mixed, led_m = _half_turn(reset_tls(state, 0.5), params, dt)
        w_excited = -led_e.work
        cols["work_excited"].append(w_excited)
        cols["work"].append(0.5 * w_excited + 0.5 * (-led_g.work))
        cols["work_mean_field"].append(-led_m.work)
        cols["work_formula"].append(float(otto_work_formula(params, x_m_initial, n)))
        cols["x_start"].append(x_start)
        cols["x_turn"].append(2.0 * mixed.beta.real)
        cols["branch_beta_error"].append(abs(0.5 * (excited.beta + ground.beta) - mixed.beta))
        state, _ = _half_turn(reset_tls(mixed, 0.0), params, dt)
        cols["e_mech"].append(params.omega * (state.n_phonon + 0.5))
    axis = np.arange(1, n_iterations + 1)
    return OttoResult(SweepResult("otto", "iteration", axis, cols), state)


@dataclass
class EnginePower:
    iteration: np.ndarray
    power: np.ndarray
    power_si: np.ndarray
    increment: np.ndarray


def engine_power(params: SystemParams, n_iterations: int, conversion: UnitConversion,
                 x_m_initial: float = 0.0, dt: Optional[float] = None) -> EnginePower:
    """P_n = W_n * Omega from a simulated Otto run, also in watts."""
    otto = otto_cycle(params, x_m_initial, n_iterations, dt)
    power = otto["work"] * params.omega
    return EnginePower(otto.sweep.axis, power, conversion.power_to_si(power),
                       np.diff(power, prepend=0.0))
