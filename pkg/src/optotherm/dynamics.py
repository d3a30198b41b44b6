"""Mean-field Bloch equations for the TLS + oscillator and their integrator.

The dipole amplitude is carried in the frame rotating at nu0, so the only fast
scale left is the shift delta; the remaining system is smooth and integrated
with fixed-step RK4. Two routes share the same equations:

* :func:`rhs` / :func:`step_rk4` work on :class:`MeanFieldState` objects with
  complex arithmetic and serve as the readable reference.
* :func:`evolve_segment` drives a compiled kernel that also integrates the work
  and heat rates with the same RK4 stages, so the energy ledger is exact to
  integrator order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from numba import njit

from .errors import (
    DomainError,
    IntegrationBlowupError,
    LevelCrossingError,
    StateCorruptionError,
)
from .kernels import bath_rates, bose_occupation, frequency_shift

POPULATION_SLACK = 1e-12
COHERENCE_SLACK = 1e-9


@dataclass(frozen=True)
class MeanFieldState:
    beta: complex
    n_phonon: float
    p_e: float
    s_rot: complex = 0j

    @classmethod
    def coherent(cls, beta: complex, p_e: float = 0.0, s_rot: complex = 0j) -> "MeanFieldState":
        """Oscillator in a coherent state, so N = |beta|^2."""
        beta = complex(beta)
        return cls(beta, abs(beta) ** 2, float(p_e), complex(s_rot))

    def check(self) -> "MeanFieldState":
        """Raise StateCorruptionError if the state left the physical domain."""
        values = (self.beta.real, self.beta.imag, self.n_phonon, self.p_e,
                  self.s_rot.real, self.s_rot.imag)
        if not all(math.isfinite(v) for v in values):
            raise StateCorruptionError(f"non-finite state: {self}")
        if not -POPULATION_SLACK <= self.p_e <= 1.0 + POPULATION_SLACK:
            raise StateCorruptionError(f"p_e = {self.p_e!r} outside [0, 1]")
        if abs(self.s_rot) ** 2 > self.p_e * (1.0 - self.p_e) + COHERENCE_SLACK:
            raise StateCorruptionError(
                f"|s|^2 = {abs(self.s_rot) ** 2:g} exceeds p_e(1-p_e) = "
                f"{self.p_e * (1 - self.p_e):g}"
            )
        if self.n_phonon < 0:
            raise StateCorruptionError(f"negative phonon number {self.n_phonon!r}")
        return self

    def s_lab(self, t: float, nu0: float) -> complex:
        """Dipole amplitude in the lab frame."""
        return self.s_rot * complex(math.cos(nu0 * t), -math.sin(nu0 * t))

    def as_array(self) -> np.ndarray:
        return np.array([self.beta.real, self.beta.imag, self.n_phonon,
                         self.p_e, self.s_rot.real, self.s_rot.imag])

    @classmethod
    def from_array(cls, y) -> "MeanFieldState":
        return cls(complex(y[0], y[1]), float(y[2]), float(y[3]), complex(y[4], y[5]))

    def to_dict(self) -> dict:
        return {"beta_re": self.beta.real, "beta_im": self.beta.imag,
                "n_phonon": self.n_phonon, "p_e": self.p_e,
                "s_rot_re": self.s_rot.real, "s_rot_im": self.s_rot.imag}

    @classmethod
    def from_dict(cls, d: dict) -> "MeanFieldState":
        return cls(complex(d["beta_re"], d["beta_im"]), float(d["n_phonon"]),
                   float(d["p_e"]), complex(d.get("s_rot_re", 0.0), d.get("s_rot_im", 0.0)))


@dataclass(frozen=True)
class Derivative:
    d_beta: complex
    d_n: float
    d_pe: float
    d_s_rot: complex

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in (self.d_beta.real, self.d_beta.imag, self.d_n,
                                              self.d_pe, self.d_s_rot.real, self.d_s_rot.imag))


@dataclass(frozen=True)
class SegmentSpec:
    duration: float
    bath_on: bool = True
    dt: Optional[float] = None
    sample_every: int = 100

    def __post_init__(self):
        if not (math.isfinite(self.duration) and self.duration >= 0):
            raise DomainError(f"segment duration must be finite and >= 0, got {self.duration}")
        if self.dt is not None:
            if not (math.isfinite(self.dt) and self.dt > 0):
                raise DomainError(f"dt must be positive, got {self.dt}")
            if self.duration > 0 and self.dt > self.duration:
                raise DomainError(f"dt = {self.dt} exceeds the segment duration {self.duration}")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise DomainError("sample_every must be a positive integer")

    def step_size(self, params) -> float:
        if self.dt is not None:
            return self.dt
        return min(default_dt(params), self.duration) if self.duration > 0 else default_dt(params)


def default_dt(params) -> float:
    """1e-2 of the fastest rate among relaxation, oscillation and coupling."""
    nbar = bose_occupation(params.nu0, params.temperature)
    fastest = max(params.gamma * (2.0 * nbar + 1.0), params.omega, abs(params.gm))
    return 1e-2 / fastest


# ---------------------------------------------------------------------------
# reference route


def _rates(delta, params, bath_on):
    if not bath_on:
        return 0.0, 0.0
    return bath_rates(delta, params)


def rhs(state: MeanFieldState, params, bath_on: bool) -> Derivative:
    """Time derivatives of (beta, N, P_e, s_rot)."""
    delta = frequency_shift(state.beta, params.gm)
    gamma_t, nbar_t = _rates(delta, params, bath_on)
    decay = gamma_t * (2.0 * nbar_t + 1.0)
    return Derivative(
        d_beta=-1j * params.omega * state.beta - 1j * params.gm * state.p_e,
        d_n=-2.0 * params.gm * state.p_e * state.beta.imag,
        d_pe=-decay * state.p_e + gamma_t * nbar_t,
        d_s_rot=(-1j * delta - 0.5 * decay) * state.s_rot,
    )


def _shifted(state, k: Derivative, h):
    return MeanFieldState(state.beta + h * k.d_beta, state.n_phonon + h * k.d_n,
                          state.p_e + h * k.d_pe, state.s_rot + h * k.d_s_rot)


def rk4_stages(state: MeanFieldState, params, bath_on: bool, dt: float):
    """The four RK4 stage states and their derivatives, in order."""
    y1 = state
    k1 = rhs(y1, params, bath_on)
    y2 = _shifted(state, k1, 0.5 * dt)
    k2 = rhs(y2, params, bath_on)
    y3 = _shifted(state, k2, 0.5 * dt)
    k3 = rhs(y3, params, bath_on)
    y4 = _shifted(state, k3, dt)
    k4 = rhs(y4, params, bath_on)
    return (y1, y2, y3, y4), (k1, k2, k3, k4)


RK4_WEIGHTS = (1.0 / 6.0, 2.0 / 6.0, 2.0 / 6.0, 1.0 / 6.0)


def step_rk4(state: MeanFieldState, params, bath_on: bool, dt: float) -> MeanFieldState:
    """One classical RK4 step of the mean-field equations."""
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    _, ks = rk4_stages(state, params, bath_on, dt)
    w = RK4_WEIGHTS
    new = MeanFieldState(
        state.beta + dt * sum(wi * k.d_beta for wi, k in zip(w, ks)),
        state.n_phonon + dt * sum(wi * k.d_n for wi, k in zip(w, ks)),
        state.p_e + dt * sum(wi * k.d_pe for wi, k in zip(w, ks)),
        state.s_rot + dt * sum(wi * k.d_s_rot for wi, k in zip(w, ks)),
    )
    if not all(math.isfinite(v) for v in new.as_array()):
        raise IntegrationBlowupError(f"non-finite state after RK4 step from {state}", state=state)
    return new


def reset_tls(state: MeanFieldState, target: float) -> MeanFieldState:
    """Instantaneous thermalization of the TLS to population ``target``.

    Coherence is destroyed; the oscillator is untouched.
    """
    if not 0.0 <= target <= 1.0:
        raise DomainError(f"reset target must lie in [0, 1], got {target}")
    return replace(state, p_e=float(target), s_rot=0j)


# ---------------------------------------------------------------------------
# compiled route

_OK, _BLOWUP, _CROSSING = 0, 3, 4


@njit(cache=True, inline="always")
def _deriv(br, bi, pe, sr, si, nu0, gm, omega, gamma, temperature, bexp, bath_on):
    delta = 2.0 * gm * br
    nu = nu0 + delta
    gamma_t = 0.0
    nbar = 0.0
    crossing = False
    if bath_on:
        if nu <= 0.0:
            crossing = True
        else:
            gamma_t = gamma
            if bexp != 0:
                gamma_t = gamma * (nu / nu0) ** bexp
            if temperature > 0.0:
                x = nu / temperature
                nbar = math.exp(-x) / -math.expm1(-x)
    decay = gamma_t * (2.0 * nbar + 1.0)
    dbr = omega * bi
    dbi = -(omega * br + gm * pe)
    dn = -2.0 * gm * pe * bi
    dpe = -decay * pe + gamma_t * nbar
    dsr = delta * si - 0.5 * decay * sr
    dsi = -delta * sr - 0.5 * decay * si
    dw = 2.0 * gm * omega * pe * bi
    dq = nu * dpe
    return dbr, dbi, dn, dpe, dsr, dsi, dw, dq, crossing


@njit(cache=True)
def _advance(y, acc, n_steps, dt, nu0, gm, omega, gamma, temperature, bexp, bath_on):
    """RK4 for n_steps; y = [Re b, Im b, N, P_e, Re s, Im s] is updated in place.

    N itself is not advanced here. Its increment, the work, the heat and the
    increments of Re b and P_e are summed into acc = [dN, w, q, dRe b, dP_e]
    so that small changes are not swamped by the large absolute values.
    Returns (status, steps_completed).
    """
    br, bi, pe, sr, si = y[0], y[1], y[3], y[4], y[5]
    h2 = 0.5 * dt
    h6 = dt / 6.0
    for k in range(n_steps):
        a1, b1, n1, p1, r1, i1, w1, q1, c1 = _deriv(
            br, bi, pe, sr, si, nu0, gm, omega, gamma, temperature, bexp, bath_on)
        a2, b2, n2, p2, r2, i2, w2, q2, c2 = _deriv(
            br + h2 * a1, bi + h2 * b1, pe + h2 * p1, sr + h2 * r1, si + h2 * i1,
            nu0, gm, omega, gamma, temperature, bexp, bath_on)
        a3, b3, n3, p3, r3, i3, w3, q3, c3 = _deriv(
            br + h2 * a2, bi + h2 * b2, pe + h2 * p2, sr + h2 * r2, si + h2 * i2,
            nu0, gm, omega, gamma, temperature, bexp, bath_on)
        a4, b4, n4, p4, r4, i4, w4, q4, c4 = _deriv(
            br + dt * a3, bi + dt * b3, pe + dt * p3, sr + dt * r3, si + dt * i3,
            nu0, gm, omega, gamma, temperature, bexp, bath_on)
        if c1 or c2 or c3 or c4:
            y[0], y[1], y[3], y[4], y[5] = br, bi, pe, sr, si
            return _CROSSING, k
        nbr = br + h6 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        nbi = bi + h6 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        npe = pe + h6 * (p1 + 2.0 * p2 + 2.0 * p3 + p4)
        nsr = sr + h6 * (r1 + 2.0 * r2 + 2.0 * r3 + r4)
        nsi = si + h6 * (i1 + 2.0 * i2 + 2.0 * i3 + i4)
        dn = h6 * (n1 + 2.0 * n2 + 2.0 * n3 + n4)
        dw = h6 * (w1 + 2.0 * w2 + 2.0 * w3 + w4)
        dq = h6 * (q1 + 2.0 * q2 + 2.0 * q3 + q4)
        if not (math.isfinite(nbr) and math.isfinite(nbi) and math.isfinite(npe)
                and math.isfinite(nsr) and math.isfinite(nsi) and math.isfinite(dn)
                and math.isfinite(dw) and math.isfinite(dq)):
            y[0], y[1], y[3], y[4], y[5] = br, bi, pe, sr, si
            return _BLOWUP, k
        acc[3] += h6 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        acc[4] += h6 * (p1 + 2.0 * p2 + 2.0 * p3 + p4)
        br, bi, pe, sr, si = nbr, nbi, npe, nsr, nsi
        acc[0] += dn
        acc[1] += dw
        acc[2] += dq
    y[0], y[1], y[3], y[4], y[5] = br, bi, pe, sr, si
    return _OK, n_steps


def _run_kernel(state, params, bath_on, dt, n_steps, t_start):
    """Advance ``n_steps`` steps; returns (new_state, dW, dQ, (dN, dRe beta, dP_e))."""
    y = state.as_array()
    acc = np.zeros(5)
    status, done = _advance(y, acc, int(n_steps), float(dt), float(params.nu0),
                            float(params.gm), float(params.omega), float(params.gamma),
                            float(params.temperature), int(params.bath_exponent),
                            bool(bath_on))
    y[2] = state.n_phonon + acc[0]
    new = MeanFieldState.from_array(y)
    if status == _CROSSING:
        t = t_start + done * dt
        raise LevelCrossingError(
            f"TLS frequency nu0 + delta became nonpositive near t = {t:.6g} "
            f"(beta = {new.beta:.6g})", state=new, t=t)
    if status == _BLOWUP:
        t = t_start + done * dt
        raise IntegrationBlowupError(
            f"integration produced non-finite values at t = {t:.6g}; last finite state {new}",
            state=new, t=t)
    return new, float(acc[1]), float(acc[2]), (float(acc[0]), float(acc[3]), float(acc[4]))


Observer = Callable[[float, MeanFieldState, object], None]

# a trailing fraction of a step shorter than this (relative to dt) is dropped
_PARTIAL_STEP_CUTOFF = 1e-9


def segment_schedule(duration: float, dt: float, sample_every: int):
    """Chunks (n_steps, step_size) covering ``duration``; one chunk per sample."""
    n_full = int(math.floor(duration / dt))
    remainder = duration - n_full * dt
    if remainder < -_PARTIAL_STEP_CUTOFF * dt:
        n_full -= 1
        remainder += dt
    chunks = []
    done = 0
    while done < n_full:
        n = min(sample_every, n_full - done)
        chunks.append((n, dt))
        done += n
    if remainder > _PARTIAL_STEP_CUTOFF * dt:
        chunks.append((1, remainder))
    return chunks


def evolve_segment(state: MeanFieldState, params, segment: SegmentSpec,
                   observer: Optional[Observer] = None, ledger=None,
                   t0: float = 0.0, check_ledger: bool = True):
    """Integrate one segment, landing exactly on ``segment.duration``.

    ``observer(t, state, ledger)`` is called after every ``sample_every``
    steps and after the final step. Returns ``(state, ledger)``.
    """
    from .energetics import EnergyLedger

    if ledger is None:
        ledger = EnergyLedger.start(state, params)
    if segment.duration == 0:
        return state, ledger
    dt = segment.step_size(params)
    t = t0
    n_done = 0
    full_steps_t = t0
    for n, h in segment_schedule(segment.duration, dt, segment.sample_every):
        state, dw, dq, increments = _run_kernel(state, params, segment.bath_on, h, n, t)
        if h == dt:
            n_done += n
            t = full_steps_t + n_done * dt
        else:
            t = t0 + segment.duration
        ledger = ledger.advance(state, params, dw, dq, increments, steps=n)
        if check_ledger:
            ledger.check(params)
            state.check()
        if observer is not None:
            observer(t, state, ledger)
    return state, ledger
