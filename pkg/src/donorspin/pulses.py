"""Pulse envelopes and control-schedule factories.

Envelopes are symbolic compositions of named primitives so integrators can
sample exact values at any time step. Every factory-produced schedule
starts and ends at the idling point with the AC drives off.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .model import TWO_PI, SystemParams, charge_splitting, hyperfine_expectation


class Envelope:
    """Real-valued function of time; zero outside its support."""

    def value(self, t):
        raise NotImplementedError

    def derivative(self, t):
        raise NotImplementedError

    def __call__(self, t):
        return self.value(np.asarray(t, dtype=float))

    def is_zero(self) -> bool:
        return False


@dataclass(frozen=True)
class Constant(Envelope):
    level: float

    def value(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.level)

    def derivative(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def is_zero(self):
        return self.level == 0.0

    def serialize(self):
        return f"constant({float(self.level)!r})"


@dataclass(frozen=True)
class Window(Envelope):
    """Cosine window: half-cosine rise over tau, flat top, mirrored fall.

    w(t) = (1 - cos(pi t / tau))/2 on [0, tau), 1 on [tau, T - tau),
    (1 - cos(pi (T - t)/tau))/2 on [T - tau, T], and 0 outside [0, T].
    """

    tau: float
    duration: float

    def __post_init__(self):
        if not 0 < self.tau <= self.duration / 2:
            raise ValueError("window requires 0 < tau <= duration/2")

    def value(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        tau, T = self.tau, self.duration
        m = (t >= 0) & (t < tau)
        out[m] = (1 - np.cos(np.pi * t[m] / tau)) / 2
        m = (t >= tau) & (t < T - tau)
        out[m] = 1.0
        m = (t >= T - tau) & (t <= T)
        out[m] = (1 - np.cos(np.pi * (T - t[m]) / tau)) / 2
        return out

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        tau, T = self.tau, self.duration
        m = (t >= 0) & (t < tau)
        out[m] = np.pi / (2 * tau) * np.sin(np.pi * t[m] / tau)
        m = (t >= T - tau) & (t <= T)
        out[m] = -np.pi / (2 * tau) * np.sin(np.pi * (T - t[m]) / tau)
        return out

    def serialize(self):
        return f"window({float(self.tau)!r}, {float(self.duration)!r})"


@dataclass(frozen=True)
class Ramp(Envelope):
    """Piecewise-linear: 0 -> y1 at tau1 -> y2 at tau2 -> 0 at duration."""

    tau1: float
    y1: float
    tau2: float
    y2: float
    duration: float

    def __post_init__(self):
        if not 0 < self.tau1 < self.tau2 < self.duration:
            raise ValueError("ramp requires 0 < tau1 < tau2 < duration")

    def value(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        m = (t >= 0) & (t < self.tau1)
        out[m] = self.y1 * t[m] / self.tau1
        m = (t >= self.tau1) & (t < self.tau2)
        out[m] = self.y1 + (self.y2 - self.y1) * (t[m] - self.tau1) / (self.tau2 - self.tau1)
        m = (t >= self.tau2) & (t <= self.duration)
        out[m] = self.y2 * (self.duration - t[m]) / (self.duration - self.tau2)
        return out

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        m = (t >= 0) & (t < self.tau1)
        out[m] = self.y1 / self.tau1
        m = (t >= self.tau1) & (t < self.tau2)
        out[m] = (self.y2 - self.y1) / (self.tau2 - self.tau1)
        m = (t >= self.tau2) & (t <= self.duration)
        out[m] = -self.y2 / (self.duration - self.tau2)
        return out

    def serialize(self):
        return (f"ramp({float(self.tau1)!r}, {float(self.y1)!r}, "
                f"{float(self.tau2)!r}, {float(self.y2)!r}, "
                f"{float(self.duration)!r})")


@dataclass(frozen=True)
class Scaled(Envelope):
    factor: float
    inner: Envelope

    def value(self, t):
        return self.factor * self.inner.value(t)

    def derivative(self, t):
        return self.factor * self.inner.derivative(t)

    def is_zero(self):
        return self.factor == 0.0 or self.inner.is_zero()

    def serialize(self):
        return f"scaled({float(self.factor)!r}, {self.inner.serialize()})"


@dataclass(frozen=True)
class Squared(Envelope):
    inner: Envelope

    def value(self, t):
        return self.inner.value(t) ** 2

    def derivative(self, t):
        return 2 * self.inner.value(t) * self.inner.derivative(t)

    def is_zero(self):
        return self.inner.is_zero()

    def serialize(self):
        return f"squared({self.inner.serialize()})"


@dataclass(frozen=True)
class Shifted(Envelope):
    """inner evaluated at t - offset."""

    offset: float
    inner: Envelope

    def value(self, t):
        return self.inner.value(np.asarray(t, dtype=float) - self.offset)

    def derivative(self, t):
        return self.inner.derivative(np.asarray(t, dtype=float) - self.offset)

    def is_zero(self):
        return self.inner.is_zero()

    def serialize(self):
        return f"shifted({float(self.offset)!r}, {self.inner.serialize()})"


@dataclass(frozen=True)
class Sum(Envelope):
    terms: tuple

    def value(self, t):
        out = np.zeros_like(np.asarray(t, dtype=float))
        for term in self.terms:
            out = out + term.value(t)
        return out

    def derivative(self, t):
        out = np.zeros_like(np.asarray(t, dtype=float))
        for term in self.terms:
            out = out + term.derivative(t)
        return out

    def is_zero(self):
        return all(term.is_zero() for term in self.terms)

    def serialize(self):
        inner = ", ".join(term.serialize() for term in self.terms)
        return f"sum({inner})"


ZERO = Constant(0.0)


def window(t, tau, T):
    """Cosine window value; functional form of the Window primitive."""
    return Window(tau, T).value(t)


def ramp(t, tau1, y1, tau2, y2, T):
    """Piecewise-linear ramp value; functional form of the Ramp primitive."""
    return Ramp(tau1, y1, tau2, y2, T).value(t)


# ---------------------------------------------------------------------------
# envelope (de)serialization: name(arg, ...) with nested envelopes
_TOKEN = re.compile(r"\s*([a-z]+)\s*\(")


def parse_envelope(text: str) -> Envelope:
    env, rest = _parse_one(text)
    if rest.strip():
        raise ValueError(f"trailing input in envelope text: {rest!r}")
    return env


def _parse_one(text):
    m = _TOKEN.match(text)
    if not m:
        raise ValueError(f"expected envelope primitive at {text[:40]!r}")
    name = m.group(1)
    rest = text[m.end():]
    args = []
    while True:
        rest = rest.lstrip()
        if rest.startswith(")"):
            rest = rest[1:]
            break
        if rest.startswith(","):
            rest = rest[1:].lstrip()
        if _TOKEN.match(rest):
            sub, rest = _parse_one(rest)
            args.append(sub)
        else:
            m2 = re.match(r"[^,()]+", rest)
            if not m2:
                raise ValueError(f"bad envelope argument at {rest[:40]!r}")
            args.append(float(m2.group(0)))
            rest = rest[m2.end():]
    makers = {
        "constant": lambda a: Constant(a[0]),
        "window": lambda a: Window(a[0], a[1]),
        "ramp": lambda a: Ramp(*a),
        "scaled": lambda a: Scaled(a[0], a[1]),
        "squared": lambda a: Squared(a[0]),
        "shifted": lambda a: Shifted(a[0], a[1]),
        "sum": lambda a: Sum(tuple(a)),
    }
    if name not in makers:
        raise ValueError(f"unknown envelope primitive {name!r}")
    return makers[name](args), rest


# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class PulseSchedule:
    """Three control envelopes plus the two drive frequencies.

    dE_envelope is the absolute field offset trajectory (V/m), Ea_envelope
    and Ba_envelope the AC drive amplitudes (V/m, T). Drive phases restart
    at zero at the start of each schedule.
    """

    dE_envelope: Envelope
    Ea_envelope: Envelope
    Ba_envelope: Envelope
    omega_E: float
    omega_B: float
    total_time: float
    label: str = ""

    def sample(self, t):
        return (self.dE_envelope.value(t), self.Ea_envelope.value(t),
                self.Ba_envelope.value(t))

    def serialize(self) -> str:
        lines = [
            f"label = {self.label}",
            f"total_time = {float(self.total_time)!r}",
            f"omega_E = {float(self.omega_E)!r}",
            f"omega_B = {float(self.omega_B)!r}",
            f"dE_envelope = {self.dE_envelope.serialize()}",
            f"Ea_envelope = {self.Ea_envelope.serialize()}",
            f"Ba_envelope = {self.Ba_envelope.serialize()}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def deserialize(cls, text: str) -> "PulseSchedule":
        fields = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
        return cls(
            dE_envelope=parse_envelope(fields["dE_envelope"]),
            Ea_envelope=parse_envelope(fields["Ea_envelope"]),
            Ba_envelope=parse_envelope(fields["Ba_envelope"]),
            omega_E=float(fields["omega_E"]),
            omega_B=float(fields["omega_B"]),
            total_time=float(fields["total_time"]),
            label=fields.get("label", ""),
        )


# default drive setup of the sweep-style gates: field drive referenced to
# the charge splitting at the sweep midpoint dE = 0
SWEEP_TAU1 = 5e-9
SWEEP_DURATION = 110e-9
SWEEP_RANGE = 2000.0
SWEEP_EA_PEAK = 255.2          # V/m
SWEEP_BA_PEAK = 33.26e-3       # T
SWEEP_EA_DETUNING = TWO_PI * 232.428e6
SWEEP_BA_DETUNING = TWO_PI * 217.096e6
CPHASE_DETUNING = -TWO_PI * 10e6
CPHASE_EA_PEAK = 40.0          # V/m
CPHASE_TAU2_CAP = 300e-9


def idle_frequencies(params: SystemParams):
    """Reference (omega_E, omega_B) for drive-free schedules."""
    return charge_splitting(params, params.dE_idle), params.B0 * params.gamma_e


def make_rz_schedule(params: SystemParams, T: float) -> PulseSchedule:
    """Z-rotation pulse: dip dE from idle toward -dE_idle and back.

    dE(t) = dE_idle - S*w(t, tau, T) with tau = min(5 ns, T/2) and
    S = 2e4 V/m * min(1, T / 10 ns); no AC drives.
    """
    if T <= 0:
        raise ValueError("T must be positive")
    tau = min(5e-9, T / 2)
    S = 2e4 * min(1.0, T / 10e-9)
    dE = Sum((Constant(params.dE_idle), Scaled(-S, Window(tau, T))))
    wE, wB = idle_frequencies(params)
    return PulseSchedule(dE, ZERO, ZERO, wE, wB, T, label=f"rz(T={T:.4g})")


def sweep_drive_frequencies(params: SystemParams,
                            ea_detuning: float = SWEEP_EA_DETUNING,
                            ba_detuning: float = SWEEP_BA_DETUNING):
    """Drive frequencies of the sweep gate; eps0 evaluated at dE = 0."""
    omega_E = charge_splitting(params, 0.0) - ea_detuning
    omega_B = params.B0 * params.gamma_e - params.hyperfine_A / 4 - ba_detuning
    return omega_E, omega_B


def _sweep_ac(lam: float, tau1: float, tau2: float):
    win2 = Squared(Window(tau2 / 5, tau2))
    Ea = Scaled(lam * SWEEP_EA_PEAK, Shifted(tau1, win2))
    Ba = Scaled(lam * SWEEP_BA_PEAK, Shifted(tau1, win2))
    return Ea, Ba


def make_rx_sweep_schedule(params: SystemParams, lam: float,
                           sweep_range: float = SWEEP_RANGE,
                           omega_E: float | None = None,
                           omega_B: float | None = None) -> PulseSchedule:
    """X-rotation sweep gate: dE crosses zero at a fixed rate while the two
    AC drives are on; lam in [0, 1] scales both drive amplitudes."""
    if not 0 <= lam <= 1:
        raise ValueError("lam must be in [0, 1]")
    tau1, taus = SWEEP_TAU1, SWEEP_DURATION
    T = 2 * tau1 + taus
    tau2 = tau1 + taus
    D = sweep_range
    dE = Sum((Constant(params.dE_idle),
              Ramp(tau1, -params.dE_idle - D, tau1 + taus, -params.dE_idle + D, T)))
    Ea, Ba = _sweep_ac(lam, tau1, tau2)
    wE0, wB0 = sweep_drive_frequencies(params)
    return PulseSchedule(dE, Ea, Ba,
                         omega_E if omega_E is not None else wE0,
                         omega_B if omega_B is not None else wB0,
                         T, label=f"rx-sweep(lam={lam:.4g})")


def make_naive_rx_schedule(params: SystemParams, lam: float,
                           omega_E: float | None = None,
                           omega_B: float | None = None) -> PulseSchedule:
    """Sweep-free X gate: dE parked at 0 during the drive segment."""
    if not 0 <= lam <= 1:
        raise ValueError("lam must be in [0, 1]")
    tau1, taus = SWEEP_TAU1, SWEEP_DURATION
    T = 2 * tau1 + taus
    tau2 = tau1 + taus
    dE = Sum((Constant(params.dE_idle),
              Ramp(tau1, -params.dE_idle, tau1 + taus, -params.dE_idle, T)))
    Ea, Ba = _sweep_ac(lam, tau1, tau2)
    wE0, wB0 = sweep_drive_frequencies(params)
    return PulseSchedule(dE, Ea, Ba,
                         omega_E if omega_E is not None else wE0,
                         omega_B if omega_B is not None else wB0,
                         T, label=f"rx-naive(lam={lam:.4g})")


def make_echo_rz_schedule(params: SystemParams, flat_time: float,
                          tau1: float = 5e-9) -> PulseSchedule:
    """Deliberately noise-sensitive idle at nominal dE = 0.

    Cosine ramps (duration tau1) take dE from idle to 0 and back around a
    flat segment of length flat_time.
    """
    if flat_time < 0:
        raise ValueError("flat_time must be non-negative")
    T = 2 * tau1 + flat_time
    dE = Sum((Constant(params.dE_idle),
              Scaled(-params.dE_idle, Window(tau1, T))))
    wE, wB = idle_frequencies(params)
    return PulseSchedule(dE, ZERO, ZERO, wE, wB, T,
                         label=f"rz-echo(t={flat_time:.4g})")


def cphase_drive_frequency(params: SystemParams, dE_gate: float,
                           detuning: float = CPHASE_DETUNING) -> float:
    """Drive frequency near the dn-state orbital transition at dE_gate."""
    e0 = charge_splitting(params, dE_gate)
    a_mean = hyperfine_expectation(params, dE_gate)
    return e0 + params.hyperfine_A / 4 - a_mean / 2 + detuning


def make_cphase_schedule(params: SystemParams, T: float,
                         dE_gate: float = 2000.0,
                         detuning: float = CPHASE_DETUNING,
                         omega_E: float | None = None) -> PulseSchedule:
    """Entangling pulse: park dE at +dE_gate and drive the electric field
    near the dn-sector orbital transition. No magnetic drive."""
    tau1 = 5e-9
    if T <= 2 * tau1:
        raise ValueError("T must exceed 10 ns")
    tau_ac = T - 2 * tau1
    tau2 = min(CPHASE_TAU2_CAP, tau_ac / 2)
    e_max = CPHASE_EA_PEAK * min(1.0, (T / 300e-9) ** 2)
    dE = Sum((Constant(params.dE_idle),
              Ramp(tau1, -params.dE_idle + dE_gate, tau1 + tau_ac,
                   -params.dE_idle + dE_gate, T)))
    Ea = Scaled(e_max, Shifted(tau1, Window(tau2, tau_ac)))
    wE = omega_E if omega_E is not None else cphase_drive_frequency(
        params, dE_gate, detuning)
    wB = params.B0 * params.gamma_e
    return PulseSchedule(dE, Ea, ZERO, wE, wB, T, label=f"cphase(T={T:.4g})")


def make_idle_schedule(params: SystemParams, T: float) -> PulseSchedule:
    """Hold everything at the idling point for time T."""
    wE, wB = idle_frequencies(params)
    return PulseSchedule(Constant(params.dE_idle), ZERO, ZERO, wE, wB, T,
                         label=f"idle(T={T:.4g})")
