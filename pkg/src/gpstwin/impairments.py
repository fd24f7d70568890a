"""Interference waveforms and multipath replica descriptions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import C, F_CA

INTERFERENCE_KINDS = ("chirp", "cwi", "fmcw", "pulse")
MAX_PATHS = 8


class ImpairmentError(ValueError):
    pass


@dataclass(frozen=True)
class InterferenceSpec:
    """One interferer. ``amplitude`` is sqrt(W); ``js_db`` sets it relative to a reference PRN instead."""
    kind: str
    amplitude: float | None = None
    js_db: float | None = None
    reference_prn: int | None = None
    f0: float = 0.0            # chirp start frequency, Hz
    sweep_rate: float = 0.0    # chirp k, Hz/s
    f_i: float = 0.0           # cwi / fmcw / pulse tone frequency, Hz
    phase: float = 0.0         # rad
    beta: float = 0.0          # fmcw modulation index, rad
    f_m: float = 0.0           # fmcw modulation rate, Hz
    width: float = 0.0         # pulse width, s
    period: float = 0.0        # pulse repetition interval, s
    pattern: tuple = ()        # pulse duty pattern over successive periods, 1 = on
    start: float = 0.0         # s after scenario start
    stop: float | None = None

    def validate(self, fs=None):
        if self.kind not in INTERFERENCE_KINDS:
            raise ImpairmentError(f"unknown interference kind {self.kind!r}")
        if self.amplitude is None and self.js_db is None:
            raise ImpairmentError("interference needs amplitude or js_db")
        if self.amplitude is not None and self.amplitude < 0:
            raise ImpairmentError("interference amplitude must be >= 0")
        if self.stop is not None and self.stop <= self.start:
            raise ImpairmentError("interference stop must follow start")
        if self.kind == "pulse":
            if not 0 < self.width < self.period:
                raise ImpairmentError("pulse width must be positive and below the repetition interval")
            if any(p not in (0, 1) for p in self.pattern):
                raise ImpairmentError("pulse pattern entries must be 0 or 1")
        if self.kind == "chirp" and fs is not None:
            span = (self.stop - self.start) if self.stop is not None else None
            f_end = self.f0 + self.sweep_rate * span if span is not None else None
            if abs(self.f0) > fs / 2 or (f_end is not None and abs(f_end) > fs / 2):
                raise ImpairmentError("chirp leaves the +-fs/2 band during its active window")

    def with_amplitude(self, amplitude):
        return InterferenceSpec(**{**self.__dict__, "amplitude": float(amplitude)})


@dataclass(frozen=True)
class ReflectedPath:
    alpha: float               # amplitude ratio to the direct path
    delay: float               # excess code delay, s
    phase: float = 0.0         # extra carrier phase, rad
    ramp: float = 0.0          # excess-delay rate, s/s


@dataclass(frozen=True)
class MultipathSpec:
    prn: int
    paths: tuple = field(default_factory=tuple)

    def validate(self, fs=None):
        if len(self.paths) > MAX_PATHS:
            raise ImpairmentError(f"PRN {self.prn}: more than {MAX_PATHS} reflected paths")
        for p in self.paths:
            if not 0.0 <= p.alpha <= 1.0:
                raise ImpairmentError(f"PRN {self.prn}: path amplitude ratio {p.alpha} outside [0, 1]")
            if p.delay <= 0:
                raise ImpairmentError(f"PRN {self.prn}: excess delay must be > 0")

    def sub_sample(self, fs):
        """Flags for paths whose delay is below one sample (carried as code offsets)."""
        return [p.delay < 1.0 / fs for p in self.paths]


def _active(spec: InterferenceSpec, t):
    on = t >= spec.start
    if spec.stop is not None:
        on &= t < spec.stop
    return on


def gen_interference(spec: InterferenceSpec, t0, n, fs):
    """Interference samples for ``n`` samples starting ``t0`` s after scenario start.

    Time is measured from the interferer's own start so the waveform does not
    depend on where block boundaries fall.
    """
    spec.validate(fs)
    if spec.amplitude is None:
        raise ImpairmentError("interference amplitude unresolved (js_db needs a reference power)")
    t = t0 + np.arange(n, dtype=np.float64) / fs
    tau = t - spec.start
    a = spec.amplitude
    if spec.kind == "chirp":
        ph = 2 * np.pi * (spec.f0 * tau + 0.5 * spec.sweep_rate * tau * tau) + spec.phase
        x = a * np.exp(1j * ph)
    elif spec.kind == "cwi":
        x = a * np.exp(1j * (2 * np.pi * spec.f_i * tau + spec.phase))
    elif spec.kind == "fmcw":
        x = a * np.exp(1j * (2 * np.pi * spec.f_i * tau + spec.phase
                             + spec.beta * np.sin(2 * np.pi * spec.f_m * tau)))
    else:
        k = np.floor(tau / spec.period).astype(np.int64)
        gate = (tau - k * spec.period) < spec.width
        if spec.pattern:
            pat = np.asarray(spec.pattern, dtype=bool)
            gate &= pat[np.mod(k, len(pat))]
        x = a * gate * np.exp(1j * (2 * np.pi * spec.f_i * tau + spec.phase))
    return np.where(_active(spec, t), x, 0.0).astype(np.complex128)


def resolve_amplitude(spec: InterferenceSpec, reference_power):
    """Amplitude from J/S in dB relative to a reference carrier power (W)."""
    if spec.amplitude is not None:
        return spec
    return spec.with_amplitude(np.sqrt(reference_power * 10 ** (spec.js_db / 10)))


def path_offsets(spec: MultipathSpec | None):
    """Replica parameters (extra delay s, delay ramp s/s, phase rad, amplitude ratio)."""
    if spec is None:
        return []
    return [(p.delay, p.ramp, p.phase, p.alpha) for p in spec.paths]


def two_ray_dll_bias(alpha, delay_chips, phase, spacing=0.5):
    """Tracking-point shift (chips) of a coherent early-late DLL on a two-ray channel.

    R(e) = tri(e) + alpha*cos(phase)*tri(e - delay) is the composite
    correlation against a replica lagged by e chips; the DLL settles where
    R(e - d/2) = R(e + d/2). Positive means the tracked code is late.
    """
    from scipy.optimize import brentq

    def r(e):
        return np.maximum(1 - np.abs(e), 0) + alpha * np.cos(phase) * np.maximum(1 - np.abs(e - delay_chips), 0)

    def f(e):
        return r(e - spacing / 2) - r(e + spacing / 2)

    # the reflection can only pull the lock point late, and f < 0 at -d/2;
    # take the first crossing so a far echo cannot select a spurious root
    e = np.linspace(-spacing / 2, spacing / 2 + delay_chips, 4001)
    v = f(e)
    i = int(np.argmax(v >= 0))
    if v[i] == 0:
        return float(e[i])
    return float(brentq(f, e[i - 1], e[i], xtol=1e-12))


def excess_delay_chips(delay_s):
    return delay_s * F_CA


def excess_range(delay_s):
    return delay_s * C
