"""Per-satellite truth: geometry, atmosphere and link budget.

The central object is :class:`TruthTrack`, a dense (100 Hz) record of what
the receiver should observe from one satellite. Its code delay ``D`` is the
pseudorange divided by c, i.e. receiver clock reading minus satellite clock
reading at emission. Both the signal synthesizer and the truth CSVs are
derived from it, which is what keeps the IF stream and the truth consistent.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .atmosphere import (MAGNUS_PRINTED, klobuchar_delay, klobuchar_slant_factor, saastamoinen_ztd,
                         slant_tropo, standard_meteo, tropo_mapping)
from .constants import C, F_L1, OMEGA_E
from .orbits import clock_correction, ecef_to_geodetic, elevation_azimuth, rotate_earth, sat_state_at

__all__ = [
    "los_doppler", "propagation_delay", "received_power", "free_space_loss_db",
    "AntennaPattern", "TruthObservable", "TruthTrack", "ChannelModel", "ClockModel",
    "klobuchar_delay", "saastamoinen_ztd", "slant_tropo",
]


def los_doppler(r_s, v_s, r_u, v_u, f_tx=F_L1):
    """Doppler from the relative velocity projected on the line of sight."""
    d = np.asarray(r_s, float) - np.asarray(r_u, float)
    dv = np.asarray(v_s, float) - np.asarray(v_u, float)
    rng = np.linalg.norm(d, axis=-1)
    return -(f_tx / C) * np.sum(dv * d, axis=-1) / rng


def propagation_delay(r_s, r_u, iono=0.0, tropo=0.0):
    if np.any(np.asarray(iono) < 0) or np.any(np.asarray(tropo) < 0):
        raise ValueError("atmospheric delays must be non-negative")
    rng = np.linalg.norm(np.asarray(r_s, float) - np.asarray(r_u, float), axis=-1)
    return rng / C + iono / C + tropo / C


def free_space_loss_db(range_m, f=F_L1):
    lam = C / f
    return 20.0 * np.log10(4.0 * np.pi * np.asarray(range_m, float) / lam)


def received_power(p_tx, g_tx_dbi, g_rx_dbi, range_m, f=F_L1, l_atm=1.0, n0=None):
    """Friis carrier power in W, and C/N0 in dB-Hz when ``n0`` (W/Hz) is given."""
    if np.any(np.asarray(range_m) <= 0):
        raise ValueError("range must be positive")
    if not 0 < l_atm <= 1:
        raise ValueError("l_atm must lie in (0, 1]")
    lam = C / f
    g = 10.0 ** ((np.asarray(g_tx_dbi, float) + np.asarray(g_rx_dbi, float)) / 10.0)
    c = p_tx * g * (lam / (4.0 * np.pi * np.asarray(range_m, float))) ** 2 * l_atm
    cn0 = None if n0 is None or n0 <= 0 else 10.0 * np.log10(c / n0)
    return c, cn0


@dataclass(frozen=True)
class AntennaPattern:
    """Gain in dBi tabulated against elevation in radians."""
    elevation: np.ndarray
    gain_db: np.ndarray

    def __post_init__(self):
        el = np.asarray(self.elevation, float)
        g = np.asarray(self.gain_db, float)
        if el.size < 2 or el.shape != g.shape:
            raise ValueError("antenna table needs >= 2 matching knots")
        if np.any(np.diff(el) <= 0):
            raise ValueError("antenna table elevations must increase")
        if not np.all(np.isfinite(g)):
            raise ValueError("antenna gains must be finite")

    def __call__(self, elevation):
        return np.interp(elevation, self.elevation, self.gain_db)

    @classmethod
    def isotropic(cls, gain_db=0.0):
        return cls(np.array([0.0, np.pi / 2]), np.array([gain_db, gain_db]))

    @classmethod
    def from_file(cls, path):
        """Two-column text table: elevation_deg gain_dBi; '#' starts a comment."""
        data = np.loadtxt(Path(path), comments="#", ndmin=2)
        return cls(np.deg2rad(data[:, 0]), data[:, 1])

    @classmethod
    def default_patch(cls):
        deg = np.array([0.0, 10.0, 20.0, 40.0, 90.0])
        return cls(np.deg2rad(deg), np.array([-4.0, -2.0, -1.0, 0.0, 1.0]))


@dataclass(frozen=True)
class ClockModel:
    """Receiver clock: reading minus true GPS time = bias + drift*(t - t_ref)."""
    bias: float = 0.0
    drift: float = 0.0
    t_ref: float = 0.0

    def offset(self, t_rx):
        return self.bias + self.drift * (np.asarray(t_rx, float) - self.t_ref)

    def true_time(self, t_rx):
        # exact inverse of t_rx = t + b0 + d*(t_rx - t_ref) in receiver time
        return np.asarray(t_rx, float) - self.offset(t_rx)


@dataclass(frozen=True)
class TruthObservable:
    t_rx: float
    prn: int
    geometric_range: float
    tau_total: float
    iono_delay: float
    tropo_delay: float
    doppler: float
    elevation: float
    carrier_power: float
    cn0: float


@dataclass
class TruthTrack:
    """Dense truth for one satellite on a uniform receiver-time grid."""
    prn: int
    t_rx: np.ndarray            # receiver clock time, s of week
    code_delay: np.ndarray      # D = pseudorange / c, s
    code_rate: np.ndarray       # dD/dt_rx
    carrier_delay: np.ndarray   # D minus ionospheric advance
    carrier_rate: np.ndarray
    geometric_range: np.ndarray
    tau_total: np.ndarray
    iono: np.ndarray
    tropo: np.ndarray
    elevation: np.ndarray
    azimuth: np.ndarray
    carrier_power: np.ndarray
    cn0: np.ndarray
    sat_clock: np.ndarray
    r_s: np.ndarray
    v_s: np.ndarray
    r_u: np.ndarray
    v_u: np.ndarray
    geometric_doppler: np.ndarray = field(default=None)

    @property
    def doppler(self):
        return -F_L1 * self.carrier_rate

    @property
    def pseudorange(self):
        return C * self.code_delay

    @property
    def step(self):
        return float(self.t_rx[1] - self.t_rx[0])

    def index_of(self, t_rx):
        return (np.asarray(t_rx, float) - self.t_rx[0]) / self.step

    def interp(self, name, t_rx):
        """Cubic Hermite for the two delays, linear for everything else."""
        x = np.asarray(t_rx, float)
        if name in ("code_delay", "carrier_delay"):
            rate = self.code_rate if name == "code_delay" else self.carrier_rate
            return hermite_eval(self.t_rx, getattr(self, name), rate, x)
        if name == "doppler":
            return np.interp(x, self.t_rx, self.doppler)
        return np.interp(x, self.t_rx, getattr(self, name))

    def observable(self, i) -> TruthObservable:
        return TruthObservable(float(self.t_rx[i]), self.prn, float(self.geometric_range[i]),
                               float(self.tau_total[i]), float(self.iono[i]), float(self.tropo[i]),
                               float(self.doppler[i]), float(self.elevation[i]),
                               float(self.carrier_power[i]), float(self.cn0[i]))


def hermite_eval(tk, yk, dk, t):
    """Evaluate the cubic Hermite interpolant through (tk, yk, dk) at ``t``."""
    h = tk[1] - tk[0]
    j = np.clip(np.floor((t - tk[0]) / h).astype(int), 0, len(tk) - 2)
    s = (t - tk[j]) / h
    y0, y1 = yk[j], yk[j + 1]
    m0, m1 = dk[j] * h, dk[j + 1] * h
    s2, s3 = s * s, s * s * s
    return ((2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * m0
            + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * m1)


@dataclass
class ChannelModel:
    """Everything needed to turn geometry into per-satellite truth."""
    clock: ClockModel = ClockModel()
    ionosphere: bool = True
    troposphere: bool = True
    carrier_advance: bool = True
    sagnac: bool = True
    meteo: tuple | None = None              # (hPa, deg C, rh); None -> standard atmosphere
    magnus_denominator: float = MAGNUS_PRINTED
    tx_power_w: float = 26.8
    tx_gain_dbi: float = 13.0
    rx_pattern: AntennaPattern = field(default_factory=AntennaPattern.default_patch)
    l_atm: float = 1.0
    n0: float = 10 ** (-204 / 10)
    cn0_override: float | None = None
    light_time_iterations: int = 3
    derivative_step: float = 1e-3

    def tropo_zenith(self, lat, h):
        if self.meteo is None:
            p, t, rh = standard_meteo(h)
        else:
            p, t, rh = self.meteo
        return saastamoinen_ztd(p, t, rh, lat, np.asarray(h, float) / 1000.0, self.magnus_denominator)

    def _delays(self, eph, trajectory, t_rx):
        t_true = self.clock.true_time(t_rx)
        r_u, v_u = trajectory.state_at(t_true)
        lat, lon, h = ecef_to_geodetic(r_u)
        tau = np.full_like(t_true, 0.075)
        iono = np.zeros_like(t_true)
        tropo = np.zeros_like(t_true)
        for _ in range(self.light_time_iterations):
            st = sat_state_at(eph, t_true - tau)
            ang = OMEGA_E * tau if self.sagnac else np.zeros_like(tau)
            r_s = rotate_earth(st.r_s, ang)
            geo = np.linalg.norm(r_s - r_u, axis=-1)
            el, az = elevation_azimuth(r_u, r_s)
            if self.ionosphere:
                iono = klobuchar_delay(eph.klobuchar_alpha, eph.klobuchar_beta, lat, lon, el, az, t_true)
            if self.troposphere:
                tropo = self.tropo_zenith(lat, h) * tropo_mapping(np.maximum(el, 0.0))
            tau = geo / C + (iono + tropo) / C
        v_s = rotate_earth(st.v_s, ang)
        sat_clk = clock_correction(eph, t_true - tau)
        d = tau + self.clock.offset(t_rx) - sat_clk
        adv = 2.0 * iono / C if (self.ionosphere and self.carrier_advance) else 0.0
        return dict(code=d, carrier=d - adv, geo=geo, tau=tau, iono=iono, tropo=tropo, el=el, az=az,
                    sat_clk=sat_clk, r_s=r_s, v_s=v_s, r_u=r_u, v_u=v_u)

    def truth_track(self, eph, trajectory, t_rx) -> TruthTrack:
        """Evaluate truth on the receiver-time grid ``t_rx``.

        Rates come from a central difference of the full delay model so the
        Hermite interpolant used for synthesis is exactly consistent with it.
        """
        t_rx = np.asarray(t_rx, float)
        h = self.derivative_step
        mid = self._delays(eph, trajectory, t_rx)
        hi = self._delays(eph, trajectory, t_rx + h)
        lo = self._delays(eph, trajectory, t_rx - h)
        code_rate = (hi["code"] - lo["code"]) / (2 * h)
        carrier_rate = (hi["carrier"] - lo["carrier"]) / (2 * h)
        if self.cn0_override is not None:
            cn0 = np.full_like(t_rx, self.cn0_override)
            power = 10 ** (cn0 / 10) * self.n0
        else:
            g_rx = self.rx_pattern(np.clip(mid["el"], 0.0, np.pi / 2))
            power, _ = received_power(self.tx_power_w, self.tx_gain_dbi, g_rx, mid["geo"], F_L1, self.l_atm)
            cn0 = 10 * np.log10(power / self.n0)
        return TruthTrack(
            prn=eph.prn, t_rx=t_rx, code_delay=mid["code"], code_rate=code_rate,
            carrier_delay=mid["carrier"], carrier_rate=carrier_rate, geometric_range=mid["geo"],
            tau_total=mid["tau"], iono=mid["iono"], tropo=mid["tropo"], elevation=mid["el"],
            azimuth=mid["az"], carrier_power=power, cn0=cn0, sat_clock=mid["sat_clk"],
            r_s=mid["r_s"], v_s=mid["v_s"], r_u=mid["r_u"], v_u=mid["v_u"],
            geometric_doppler=los_doppler(mid["r_s"], mid["v_s"], mid["r_u"], mid["v_u"]))


def doppler_consistency(eph, trajectory, t, f_tx=F_L1):
    """Line-of-sight Doppler vs central-difference range rate on a uniform grid.

    Uses instantaneous geometry (satellite and user at the same epoch).
    Returns (doppler, fd_doppler) over interior points.
    """
    t = np.asarray(t, float)
    st = sat_state_at(eph, t)
    r_u, v_u = trajectory.state_at(t)
    fd = los_doppler(st.r_s, st.v_s, r_u, v_u, f_tx)
    rng = np.linalg.norm(st.r_s - r_u, axis=-1)
    h = t[1] - t[0]
    rate = (rng[2:] - rng[:-2]) / (2 * h)
    return fd[1:-1], -(f_tx / C) * rate


def slant_iono_factor(elevation):
    return klobuchar_slant_factor(elevation)
