"""User trajectories for the three motion classes.

Trajectories are stored at a fixed rate (100 Hz by default) and queried
between knots with cubic Hermite interpolation, which keeps position C1 and
velocity continuous.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from ..constants import G0
from ..orbits import enu_matrix, geodetic_to_ecef


class TrajectoryError(ValueError):
    pass


class TrajectorySample(NamedTuple):
    t: float
    r_u: np.ndarray
    v_u: np.ndarray
    a_u: np.ndarray


@dataclass(frozen=True)
class StaticProfile:
    lat_deg: float
    lon_deg: float
    height: float
    t0: float = 0.0
    duration: float = 10.0
    rate: float = 100.0


@dataclass(frozen=True)
class ModerateProfile:
    """Waypoints are (t, east, north, up) in metres about the origin."""
    lat_deg: float
    lon_deg: float
    height: float
    waypoints: Sequence[Sequence[float]]
    corner_time: float = 2.0
    max_speed: float = 30.0
    rate: float = 100.0
    pad: float = 0.0


@dataclass(frozen=True)
class HighDynamicsProfile:
    """Point-mass ballistic flight from a launch state.

    ``drag_k`` is 0.5*rho0*Cd*A/m in 1/m; air density decays with
    ``scale_height``. ``min_peak_accel`` (m/s^2) is enforced when positive.
    """
    lat_deg: float
    lon_deg: float
    height: float
    t0: float
    duration: float
    speed: float
    elevation_deg: float
    azimuth_deg: float = 0.0
    drag_k: float = 0.0
    scale_height: float = 8500.0
    rate: float = 100.0
    min_peak_accel: float = 0.0


@dataclass
class Trajectory:
    t: np.ndarray
    r: np.ndarray
    v: np.ndarray
    a: np.ndarray
    kind: str = "static"
    _spline: CubicHermiteSpline | None = field(default=None, repr=False)

    def __post_init__(self):
        if np.any(np.diff(self.t) <= 0):
            raise TrajectoryError("trajectory times must be strictly increasing")
        if len(self.t) >= 2:
            self._spline = CubicHermiteSpline(self.t, self.r, self.v, axis=0)

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> TrajectorySample:
        return TrajectorySample(float(self.t[i]), self.r[i], self.v[i], self.a[i])

    @property
    def span(self):
        return float(self.t[0]), float(self.t[-1])

    def state_at(self, t):
        """Interpolated (r, v) at time(s) ``t``."""
        t = np.asarray(t, float)
        lo, hi = self.span
        if np.any(t < lo - 1e-9) or np.any(t > hi + 1e-9):
            raise TrajectoryError(f"time outside trajectory span [{lo}, {hi}]")
        return self._spline(t), self._spline(t, 1)

    def accel_at(self, t):
        return self._spline(np.asarray(t, float), 2)


def _frame(lat_deg, lon_deg, height):
    lat, lon = np.deg2rad(lat_deg), np.deg2rad(lon_deg)
    r0 = geodetic_to_ecef(lat, lon, height)
    return r0, enu_matrix(lat, lon).T      # columns: east, north, up in ECEF


def _static(p: StaticProfile) -> Trajectory:
    r0, _ = _frame(p.lat_deg, p.lon_deg, p.height)
    n = int(round(p.duration * p.rate)) + 1
    t = p.t0 + np.arange(n) / p.rate
    r = np.tile(r0, (n, 1))
    z = np.zeros((n, 3))
    return Trajectory(t, r, z, z.copy(), "static")


def _moderate(p: ModerateProfile) -> Trajectory:
    wp = np.asarray(p.waypoints, float)
    if wp.ndim != 2 or wp.shape[1] != 4 or len(wp) < 2:
        raise TrajectoryError("moderate profile needs >= 2 waypoints of (t, e, n, u)")
    tw, xw = wp[:, 0], wp[:, 1:]
    if np.any(np.diff(tw) <= 0):
        raise TrajectoryError("waypoint times must be strictly increasing")
    seg_v = np.diff(xw, axis=0) / np.diff(tw)[:, None]
    speed = np.linalg.norm(seg_v, axis=1)
    if np.any(speed > p.max_speed + 1e-9):
        raise TrajectoryError(f"segment speed {speed.max():.2f} m/s exceeds {p.max_speed} m/s")
    w = p.corner_time
    if w > 0 and np.any(np.diff(tw) < w):
        raise TrajectoryError("segments shorter than the corner smoothing time")

    # The path is the piecewise-linear waypoint polyline (extended with the end
    # velocities) smoothed by a triangle kernel of total width w, i.e. a box of
    # width w/2 applied twice. Position, velocity and acceleration are second
    # differences of the polyline's second antiderivative, antiderivative and
    # the polyline itself, so all three are exact and acceleration is continuous.
    seg_len = np.diff(tw)
    cum1 = np.zeros((len(tw), 3))
    cum2 = np.zeros((len(tw), 3))
    for k, L in enumerate(seg_len):
        cum1[k + 1] = cum1[k] + xw[k] * L + 0.5 * seg_v[k] * L * L
        cum2[k + 1] = cum2[k] + cum1[k] * L + xw[k] * L * L / 2 + seg_v[k] * L ** 3 / 6

    def prims(t):
        k = np.clip(np.searchsorted(tw, t, side="right") - 1, 0, len(seg_v) - 1)
        dt = (t - tw[k])[:, None]
        p0 = xw[k] + seg_v[k] * dt
        p1 = cum1[k] + xw[k] * dt + 0.5 * seg_v[k] * dt * dt
        p2 = cum2[k] + cum1[k] * dt + xw[k] * dt * dt / 2 + seg_v[k] * dt ** 3 / 6
        return p0, p1, p2

    n = int(round((tw[-1] - tw[0] + 2 * p.pad) * p.rate)) + 1
    t = tw[0] - p.pad + np.arange(n) / p.rate
    if w > 0:
        b = w / 2.0
        hi, mid, lo = prims(t + b), prims(t), prims(t - b)
        acc, vel, pos = ((hi[j] - 2 * mid[j] + lo[j]) / (b * b) for j in range(3))
    else:
        pos, vel = prims(t)[0], seg_v[np.clip(np.searchsorted(tw, t, side="right") - 1, 0, len(seg_v) - 1)]
        acc = np.zeros_like(pos)
    r0, rot = _frame(p.lat_deg, p.lon_deg, p.height)
    return Trajectory(t, r0 + pos @ rot.T, vel @ rot.T, acc @ rot.T, "moderate")


def _ballistic_accel(pos, vel, p: HighDynamicsProfile):
    g = np.array([0.0, 0.0, -G0])
    if p.drag_k <= 0:
        return g
    rho = np.exp(-max(pos[2], 0.0) / p.scale_height)
    return g - p.drag_k * rho * np.linalg.norm(vel) * vel


def _high_dynamics(p: HighDynamicsProfile) -> Trajectory:
    n = int(round(p.duration * p.rate)) + 1
    h = 1.0 / p.rate
    el, az = np.deg2rad(p.elevation_deg), np.deg2rad(p.azimuth_deg)
    pos = np.zeros((n, 3))
    vel = np.zeros((n, 3))
    acc = np.zeros((n, 3))
    vel[0] = p.speed * np.array([np.cos(el) * np.sin(az), np.cos(el) * np.cos(az), np.sin(el)])
    f = lambda x, v: _ballistic_accel(x, v, p)
    for i in range(n - 1):
        x, v = pos[i], vel[i]
        a1 = f(x, v)
        acc[i] = a1
        x2, v2 = x + 0.5 * h * v, v + 0.5 * h * a1
        a2 = f(x2, v2)
        x3, v3 = x + 0.5 * h * v2, v + 0.5 * h * a2
        a3 = f(x3, v3)
        x4, v4 = x + h * v3, v + h * a3
        a4 = f(x4, v4)
        pos[i + 1] = x + h / 6.0 * (v + 2 * v2 + 2 * v3 + v4)
        vel[i + 1] = v + h / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
    acc[-1] = f(pos[-1], vel[-1])
    peak = float(np.linalg.norm(acc, axis=1).max())
    if p.min_peak_accel > 0 and peak < p.min_peak_accel:
        raise TrajectoryError(f"peak acceleration {peak:.1f} m/s^2 below required {p.min_peak_accel} m/s^2")
    r0, rot = _frame(p.lat_deg, p.lon_deg, p.height)
    t = p.t0 + np.arange(n) * h
    return Trajectory(t, r0 + pos @ rot.T, vel @ rot.T, acc @ rot.T, "high_dynamics")


def build_trajectory(profile) -> Trajectory:
    if isinstance(profile, StaticProfile):
        return _static(profile)
    if isinstance(profile, ModerateProfile):
        return _moderate(profile)
    if isinstance(profile, HighDynamicsProfile):
        return _high_dynamics(profile)
    raise TrajectoryError(f"unknown profile type {type(profile).__name__}")


def ballistic_apex(speed, elevation_deg):
    """Closed-form drag-free apex height above launch."""
    vz = speed * np.sin(np.deg2rad(elevation_deg))
    return vz * vz / (2.0 * G0)
