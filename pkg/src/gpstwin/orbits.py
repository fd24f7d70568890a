"""Satellite states from broadcast ephemerides, WGS-84 frames and look angles.

All functions accept scalars or numpy arrays for the time argument and
broadcast accordingly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import GM, HALF_WEEK, OMEGA_E, REL_F, SECONDS_PER_WEEK, WGS84_A, WGS84_E2


class KeplerError(RuntimeError):
    pass


@dataclass(frozen=True)
class SatState:
    prn: int
    t: np.ndarray | float
    r_s: np.ndarray          # (..., 3) ECEF m
    v_s: np.ndarray          # (..., 3) ECEF m/s
    clock_offset: np.ndarray | float
    clock_drift: np.ndarray | float


def _wrap_week(dt):
    dt = np.asarray(dt, dtype=float)
    return np.where(dt > HALF_WEEK, dt - SECONDS_PER_WEEK, np.where(dt < -HALF_WEEK, dt + SECONDS_PER_WEEK, dt))


def solve_kepler(m, e, tol=1e-12, max_iter=30):
    """Eccentric anomaly from mean anomaly by Newton iteration."""
    m = np.asarray(m, dtype=float)
    ecc = m.copy()
    for _ in range(max_iter):
        f = ecc - e * np.sin(ecc) - m
        step = f / (1.0 - e * np.cos(ecc))
        ecc = ecc - step
        if np.all(np.abs(step) < tol):
            return ecc
    raise KeplerError(f"Kepler iteration did not converge (e={e})")


def clock_correction(eph, t, include_relativity=True, include_tgd=True):
    """Satellite clock offset (SV time minus GPS time) in seconds for L1 users."""
    dt = _wrap_week(np.asarray(t, dtype=float) - eph.toc)
    off = eph.af0 + eph.af1 * dt + eph.af2 * dt * dt
    if include_relativity:
        a = eph.sqrt_a ** 2
        n = np.sqrt(GM / a ** 3) + eph.delta_n
        ecc = solve_kepler(eph.m0 + n * _wrap_week(np.asarray(t, dtype=float) - eph.toe), eph.e)
        off = off + REL_F * eph.e * eph.sqrt_a * np.sin(ecc)
    if include_tgd:
        off = off - eph.tgd
    return off


def sat_state_at(eph, t, max_age: float = 4 * 3600.0) -> SatState:
    """ECEF position/velocity and clock terms at GPS time ``t`` (seconds of week).

    Position follows the broadcast Keplerian algorithm with harmonic
    corrections; velocity is its analytic time derivative.
    """
    t = np.asarray(t, dtype=float)
    tk = _wrap_week(t - eph.toe)
    if np.any(np.abs(tk) >= max_age):
        raise ValueError(f"PRN {eph.prn}: |t - toe| exceeds {max_age} s")
    a = eph.sqrt_a ** 2
    n = np.sqrt(GM / a ** 3) + eph.delta_n
    mk = eph.m0 + n * tk
    ek = solve_kepler(mk, eph.e)
    sin_e, cos_e = np.sin(ek), np.cos(ek)
    one_m = 1.0 - eph.e * cos_e
    nu = np.arctan2(np.sqrt(1.0 - eph.e ** 2) * sin_e, cos_e - eph.e)
    phi = nu + eph.omega
    s2, c2 = np.sin(2 * phi), np.cos(2 * phi)
    du = eph.cus * s2 + eph.cuc * c2
    dr = eph.crs * s2 + eph.crc * c2
    di = eph.cis * s2 + eph.cic * c2
    u = phi + du
    r = a * one_m + dr
    inc = eph.i0 + di + eph.idot * tk
    xp, yp = r * np.cos(u), r * np.sin(u)
    om = eph.omega0 + (eph.omega_dot - OMEGA_E) * tk - OMEGA_E * eph.toe
    so, co = np.sin(om), np.cos(om)
    si, ci = np.sin(inc), np.cos(inc)
    x = xp * co - yp * ci * so
    y = xp * so + yp * ci * co
    z = yp * si

    e_dot = n / one_m
    phi_dot = np.sqrt(1.0 - eph.e ** 2) * e_dot / one_m
    u_dot = phi_dot * (1.0 + 2.0 * (eph.cus * c2 - eph.cuc * s2))
    r_dot = a * eph.e * sin_e * e_dot + 2.0 * phi_dot * (eph.crs * c2 - eph.crc * s2)
    i_dot = eph.idot + 2.0 * phi_dot * (eph.cis * c2 - eph.cic * s2)
    om_dot = eph.omega_dot - OMEGA_E
    xp_dot = r_dot * np.cos(u) - yp * u_dot
    yp_dot = r_dot * np.sin(u) + xp * u_dot
    vx = xp_dot * co - yp_dot * ci * so + yp * si * so * i_dot - y * om_dot
    vy = xp_dot * so + yp_dot * ci * co - yp * si * co * i_dot + x * om_dot
    vz = yp_dot * si + yp * ci * i_dot

    dtc = _wrap_week(t - eph.toc)
    rel = REL_F * eph.e * eph.sqrt_a * sin_e
    rel_dot = REL_F * eph.e * eph.sqrt_a * cos_e * e_dot
    clk = eph.af0 + eph.af1 * dtc + eph.af2 * dtc ** 2 + rel - eph.tgd
    clk_dot = eph.af1 + 2.0 * eph.af2 * dtc + rel_dot
    return SatState(eph.prn, t, np.stack([x, y, z], axis=-1), np.stack([vx, vy, vz], axis=-1), clk, clk_dot)


def rotate_earth(r, angle):
    """Rotate ECEF vectors about +Z by ``-angle`` (frame rotation during flight time)."""
    r = np.asarray(r, dtype=float)
    c, s = np.cos(angle), np.sin(angle)
    x, y, z = r[..., 0], r[..., 1], r[..., 2]
    return np.stack([c * x + s * y, -s * x + c * y, np.broadcast_to(z, np.broadcast(x, c).shape)], axis=-1)


def geodetic_to_ecef(lat, lon, h):
    """WGS-84 geodetic (rad, rad, m) to ECEF metres."""
    lat, lon, h = np.asarray(lat, float), np.asarray(lon, float), np.asarray(h, float)
    sl = np.sin(lat)
    n = WGS84_A / np.sqrt(1.0 - WGS84_E2 * sl * sl)
    return np.stack([(n + h) * np.cos(lat) * np.cos(lon),
                     (n + h) * np.cos(lat) * np.sin(lon),
                     (n * (1.0 - WGS84_E2) + h) * sl], axis=-1)


def ecef_to_geodetic(r):
    """ECEF metres to WGS-84 (lat rad, lon rad, h m)."""
    r = np.asarray(r, dtype=float)
    x, y, z = r[..., 0], r[..., 1], r[..., 2]
    p = np.hypot(x, y)
    lon = np.arctan2(y, x)
    lat = np.arctan2(z, p * (1.0 - WGS84_E2))
    for _ in range(10):
        sl = np.sin(lat)
        n = WGS84_A / np.sqrt(1.0 - WGS84_E2 * sl * sl)
        new = np.arctan2(z + WGS84_E2 * n * sl, p)
        done = np.all(np.abs(new - lat) < 1e-15)
        lat = new
        if done:
            break
    sl, cl = np.sin(lat), np.cos(lat)
    h = p * cl + z * sl - WGS84_A * np.sqrt(1.0 - WGS84_E2 * sl * sl)
    return lat, lon, h


def ecef_geodetic_roundtrip(p, geodetic_input=False):
    """Convert in either direction; ``geodetic_input`` selects (lat, lon, h) -> ECEF."""
    if geodetic_input:
        lat, lon, h = p
        return geodetic_to_ecef(lat, lon, h)
    if np.any(np.linalg.norm(np.asarray(p, float), axis=-1) <= 6.3e6):
        raise ValueError("ECEF input must lie outside 6.3e6 m radius")
    return ecef_to_geodetic(p)


def enu_matrix(lat, lon):
    sl, cl = np.sin(lat), np.cos(lat)
    so, co = np.sin(lon), np.cos(lon)
    return np.array([[-so, co, 0.0],
                     [-sl * co, -sl * so, cl],
                     [cl * co, cl * so, sl]])


def ecef_to_enu(dr, r_ref):
    lat, lon, _ = ecef_to_geodetic(r_ref)
    return np.asarray(dr, float) @ enu_matrix(float(lat), float(lon)).T


def elevation_azimuth(r_u, r_s):
    """Look angles of the line of sight from ``r_u`` to ``r_s`` in the local ENU frame."""
    r_u = np.asarray(r_u, float)
    r_s = np.asarray(r_s, float)
    lat, lon, _ = ecef_to_geodetic(r_u)
    lat, lon = np.atleast_1d(lat), np.atleast_1d(lon)
    sl, cl, so, co = np.sin(lat), np.cos(lat), np.sin(lon), np.cos(lon)
    d = np.atleast_2d(r_s - r_u)
    e = -so * d[:, 0] + co * d[:, 1]
    n = -sl * co * d[:, 0] - sl * so * d[:, 1] + cl * d[:, 2]
    u = cl * co * d[:, 0] + cl * so * d[:, 1] + sl * d[:, 2]
    el = np.arctan2(u, np.hypot(e, n))
    az = np.mod(np.arctan2(e, n), 2 * np.pi)
    az = np.where(az >= 2 * np.pi, 0.0, az)          # mod of a tiny negative rounds up to 2 pi
    if np.ndim(r_s) == 1 and np.ndim(r_u) == 1:
        return float(el[0]), float(az[0])
    return el, az
