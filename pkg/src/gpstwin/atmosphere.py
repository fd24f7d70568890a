"""Ionospheric and tropospheric delay models."""
from __future__ import annotations

import numpy as np

from .constants import C

MAGNUS_PRINTED = 273.3
MAGNUS_STANDARD = 237.3
TROPO_MASK = np.deg2rad(5.0)


def klobuchar_delay(alpha, beta, lat, lon, elevation, azimuth, gps_tow):
    """Single-frequency broadcast ionosphere model, L1 slant delay in metres.

    ``lat``, ``lon``, ``elevation`` and ``azimuth`` are in radians; the model
    works internally in semicircles.
    """
    el = np.asarray(elevation, float) / np.pi
    phi_u = np.asarray(lat, float) / np.pi
    lam_u = np.asarray(lon, float) / np.pi
    az = np.asarray(azimuth, float)
    psi = 0.0137 / (el + 0.11) - 0.022
    phi_i = np.clip(phi_u + psi * np.cos(az), -0.416, 0.416)
    lam_i = lam_u + psi * np.sin(az) / np.cos(phi_i * np.pi)
    phi_m = phi_i + 0.064 * np.cos((lam_i - 1.617) * np.pi)
    t = np.mod(4.32e4 * lam_i + np.asarray(gps_tow, float), 86400.0)
    slant = 1.0 + 16.0 * (0.53 - el) ** 3
    amp = sum(a * phi_m ** k for k, a in enumerate(alpha))
    per = sum(b * phi_m ** k for k, b in enumerate(beta))
    amp = np.maximum(amp, 0.0)
    per = np.maximum(per, 72000.0)
    x = 2.0 * np.pi * (t - 50400.0) / per
    day = 5e-9 + amp * (1.0 - x * x / 2.0 + x ** 4 / 24.0)
    vert = np.where(np.abs(x) < 1.57, day, 5e-9)
    return C * slant * vert


def klobuchar_slant_factor(elevation):
    el = np.asarray(elevation, float) / np.pi
    return 1.0 + 16.0 * (0.53 - el) ** 3


def water_vapour(rh, t0, magnus_denominator=MAGNUS_PRINTED):
    """Partial water vapour pressure indicator (hPa) for relative humidity ``rh`` in [0, 1]."""
    return rh * 6.11 * 10.0 ** (7.5 * t0 / (t0 + magnus_denominator))


def saastamoinen_ztd(p0, t0, rh, lat, h_km, magnus_denominator=MAGNUS_PRINTED):
    """Zenith tropospheric delay in metres.

    p0 hPa, t0 deg C, rh fraction, lat rad, h_km kilometres.
    """
    if np.any(np.asarray(p0) < 0) or np.any(np.asarray(t0) <= -273.15):
        raise ValueError("pressure must be >= 0 hPa and temperature above absolute zero")
    if np.any((np.asarray(rh) < 0) | (np.asarray(rh) > 1)):
        raise ValueError("relative humidity must lie in [0, 1]")
    chi = water_vapour(rh, t0, magnus_denominator)
    den = 1.0 - 0.00266 * np.cos(2.0 * np.asarray(lat, float)) - 0.00028 * np.asarray(h_km, float)
    if np.any(den <= 0):
        raise ValueError("Saastamoinen denominator non-positive")
    return 0.002277 * (p0 + (0.05 + 1255.0 / (t0 + 273.15)) * chi) / den


def tropo_mapping(elevation):
    """Global obliquity factor for the zenith delay."""
    s = np.sin(np.asarray(elevation, float))
    return 1.001 / np.sqrt(0.002001 + s * s)


def slant_tropo(ztd, elevation, mapping=tropo_mapping):
    if np.any(np.asarray(elevation) < TROPO_MASK - 1e-12):
        raise ValueError("elevation below the 5 degree tropospheric mask")
    return ztd * mapping(elevation)


def standard_meteo(h_m):
    """Standard-atmosphere surface values at height ``h_m``: (hPa, deg C, rh).

    Heights are clamped to [0, 44 km], where the pressure law reaches ~0.
    """
    h = np.clip(np.asarray(h_m, float), 0.0, 44000.0)
    p = 1013.25 * (1.0 - 2.2557e-5 * h) ** 5.2568
    t = 15.0 - 6.5e-3 * h
    return p, t, 0.5
