"""A deterministic synthetic GPS constellation and the bundled navigation file.

The bundled file lets every scenario run offline. Records are generated at
two-hour toe spacing over one day and are mutually consistent: mean anomaly,
node longitude and clock offset are advanced between records.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..constants import GM
from .ephemeris import BroadcastEphemeris, write_rinex_nav

BUILTIN_WEEK = 2300
BUILTIN_DAY_START = 259200.0          # Wednesday 00:00 of the week
BUILTIN_ALPHA = (0.1118e-07, 0.7451e-08, -0.5960e-07, -0.5960e-07)
BUILTIN_BETA = (0.9011e05, 0.1638e05, -0.1966e06, -0.6554e05)
DATA_DIR = Path(__file__).resolve().parent.parent / "data"
BUILTIN_NAV = "brdc_synthetic.nav"


def builtin_nav_path() -> Path:
    return DATA_DIR / BUILTIN_NAV


def synthetic_constellation(week=BUILTIN_WEEK, toe=BUILTIN_DAY_START, n_sats=31, seed=2300,
                            alpha=BUILTIN_ALPHA, beta=BUILTIN_BETA):
    """One ephemeris per PRN at ``toe``: six planes, 55 degree inclination."""
    rng = np.random.default_rng(seed)
    ephs = []
    for k in range(n_sats):
        plane, slot = k % 6, k // 6
        sqrt_a = 5153.65 + rng.uniform(-0.1, 0.1)
        m0 = np.mod(2 * np.pi * slot / 5.3 + plane * 0.45 + rng.uniform(-0.1, 0.1), 2 * np.pi) - np.pi
        ephs.append(BroadcastEphemeris(
            prn=k + 1, week=week, toe=toe, toc=toe, sqrt_a=sqrt_a,
            e=rng.uniform(0.003, 0.015),
            i0=np.deg2rad(55.0 + rng.uniform(-1.5, 1.5)),
            omega0=np.mod(np.deg2rad(60.0 * plane) + rng.uniform(-0.02, 0.02), 2 * np.pi) - np.pi,
            omega=rng.uniform(-np.pi, np.pi), m0=m0,
            delta_n=rng.uniform(4.0e-9, 5.2e-9), idot=rng.uniform(-3e-10, 3e-10),
            omega_dot=rng.uniform(-8.4e-9, -7.8e-9),
            cuc=rng.uniform(-6e-6, 6e-6), cus=rng.uniform(-1e-5, 1e-5),
            crc=rng.uniform(150.0, 320.0), crs=rng.uniform(-120.0, 120.0),
            cic=rng.uniform(-1.5e-7, 1.5e-7), cis=rng.uniform(-1.5e-7, 1.5e-7),
            af0=rng.uniform(-3e-4, 3e-4), af1=rng.uniform(-8e-12, 8e-12), af2=0.0,
            tgd=float(np.round(rng.uniform(-1.5e-8, 5e-9) / 2 ** -31) * 2 ** -31),
            iode=10 + k, iodc=10 + k, health=0,
            klobuchar_alpha=tuple(alpha), klobuchar_beta=tuple(beta)))
    return ephs


def advance(eph: BroadcastEphemeris, dt: float, iode: int) -> BroadcastEphemeris:
    """The same orbit re-expressed at toe + dt (secular terms only)."""
    n = np.sqrt(GM / eph.sqrt_a ** 6) + eph.delta_n
    m0 = np.mod(eph.m0 + n * dt + np.pi, 2 * np.pi) - np.pi
    om0 = np.mod(eph.omega0 + eph.omega_dot * dt + np.pi, 2 * np.pi) - np.pi
    return eph.replace(toe=eph.toe + dt, toc=eph.toc + dt, m0=m0, omega0=om0,
                       i0=eph.i0 + eph.idot * dt, af0=eph.af0 + eph.af1 * dt,
                       iode=iode % 256, iodc=iode % 256)


def daily_records(step=7200.0, count=12, **kw):
    base = synthetic_constellation(**kw)
    out = []
    for eph in base:
        for j in range(count):
            out.append(advance(eph, j * step, eph.iode + 40 * j))
    return out


def write_builtin(path=None):
    path = Path(path) if path is not None else builtin_nav_path()
    path.parent.mkdir(parents=True, exist_ok=True)
    return write_rinex_nav(path, daily_records(), BUILTIN_ALPHA, BUILTIN_BETA, version=2)


if __name__ == "__main__":
    print(write_builtin())
