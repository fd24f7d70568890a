"""Broadcast ephemerides and the RINEX navigation subset we read and write.

Only GPS records are consumed. Both RINEX 2.x (``ION ALPHA``/``ION BETA``
header lines) and RINEX 3.x (``IONOSPHERIC CORR GPSA/GPSB``) headers are
understood.
"""
from __future__ import annotations

import dataclasses
import datetime as _dt
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..constants import SECONDS_PER_WEEK

GPS_EPOCH = _dt.datetime(1980, 1, 6)


class RinexError(ValueError):
    """Malformed or unusable navigation file."""


@dataclass(frozen=True)
class BroadcastEphemeris:
    prn: int
    week: int
    toe: float
    toc: float
    sqrt_a: float
    e: float
    i0: float
    omega0: float
    omega: float
    m0: float
    delta_n: float = 0.0
    idot: float = 0.0
    omega_dot: float = 0.0
    cuc: float = 0.0
    cus: float = 0.0
    crc: float = 0.0
    crs: float = 0.0
    cic: float = 0.0
    cis: float = 0.0
    af0: float = 0.0
    af1: float = 0.0
    af2: float = 0.0
    tgd: float = 0.0
    iode: int = 0
    iodc: int = 0
    health: int = 0
    klobuchar_alpha: tuple = (0.0, 0.0, 0.0, 0.0)
    klobuchar_beta: tuple = (0.0, 0.0, 0.0, 0.0)

    def validate(self) -> None:
        if not 1 <= self.prn <= 32:
            raise ValueError(f"PRN {self.prn} outside 1..32")
        if not 0.0 <= self.e < 0.03:
            raise ValueError(f"PRN {self.prn}: eccentricity {self.e} outside [0, 0.03)")
        a = self.sqrt_a ** 2
        if not 2.0e7 <= a <= 3.0e7:
            raise ValueError(f"PRN {self.prn}: semi-major axis {a:.1f} m implausible for GPS")

    @property
    def toe_abs(self) -> float:
        """toe as continuous GPS seconds since the GPS epoch."""
        return self.week * SECONDS_PER_WEEK + self.toe

    def replace(self, **kw) -> "BroadcastEphemeris":
        return dataclasses.replace(self, **kw)


@dataclass
class NavData:
    ephemerides: dict[int, BroadcastEphemeris]
    alpha: tuple = (0.0, 0.0, 0.0, 0.0)
    beta: tuple = (0.0, 0.0, 0.0, 0.0)
    has_iono: bool = False
    all_records: dict[int, list[BroadcastEphemeris]] = field(default_factory=dict)


def gps_seconds(dt: _dt.datetime) -> tuple[int, float]:
    """Calendar epoch (GPS time scale) -> (week, seconds of week)."""
    delta = dt - GPS_EPOCH
    total = delta.days * 86400.0 + delta.seconds + delta.microseconds * 1e-6
    week = int(total // SECONDS_PER_WEEK)
    return week, total - week * SECONDS_PER_WEEK


def gps_to_datetime(week: int, sow: float) -> _dt.datetime:
    return GPS_EPOCH + _dt.timedelta(seconds=week * SECONDS_PER_WEEK + sow)


def _num(text: str, lineno: int) -> float:
    s = text.strip()
    if not s:
        return 0.0
    try:
        return float(s.replace("D", "E").replace("d", "e"))
    except ValueError:
        raise RinexError(f"line {lineno}: malformed numeric field {text!r}") from None


def _fields(line: str, start: int, lineno: int, count: int = 4) -> list[float]:
    out = []
    for k in range(count):
        chunk = line[start + 19 * k: start + 19 * (k + 1)]
        out.append(_num(chunk, lineno))
    return out


def _parse_header(lines, version_hint=None):
    alpha = beta = None
    version = version_hint
    n = 0
    for n, line in enumerate(lines, start=1):
        label = line[60:].strip()
        if label.startswith("RINEX VERSION"):
            try:
                version = float(line[:9])
            except ValueError:
                raise RinexError(f"line {n}: bad RINEX version field") from None
            ftype = line[20:21]
            system = line[40:41]
            if ftype not in ("N", "n") or (version >= 3 and system not in ("G", "M", " ")):
                raise RinexError(f"line {n}: not a GPS navigation file")
        elif label.startswith("ION ALPHA"):
            alpha = tuple(_num(line[2 + 12 * k: 14 + 12 * k], n) for k in range(4))
        elif label.startswith("ION BETA"):
            beta = tuple(_num(line[2 + 12 * k: 14 + 12 * k], n) for k in range(4))
        elif label.startswith("IONOSPHERIC CORR"):
            tag = line[:4]
            vals = tuple(_num(line[5 + 12 * k: 17 + 12 * k], n) for k in range(4))
            if tag == "GPSA":
                alpha = vals
            elif tag == "GPSB":
                beta = vals
        elif label.startswith("END OF HEADER"):
            return version, alpha, beta, n
    raise RinexError("END OF HEADER not found")


def _record(prn, epoch, vals, lineno) -> BroadcastEphemeris:
    (af0, af1, af2,
     iode, crs, dn, m0,
     cuc, e, cus, sqrt_a,
     toe, cic, om0, cis,
     i0, crc, w, omdot,
     idot, _l2, week, _l2p,
     _acc, health, tgd, iodc) = vals[:27]
    wk, toc = gps_seconds(epoch)
    week = int(round(week)) if week else wk
    # RINEX carries the continuous GPS week; toc may sit in the adjacent week
    toc_rel = toc + (wk - week) * SECONDS_PER_WEEK
    return BroadcastEphemeris(
        prn=prn, week=week, toe=toe, toc=toc_rel, sqrt_a=sqrt_a, e=e, i0=i0,
        omega0=om0, omega=w, m0=m0, delta_n=dn, idot=idot, omega_dot=omdot,
        cuc=cuc, cus=cus, crc=crc, crs=crs, cic=cic, cis=cis,
        af0=af0, af1=af1, af2=af2, tgd=tgd, iode=int(iode), iodc=int(iodc),
        health=int(health))


def read_rinex_nav(path) -> NavData:
    """Parse every GPS record of a RINEX 2.x/3.x navigation file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise RinexError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    version, alpha, beta, nhead = _parse_header(lines)
    if version is None:
        raise RinexError("missing RINEX VERSION / TYPE line")
    v3 = version >= 3.0
    start = 4 if v3 else 3
    records: dict[int, list[BroadcastEphemeris]] = {}
    i = nhead
    while i < len(lines):
        line = lines[i]
        lineno = i + 1
        if not line.strip():
            i += 1
            continue
        if v3:
            sysid = line[0]
            if sysid != "G":
                # skip other constellations: GLONASS/SBAS use 3 continuation lines
                i += 4 if sysid in "RS" else 8
                continue
            try:
                prn = int(line[1:3])
                epoch = _dt.datetime(int(line[4:8]), int(line[9:11]), int(line[12:14]),
                                     int(line[15:17]), int(line[18:20]), int(line[21:23]))
            except ValueError:
                raise RinexError(f"line {lineno}: malformed record epoch") from None
            first = _fields(line, 23, lineno, 3)
        else:
            try:
                prn = int(line[0:2])
                yy = int(line[3:5])
                year = yy + (1900 if yy >= 80 else 2000)
                sec = float(line[17:22])
                epoch = _dt.datetime(year, int(line[6:8]), int(line[9:11]),
                                     int(line[12:14]), int(line[15:17])) + _dt.timedelta(seconds=sec)
            except ValueError:
                raise RinexError(f"line {lineno}: malformed record epoch") from None
            first = _fields(line, 22, lineno, 3)
        vals = list(first)
        for k in range(1, 8):
            if i + k >= len(lines):
                if k >= 7:
                    break
                raise RinexError(f"line {lineno}: truncated navigation record")
            cont = lines[i + k]
            vals.extend(_fields(cont.ljust(start + 76), start, i + k + 1))
        eph = _record(prn, epoch, vals, lineno)
        records.setdefault(prn, []).append(eph)
        i += 8
    nav = NavData(ephemerides={}, all_records=records)
    if alpha is not None and beta is not None:
        nav.alpha, nav.beta, nav.has_iono = alpha, beta, True
    return nav


def load_ephemerides(path, start_week: int | None = None, start_tow: float | None = None,
                     max_age: float = 4 * 3600.0) -> NavData:
    """Read a navigation file and keep one record per PRN.

    The record whose toe is nearest to the start epoch is kept; equal
    distances resolve to the earlier toe. Records farther than ``max_age``
    from the start are dropped; if none remain the file is rejected.
    Klobuchar coefficients from the header are copied into every record.
    """
    nav = read_rinex_nav(path)
    if not nav.all_records:
        raise RinexError(f"{path}: no GPS records")
    chosen: dict[int, BroadcastEphemeris] = {}
    for prn, recs in sorted(nav.all_records.items()):
        if start_tow is None:
            best = min(recs, key=lambda r: r.toe_abs)
        else:
            t0 = (start_week if start_week is not None else recs[0].week) * SECONDS_PER_WEEK + start_tow
            cands = [r for r in recs if abs(r.toe_abs - t0) <= max_age]
            if not cands:
                continue
            best = min(cands, key=lambda r: (abs(r.toe_abs - t0), r.toe_abs))
        chosen[prn] = best.replace(klobuchar_alpha=tuple(nav.alpha), klobuchar_beta=tuple(nav.beta))
    if not chosen:
        raise RinexError(f"{path}: no GPS record overlaps the scenario window")
    nav.ephemerides = chosen
    return nav


def _d19(x: float) -> str:
    """Fortran D19.12 field: ' 0.123456789012D+05'."""
    if x == 0.0 or not math.isfinite(x):
        return " 0.000000000000D+00"
    mant, exp = f"{abs(x):.11E}".split("E")
    digits = mant.replace(".", "")
    e = int(exp) + 1
    sign = "-" if x < 0 else " "
    return f"{sign}0.{digits}D{e:+03d}"


def write_rinex_nav(path, ephemerides, alpha=None, beta=None, version: int = 2) -> Path:
    """Write GPS records in RINEX 2.11 or 3.04 navigation format."""
    path = Path(path)
    out = []
    if version >= 3:
        out.append(f"{'3.04':>9}{'':11}{'N: GNSS NAV DATA':<20}{'G: GPS':<20}RINEX VERSION / TYPE")
    else:
        out.append(f"{'2.11':>9}{'':11}{'N: GPS NAV DATA':<40}RINEX VERSION / TYPE")
    out.append(f"{'gpstwin':<20}{'':20}{'':20}PGM / RUN BY / DATE")

    if alpha is not None and beta is not None:
        if version >= 3:
            out.append("GPSA " + "".join(f"{_d12(v)}" for v in alpha) + " " * 7 + "IONOSPHERIC CORR")
            out.append("GPSB " + "".join(f"{_d12(v)}" for v in beta) + " " * 7 + "IONOSPHERIC CORR")
        else:
            out.append("  " + "".join(f"{_d12(v)}" for v in alpha) + " " * 10 + "ION ALPHA")
            out.append("  " + "".join(f"{_d12(v)}" for v in beta) + " " * 10 + "ION BETA")
    out.append(f"{'':60}END OF HEADER")
    for eph in sorted(ephemerides, key=lambda r: (r.prn, r.toe_abs)):
        epoch = gps_to_datetime(eph.week, eph.toc)
        lead = 4 if version >= 3 else 3
        if version >= 3:
            head = (f"G{eph.prn:02d} {epoch.year:04d} {epoch.month:02d} {epoch.day:02d} "
                    f"{epoch.hour:02d} {epoch.minute:02d} {epoch.second:02d}")
        else:
            sec = epoch.second + epoch.microsecond * 1e-6
            head = (f"{eph.prn:2d} {epoch.year % 100:02d} {epoch.month:2d} {epoch.day:2d} "
                    f"{epoch.hour:2d} {epoch.minute:2d}{sec:5.1f}")
        out.append(head + _d19(eph.af0) + _d19(eph.af1) + _d19(eph.af2))
        rows = [
            (eph.iode, eph.crs, eph.delta_n, eph.m0),
            (eph.cuc, eph.e, eph.cus, eph.sqrt_a),
            (eph.toe, eph.cic, eph.omega0, eph.cis),
            (eph.i0, eph.crc, eph.omega, eph.omega_dot),
            (eph.idot, 1.0, float(eph.week), 0.0),
            (2.0, float(eph.health), eph.tgd, float(eph.iodc)),
            (eph.toe - 7200.0 if eph.toe >= 7200.0 else 0.0, 4.0),
        ]
        for row in rows:
            out.append(" " * lead + "".join(_d19(v) for v in row))
    path.write_text("\n".join(out) + "\n")
    return path


def _d12(x: float) -> str:
    """Header coefficient field, width 12: ' 0.1118D-07'."""
    if x == 0.0:
        return "  0.0000D+00"
    mant, exp = f"{abs(x):.3E}".split("E")
    digits = mant.replace(".", "")
    e = int(exp) + 1
    sign = "-" if x < 0 else " "
    return f" {sign}0.{digits}D{e:+03d}"
