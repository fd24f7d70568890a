import numpy as np
import pytest

from gpstwin.constants import G0, WGS84_A
from gpstwin.scenario.config import ConfigError, config_from_dict, config_to_toml, load_config
from gpstwin.scenario.constellation import builtin_nav_path
from gpstwin.scenario.ephemeris import RinexError, load_ephemerides, read_rinex_nav, write_rinex_nav
from gpstwin.scenario.trajectory import (HighDynamicsProfile, ModerateProfile, StaticProfile, TrajectoryError,
                                         ballistic_apex, build_trajectory)

BASE = {"scenario": {"start_week": 2300, "start_tow": 284400.0, "duration": 10.0}}


def _cfg(**sections):
    data = {k: dict(v) for k, v in BASE.items()}
    for sec, vals in sections.items():
        data.setdefault(sec, {}).update(vals)
    return config_from_dict(data)


# --- configuration ----------------------------------------------------------

def test_config_defaults():
    cfg = _cfg()
    assert cfg.sample_rate == 2.5e6 and cfg.quantization == 8 and cfg.if_center == 0.0


@pytest.mark.parametrize("sec,key,val", [
    ("scenario", "duration", 0.0),
    ("scenario", "duration", -1.0),
    ("scenario", "sample_rate", 2.0e6),
    ("scenario", "quantization", 12),
    ("receiver", "integration_time", 3e-3),
    ("receiver", "dll_spacing", 1.5),
    ("trajectory", "launch_offset", 1.0),
])
def test_config_rejects_with_key_path(sec, key, val):
    with pytest.raises(ConfigError) as exc:
        _cfg(**{sec: {key: val}})
    assert f"{sec}.{key}" in str(exc.value)


def test_config_unknown_key_and_section():
    with pytest.raises(ConfigError, match="scenario.bogus: unknown key"):
        _cfg(scenario={"bogus": 1})
    with pytest.raises(ConfigError, match="extra: unknown section"):
        config_from_dict({**BASE, "extra": {}})


def test_config_type_errors():
    with pytest.raises(ConfigError, match="expected a number"):
        _cfg(scenario={"duration": "ten"})
    with pytest.raises(ConfigError, match="expected true/false"):
        _cfg(atmosphere={"ionosphere": 1})


def test_config_toml_roundtrip_and_digest(tmp_path):
    cfg = _cfg(receiver={"pll_bandwidth": 15.0}, trajectory={"lat_deg": 10.0})
    p = tmp_path / "s.toml"
    p.write_text(config_to_toml(cfg))
    back = load_config(p)
    assert back.to_dict() == cfg.to_dict()
    assert back.digest() == cfg.digest()
    assert cfg.replace(seed=5).digest() != cfg.digest()


# --- ephemerides ------------------------------------------------------------

def _records(nav, prn):
    return nav.all_records[prn]


def test_nearest_toe_with_earlier_tie(nav, tmp_path):
    e = nav.ephemerides[min(nav.ephemerides)]
    t0 = 284400.0
    early = e.replace(toe=t0 - 3600.0, toc=t0 - 3600.0, iode=1)
    late = e.replace(toe=t0 + 7200.0, toc=t0 + 7200.0, iode=2)
    p = write_rinex_nav(tmp_path / "two.nav", [early, late], nav.alpha, nav.beta)
    got = load_ephemerides(p, 2300, t0)
    assert list(got.ephemerides) == [e.prn]
    assert got.ephemerides[e.prn].iode == 1
    tie_a = e.replace(toe=t0 - 3600.0, toc=t0 - 3600.0, iode=3)
    tie_b = e.replace(toe=t0 + 3600.0, toc=t0 + 3600.0, iode=4)
    p = write_rinex_nav(tmp_path / "tie.nav", [tie_b, tie_a], nav.alpha, nav.beta)
    assert load_ephemerides(p, 2300, t0).ephemerides[e.prn].iode == 3


def test_single_record_file(nav, tmp_path):
    e = nav.ephemerides[min(nav.ephemerides)]
    p = write_rinex_nav(tmp_path / "one.nav", [e.replace(toe=284400.0, toc=284400.0)], nav.alpha, nav.beta)
    got = load_ephemerides(p, 2300, 284400.0)
    assert list(got.ephemerides) == [e.prn]
    assert got.has_iono and got.alpha == pytest.approx(nav.alpha)


@pytest.mark.parametrize("version", [2, 3])
def test_write_read_roundtrip(nav, tmp_path, version):
    ephs = list(nav.ephemerides.values())
    p = write_rinex_nav(tmp_path / f"v{version}.nav", ephs, nav.alpha, nav.beta, version=version)
    back = read_rinex_nav(p)
    for e in ephs:
        r = min(back.all_records[e.prn], key=lambda x: abs(x.toe - e.toe))
        for name in ("sqrt_a", "e", "i0", "omega0", "omega", "m0", "delta_n", "af0", "af1", "toe"):
            assert getattr(r, name) == pytest.approx(getattr(e, name), rel=1e-11, abs=1e-22)


GEORINEX_MAP = {
    "sqrt_a": "sqrtA", "e": "Eccentricity", "i0": "Io", "omega0": "Omega0", "omega": "omega", "m0": "M0",
    "delta_n": "DeltaN", "idot": "IDOT", "omega_dot": "OmegaDot", "cuc": "Cuc", "cus": "Cus", "crc": "Crc",
    "crs": "Crs", "cic": "Cic", "cis": "Cis", "af0": "SVclockBias", "af1": "SVclockDrift",
    "af2": "SVclockDriftRate", "toe": "Toe", "tgd": "TGD", "iode": "IODE", "iodc": "IODC", "health": "health",
}


@pytest.mark.parametrize("version", [2, 3])
def test_fields_match_independent_rinex_reader(nav, tmp_path, version):
    georinex = pytest.importorskip("georinex")
    path = builtin_nav_path() if version == 2 else write_rinex_nav(
        tmp_path / "v3.nav", [r for recs in nav.all_records.values() for r in recs], nav.alpha, nav.beta, 3)
    ours = read_rinex_nav(path)
    ref = georinex.load(path)
    checked = 0
    for prn, recs in ours.all_records.items():
        sv = ref.sel(sv=f"G{prn:02d}").dropna("time", how="all", subset=["sqrtA"])
        assert len(sv.time) == len(recs)
        for rec, k in zip(sorted(recs, key=lambda r: r.toe_abs), range(len(recs))):
            row = sv.isel(time=k)
            for ours_name, ref_name in GEORINEX_MAP.items():
                assert float(getattr(rec, ours_name)) == float(row[ref_name].values), (prn, ours_name)
            checked += 1
    assert checked > 0


def test_malformed_field_reports_line(nav, tmp_path):
    p = write_rinex_nav(tmp_path / "bad.nav", [nav.ephemerides[min(nav.ephemerides)]], nav.alpha, nav.beta)
    lines = p.read_text().splitlines()
    k = next(i for i, s in enumerate(lines) if "END OF HEADER" in s) + 2
    lines[k] = lines[k][:10] + "X.XXXXXXXXXXXD+00" + lines[k][27:]
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(RinexError, match=f"line {k + 1}"):
        read_rinex_nav(p)


def test_unreadable_and_out_of_window(nav, tmp_path):
    with pytest.raises((RinexError, OSError)):
        load_ephemerides(tmp_path / "missing.nav", 2300, 284400.0)
    with pytest.raises(RinexError, match="no GPS record"):
        load_ephemerides(builtin_nav_path(), 2300, 284400.0 + 86400.0 * 2)


# --- trajectories -----------------------------------------------------------

def test_static_trajectory():
    tr = build_trajectory(StaticProfile(26.5, 80.2, 100.0, 0.0, 5.0))
    assert np.all(tr.v == 0) and np.all(tr.r == tr.r[0])
    assert 6.2e6 < np.linalg.norm(tr.r[0]) < 7.0e6


def test_moderate_displacement_and_speed():
    tr = build_trajectory(ModerateProfile(26.5, 80.2, 100.0, [(0.0, 0, 0, 0), (60.0, 1500.0, 0, 0)],
                                          corner_time=2.0, max_speed=30.0))
    d = np.linalg.norm(tr.r[-1] - tr.r[0])
    assert abs(d - 1500.0) < 1.0
    assert np.max(np.linalg.norm(tr.v, axis=1)) <= 25.0 + 1e-9


def test_moderate_rejects_bad_waypoints():
    with pytest.raises(TrajectoryError):
        build_trajectory(ModerateProfile(0, 0, 0, [(0.0, 0, 0, 0), (0.0, 10.0, 0, 0)]))


def _central_velocity_error(tr):
    h = tr.t[1] - tr.t[0]
    fd = (tr.r[2:] - tr.r[:-2]) / (2 * h)
    return np.max(np.linalg.norm(fd - tr.v[1:-1], axis=1))


def test_velocity_position_consistency():
    st = build_trajectory(StaticProfile(26.5, 80.2, 100.0, 0.0, 5.0))
    mo = build_trajectory(ModerateProfile(26.5, 80.2, 100.0, [(0.0, 0, 0, 0), (20.0, 400.0, 0, 0),
                                                              (40.0, 400.0, 400.0, 0)], corner_time=3.0))
    hd = build_trajectory(HighDynamicsProfile(26.5, 80.2, 100.0, 0.0, 20.0, 3000.0, 20.0, 30.0, 5e-5))
    assert _central_velocity_error(st) == 0
    assert _central_velocity_error(mo) < 1e-3
    assert _central_velocity_error(hd) < 0.1


def test_ballistic_apex_no_drag():
    tr = build_trajectory(HighDynamicsProfile(0.0, 0.0, 0.0, 0.0, 60.0, 300.0, 45.0))
    apex = ballistic_apex(300.0, 45.0)
    assert apex == pytest.approx((300 * np.sin(np.pi / 4)) ** 2 / (2 * 9.80665))
    assert apex == pytest.approx(2294, abs=1)
    up = tr.r[:, 0] - WGS84_A           # at lat = lon = 0 the up axis is ECEF x
    assert up.max() == pytest.approx(apex, abs=0.01)


def test_high_dynamics_reaches_20g():
    tr = build_trajectory(HighDynamicsProfile(26.5, 80.2, 100.0, 0.0, 10.0, 3000.0, 20.0, 30.0, 5e-5))
    assert np.max(np.linalg.norm(tr.a, axis=1)) > 20 * G0


def test_high_dynamics_unreachable_threshold():
    with pytest.raises(TrajectoryError, match="peak acceleration"):
        build_trajectory(HighDynamicsProfile(0.0, 0.0, 0.0, 0.0, 5.0, 300.0, 45.0, min_peak_accel=20 * G0))


def test_trajectory_determinism():
    p = HighDynamicsProfile(26.5, 80.2, 100.0, 0.0, 5.0, 2000.0, 30.0, 0.0, 5e-5)
    a, b = build_trajectory(p), build_trajectory(p)
    assert a.r.tobytes() == b.r.tobytes() and a.v.tobytes() == b.v.tobytes()
