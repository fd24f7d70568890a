import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpstwin.atmosphere import (MAGNUS_STANDARD, klobuchar_delay, klobuchar_slant_factor, saastamoinen_ztd,
                                slant_tropo, standard_meteo, tropo_mapping)
from gpstwin.channel import (AntennaPattern, ChannelModel, ClockModel, doppler_consistency, free_space_loss_db,
                             los_doppler, propagation_delay, received_power)
from gpstwin.constants import C, F_L1
from gpstwin.scenario.trajectory import HighDynamicsProfile, ModerateProfile, StaticProfile, build_trajectory
from oracles import klobuchar_oracle, saastamoinen_oracle

T0 = 284400.0


def test_los_doppler_examples():
    r_s, r_u = np.array([2.2e7, 0, 0]), np.array([6.4e6, 0, 0])
    v = np.array([10.0, 20.0, 30.0])
    assert los_doppler(r_s, v, r_u, v) == 0.0
    assert los_doppler(r_s, np.array([0, 900.0, 0]), r_u, np.zeros(3)) == 0.0
    fd = los_doppler(r_s, np.array([-800.0, 0, 0]), r_u, np.zeros(3))
    assert fd == pytest.approx(800.0 * F_L1 / 299792458.0)
    assert fd == pytest.approx(4204.0, abs=0.1)


def test_propagation_delay_examples():
    r_s, r_u = np.array([20086.3e3, 0, 0]), np.zeros(3)
    # 20086.3 km / c evaluated independently: 0.0670006849 s
    assert propagation_delay(r_s, r_u) == pytest.approx(0.0670006849, abs=1e-7)
    assert propagation_delay(r_s, r_u) == pytest.approx(0.067, abs=1e-6)
    assert propagation_delay(r_s, r_u) * C == pytest.approx(20086.3e3, rel=1e-15)
    extra = propagation_delay(r_s, r_u, 3.0, 2.4) - propagation_delay(r_s, r_u)
    assert extra == pytest.approx(5.4 / C) and extra * 1e9 == pytest.approx(18.0, abs=0.05)
    with pytest.raises(ValueError):
        propagation_delay(r_s, r_u, -1.0, 0.0)


def test_received_power_examples():
    assert free_space_loss_db(20200e3) == pytest.approx(182.5, abs=0.1)
    c1, _ = received_power(1.0, 0.0, 0.0, 2.0e7)
    c2, _ = received_power(1.0, 0.0, 0.0, 4.0e7)
    assert 10 * np.log10(c1 / c2) == pytest.approx(20 * np.log10(2), abs=1e-12)
    n0 = 10 ** (-204 / 10)
    c = 10 ** (45 / 10) * n0
    assert 10 * np.log10(c) == pytest.approx(-159.0)
    _, cn0 = received_power(26.8, 13.0, 0.0, 2.2e7, n0=n0)
    assert 40 < cn0 < 50
    with pytest.raises(ValueError):
        received_power(1.0, 0, 0, 2e7, l_atm=0.0)


def test_antenna_pattern():
    p = AntennaPattern.default_patch()
    assert np.all(np.isfinite(p(np.linspace(0, np.pi / 2, 50))))
    with pytest.raises(ValueError):
        AntennaPattern(np.array([0.0]), np.array([1.0]))


def test_antenna_from_file(tmp_path):
    f = tmp_path / "ant.txt"
    f.write_text("# el gain\n0 -5\n90 3\n")
    p = AntennaPattern.from_file(f)
    assert p(np.pi / 4) == pytest.approx(-1.0)


def test_klobuchar_floor_and_zenith():
    zero = (0.0, 0.0, 0.0, 0.0)
    el = np.radians(35.0)
    d = klobuchar_delay(zero, zero, 0.5, 1.0, el, 1.0, 40000.0)
    assert d == pytest.approx(C * 5e-9 * klobuchar_slant_factor(el))
    assert klobuchar_slant_factor(np.pi / 2) == pytest.approx(1.0 + 16 * 0.03 ** 3)


def test_klobuchar_zenith_obliquity_close_to_one():
    assert klobuchar_slant_factor(np.pi / 2) == pytest.approx(1.0, abs=5e-4)


def test_klobuchar_matches_oracle_daytime(iono):
    d = klobuchar_delay(*iono, np.radians(40), np.radians(-100), np.radians(20), np.radians(210), 50000.0)
    ref = klobuchar_oracle(*iono, 40, -100, 20, 210, 50000.0)
    assert 1.0 < d < 10.0
    assert abs(d - ref) < 1e-6


@settings(max_examples=300, deadline=None)
@given(st.floats(-89, 89), st.floats(-180, 180), st.floats(1, 90), st.floats(0, 359.9), st.floats(0, 604799))
def test_klobuchar_oracle_property(lat, lon, el, az, tow):
    a, b = (0.1118e-07, 0.7451e-08, -0.5960e-07, -0.5960e-07), (0.9011e05, 0.1638e05, -0.1966e06, -0.6554e05)
    d = klobuchar_delay(a, b, np.radians(lat), np.radians(lon), np.radians(el), np.radians(az), tow)
    assert abs(d - klobuchar_oracle(a, b, lat, lon, el, az, tow)) < 1e-6


def test_saastamoinen_examples():
    dry = saastamoinen_ztd(1013.25, 15.0, 0.0, np.radians(45), 0.0)
    assert dry == pytest.approx(0.002277 * 1013.25, abs=1e-3)
    assert dry == pytest.approx(2.307, abs=1e-3)
    wet = saastamoinen_ztd(1013.25, 20.0, 0.5, np.radians(45), 0.0)
    assert wet == pytest.approx(2.405, abs=2e-3)


@settings(max_examples=300, deadline=None)
@given(st.floats(301, 1099), st.floats(-59, 59), st.floats(0, 1), st.floats(-89, 89), st.floats(0, 5))
def test_saastamoinen_oracle_property(p, t, rh, lat, h):
    for magnus in (273.3, MAGNUS_STANDARD):
        ours = saastamoinen_ztd(p, t, rh, np.radians(lat), h, magnus)
        assert abs(ours - saastamoinen_oracle(p, t, rh, lat, h, magnus)) < 1e-6


def test_saastamoinen_preconditions():
    with pytest.raises(ValueError):
        saastamoinen_ztd(1000.0, 10.0, 1.5, 0.0, 0.0)
    with pytest.raises(ValueError):
        saastamoinen_ztd(1000.0, 10.0, 0.5, 0.0, 4000.0)


def test_mapping_examples():
    assert tropo_mapping(np.pi / 2) == pytest.approx(1.001 / math.sqrt(1.002001), abs=1e-12)
    assert tropo_mapping(np.pi / 2) == pytest.approx(1.0, abs=1e-4)
    m30 = tropo_mapping(np.radians(30))
    # 1.001 / sqrt(0.002001 + 0.25) = 1.99404
    assert m30 == pytest.approx(1.99404, abs=1e-5) and abs(m30 - 2) / 2 < 0.005
    el = np.radians(np.linspace(5.001, 90, 500))
    assert np.all(np.diff(tropo_mapping(el)) < 0)
    assert np.all(np.diff(klobuchar_slant_factor(el)) < 0)
    assert slant_tropo(2.4, np.pi / 2) == pytest.approx(2.4, abs=1e-3)
    with pytest.raises(ValueError):
        slant_tropo(2.4, np.radians(4.0))


def test_standard_meteo_clamped():
    p, t, rh = standard_meteo(60000.0)
    assert p >= 0 and t > -273.15 and rh == 0.5
    assert standard_meteo(0.0)[0] == pytest.approx(1013.25)


def _trajectories():
    st_ = build_trajectory(StaticProfile(26.5, 80.2, 100.0, T0 - 5, 130.0))
    mo = build_trajectory(ModerateProfile(26.5, 80.2, 100.0, [(T0 - 5, 0, 0, 0), (T0 + 50, 1000.0, 0, 0),
                                                              (T0 + 120, 1000.0, 1500.0, 0)], corner_time=4.0))
    hd = build_trajectory(HighDynamicsProfile(26.5, 80.2, 100.0, T0 - 5, 60.0, 3000.0, 20.0, 30.0, 5e-5))
    return {"static": st_, "moderate": mo, "high_dynamics": hd}


@pytest.mark.parametrize("kind", ["static", "moderate", "high_dynamics"])
def test_doppler_range_rate_consistency(nav, kind):
    tr = _trajectories()[kind]
    t = np.arange(T0, T0 + 50.0, 0.01)
    for e in list(nav.ephemerides.values())[:6]:
        fd, fd_fd = doppler_consistency(e, tr, t)
        assert np.sqrt(np.mean((fd - fd_fd) ** 2)) < 0.05


def test_truth_track_invariants(nav):
    tr = _trajectories()["static"]
    model = ChannelModel()
    t = T0 + np.arange(0, 10, 0.01)
    for e in nav.ephemerides.values():
        trk = model.truth_track(e, tr, t)
        if trk.elevation.min() < np.radians(5):
            continue
        assert np.all(trk.tau_total * C >= trk.geometric_range)
        assert np.all((0.060 < trk.tau_total) & (trk.tau_total < 0.095))
        assert np.all(np.isfinite(trk.cn0))
        assert np.all((trk.cn0 > 40) & (trk.cn0 < 50))
        # ionospheric code-carrier divergence
        assert np.allclose(trk.code_delay - trk.carrier_delay, 2 * trk.iono / C)


def test_truth_track_clock_and_atmosphere_switches(nav):
    tr = _trajectories()["static"]
    e = next(iter(nav.ephemerides.values()))
    t = T0 + np.arange(0, 2, 0.01)
    base = ChannelModel(ionosphere=False, troposphere=False).truth_track(e, tr, t)
    clk = ChannelModel(ionosphere=False, troposphere=False, clock=ClockModel(1e-3, 0.0, T0)).truth_track(e, tr, t)
    assert np.all(base.iono == 0) and np.all(base.tropo == 0)
    # a receiver clock ahead by 1 ms adds 1 ms to the pseudorange (minus a tiny geometry change)
    assert np.allclose(clk.code_delay - base.code_delay, 1e-3, atol=1e-9)
    assert np.allclose(base.tau_total * C, base.geometric_range)
