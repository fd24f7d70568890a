import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpstwin.analysis import (ClockSeries, allan_deviation, bpsk_nulls, compare_observables, estimate_psd,
                              estimate_psd_stream, fit_clock_drift, metric, verdict)
from gpstwin.codegen import ca_code
from gpstwin.constants import CA_LEN, F_CA
from gpstwin.navigation import ObservableRecord

FS = 2.5e6


def _white(n, power, seed=0):
    rng = np.random.default_rng(seed)
    return np.sqrt(power / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))


def test_psd_parseval():
    x = _white(2 ** 18, 3.0) + 0.5 * np.exp(2j * np.pi * 2e5 * np.arange(2 ** 18) / FS)
    f, p = estimate_psd(x, FS)
    total = np.sum(10 ** (p / 10)) * (f[1] - f[0])
    assert total == pytest.approx(np.mean(np.abs(x) ** 2), rel=0.02)


def test_psd_white_noise_level():
    n0 = 1e-3
    f, p = estimate_psd(_white(2 ** 18, n0 * FS, 1), FS)
    assert np.median(p) == pytest.approx(10 * np.log10(n0), abs=0.2)
    assert np.all(np.diff(f) > 0) and f[0] == pytest.approx(-FS / 2)


def test_psd_tone_location():
    x = np.exp(2j * np.pi * -312.5e3 * np.arange(2 ** 16) / FS)
    f, p = estimate_psd(x, FS)
    assert f[np.argmax(p)] == pytest.approx(-312.5e3, abs=FS / 4096)


def test_psd_stream_matches_single_block():
    x = _white(2 ** 17, 1.0, 2)
    f1, p1 = estimate_psd(x, FS)
    f2, p2 = estimate_psd_stream([x], FS)
    assert np.allclose(f1, f2) and np.allclose(p1, p2)
    with pytest.raises(ValueError):
        estimate_psd(x[:5000], FS)
    with pytest.raises(ValueError):
        estimate_psd_stream([x[:1000]], FS)


def test_bpsk_nulls_on_code():
    # an integer number of samples per chip keeps chip edges on the grid, so the nulls are not
    # filled by edge-timing jitter
    fs = 10 * F_CA
    n = 2 ** 20
    chips = ca_code(3).chips
    bits = np.repeat(np.random.default_rng(0).choice([-1, 1], n // 200000 + 2), 200000)[:n]
    x = chips[np.floor(np.arange(n) * F_CA / fs).astype(int) % CA_LEN] * bits
    f, p = estimate_psd(x.astype(complex), fs, segment=8192)
    rep = bpsk_nulls(f, p)
    assert rep.lower == pytest.approx(-F_CA, abs=10e3)
    assert rep.upper == pytest.approx(F_CA, abs=10e3)
    assert min(rep.depth_lower, rep.depth_upper) > 20


def test_allan_hand_case():
    # x = [0, 1e-9, 0, 1e-9, ...]: second differences are all 2e-9 at m = 1
    x = np.tile([0.0, 1e-9], 50)
    cs = ClockSeries(np.arange(100.0), x)
    (tau, sig), = allan_deviation(cs, [1.0])
    assert tau == 1.0
    assert sig == pytest.approx(np.sqrt(2) * 1e-9, rel=1e-12)
    assert sig == pytest.approx(1.414e-9, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(b=st.floats(-1e-3, 1e-3), d=st.floats(-1e-6, 1e-6))
def test_allan_linear_ramp_is_zero(b, d):
    t = np.arange(200.0)
    res = allan_deviation(ClockSeries(t, b + d * t), [1.0, 5.0, 20.0])
    assert all(s < 1e-15 for _, s in res)


def test_allan_white_fm_slope():
    rng = np.random.default_rng(3)
    y = rng.standard_normal(200000) * 1e-10
    x = np.concatenate([[0.0], np.cumsum(y)])
    res = allan_deviation(ClockSeries(np.arange(len(x), dtype=float), x), [1.0, 10.0, 100.0, 1000.0])
    taus, sig = np.array(res).T
    slope = np.polyfit(np.log10(taus), np.log10(sig), 1)[0]
    assert slope == pytest.approx(-0.5, abs=0.05)
    assert sig[0] == pytest.approx(1e-10, rel=0.02)


@settings(max_examples=20, deadline=None)
@given(k=st.floats(1e-3, 1e3))
def test_allan_scales_linearly(k):
    x = np.random.default_rng(5).standard_normal(300) * 1e-9
    t = np.arange(300.0)
    a = allan_deviation(ClockSeries(t, x), [1.0, 7.0])
    b = allan_deviation(ClockSeries(t, k * x), [1.0, 7.0])
    for (_, s1), (_, s2) in zip(a, b):
        assert s2 == pytest.approx(k * s1, rel=1e-9)


def test_allan_input_errors():
    t = np.arange(20.0)
    with pytest.raises(ValueError):
        allan_deviation(ClockSeries(t, t * 0), [1.5])
    with pytest.raises(ValueError):
        allan_deviation(ClockSeries(t, t * 0), [10.0])
    with pytest.raises(ValueError):
        ClockSeries([0.0, 1.0, 3.0], [0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        ClockSeries([0.0, 1.0], [0.0, 0.0])


def test_fit_clock_drift():
    t = 1000.0 + np.arange(600) * 0.1
    noise = np.random.default_rng(7).normal(0, 1e-10, len(t))
    cs = ClockSeries(t, 3e-6 + 2e-8 * (t - 1000.0) + noise)
    b0, d, rms = fit_clock_drift(cs)
    assert b0 == pytest.approx(3e-6, abs=1e-10)
    assert d == pytest.approx(2e-8, abs=1e-11)
    assert rms == pytest.approx(1e-10, rel=0.1)
    b_mid, _, _ = fit_clock_drift(cs, t_ref=1030.0)
    assert b_mid == pytest.approx(3e-6 + 2e-8 * 30.0, abs=1e-10)


def _obs(t, prn, pr, dop=0.0, ph=0.0):
    return ObservableRecord(t, prn, pr, dop, ph, 45.0)


def test_compare_removes_common_mode_and_ambiguity():
    truth, est = [], []
    for k in range(10):
        t = 100.0 + k
        for prn, r in ((1, 2.0e7), (2, 2.1e7), (3, 2.2e7)):
            truth.append(_obs(t, prn, r + k, 1000.0, 50.0 * k))
            extra = 0.5 if prn == 2 else 0.0
            est.append(_obs(t, prn, r + k + 37.0 + extra, 1000.2, 50.0 * k + 12.0))
    cmp_ = compare_observables(truth, est)
    pr = cmp_.rms("pseudorange")
    assert pr[2] == pytest.approx(1 / 3, abs=1e-6)
    assert pr[1] == pytest.approx(1 / 6, abs=1e-6)
    assert cmp_.rms("doppler")[3] == pytest.approx(0.2, abs=1e-9)
    assert cmp_.rms("carrier_phase")[1] == pytest.approx(0.0, abs=1e-9)


def test_compare_symmetry_and_no_overlap():
    a = [_obs(1.0, p, 2e7 + p) for p in (1, 2, 3)]
    b = [_obs(1.0, p, 2e7 + p + (3.0 if p == 1 else 0.0)) for p in (1, 2, 3)]
    ab, ba = compare_observables(a, b), compare_observables(b, a)
    for prn in (1, 2, 3):
        assert ab.errors[prn]["pseudorange"] == pytest.approx(-ba.errors[prn]["pseudorange"])
    with pytest.raises(ValueError):
        compare_observables(a, [_obs(2.0, 1, 2e7)])


def test_verdict_lines():
    ms = [metric("dll", 0.05, 1 / 12), metric("cn0", 44.0, 45.0, below=False, note="dB-Hz")]
    text, ok = verdict(ms)
    assert not ok
    lines = text.splitlines()
    assert lines[0].startswith("PASS dll") and lines[1].startswith("FAIL cn0") and "(dB-Hz)" in lines[1]
    assert lines[-1] == "OVERALL FAIL"
    assert verdict(ms[:1]) == ("PASS dll value=0.05 threshold=0.0833333\nOVERALL PASS\n", True)
