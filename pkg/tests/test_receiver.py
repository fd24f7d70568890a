import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpstwin import kernels
from gpstwin.codegen import ca_code
from gpstwin.constants import CA_LEN, F_CA, F_L1
from gpstwin.receiver.acquisition import AcquisitionError, acquire, refine_doppler
from gpstwin.receiver.tracking import (JitterThresholds, LoopParams, TrackingChannel, dll_discriminator,
                                       estimate_cn0, fll_discriminator, jitter_report, nwpr_cn0, pll_discriminator)
from gpstwin.synth import synthesize_channel_block
from synthetic import const_plan

FS = 2.5e6


def _signal(fd, chip0, seconds, cn0=None, prn=1, seed=0, amp=1.0):
    """Constant-Doppler signal whose chip phase at sample 0 is ``chip0``, plus optional noise."""
    levels = np.random.default_rng(seed + 1000).choice([-1, 1], int((seconds + 0.05) * 50) + 3)
    plan = const_plan(fd, amp, seconds + 0.05, d0=-chip0 / F_CA, prn=prn, levels=levels)
    n = int(round(seconds * FS))
    x = np.concatenate([synthesize_channel_block(plan, k, min(125000, n - k), FS)[0] for k in range(0, n, 125000)])
    if cn0 is not None:
        n0 = amp ** 2 / 10 ** (cn0 / 10)
        rng = np.random.default_rng(seed)
        x = x + math.sqrt(n0 * FS / 2) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return x


def _noise(n, seed):
    rng = np.random.default_rng(seed)
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2)


# -- acquisition ------------------------------------------------------------

def test_acquires_doppler_and_code_phase():
    x = _signal(1000.0, 512.0, 0.02, cn0=45.0, seed=7)
    r = acquire(x, FS, 1)
    assert r.detected
    assert r.doppler == 1000.0
    assert abs(r.code_phase - 512.0) < 0.5
    fd = refine_doppler(x, FS, 1, r.code_phase, r.doppler)
    assert abs(fd - 1000.0) < 25.0


def test_acquisition_false_alarm_rate_on_noise():
    n = int(FS * 0.01)
    hits = sum(acquire(_noise(n, s), FS, 1 + s % 32).detected for s in range(100))
    assert hits / 100 < 0.01


def test_absent_prn_not_detected():
    x = _signal(-2000.0, 100.0, 0.01, cn0=45.0, seed=3)
    assert acquire(x, FS, 1).detected
    assert not acquire(x, FS, 2).detected


def test_acquisition_input_errors():
    x = _noise(int(FS * 0.01), 0)
    with pytest.raises(AcquisitionError):
        acquire(x, FS, 1, doppler_span=10e3, doppler_bin=300.0)
    with pytest.raises(AcquisitionError):
        acquire(x[: int(FS * 0.005)], FS, 1)
    with pytest.raises(AcquisitionError):
        refine_doppler(x, FS, 1, 0.0, 0.0)


# -- discriminators ---------------------------------------------------------

def _epl(tau, spacing=0.5, fs=50e6):
    """Early/prompt/late correlations of a code-only signal against a replica ``tau`` chips early."""
    n = int(round(fs * 1e-3))
    code = ca_code(1).chips
    chips = np.arange(n) * F_CA / fs
    x = code[np.floor(chips).astype(int) % CA_LEN].astype(np.complex128)
    return kernels.correlate_epl(x, 0, n, code, -tau, F_CA / fs, 0.0, 0.0, spacing)


def test_dll_discriminator_slope():
    e, p, l = _epl(0.1)
    assert dll_discriminator(e, l, 0.5) == pytest.approx(0.1, abs=0.005)
    e, p, l = _epl(-0.1)
    assert dll_discriminator(e, l, 0.5) == pytest.approx(-0.1, abs=0.005)
    e, p, l = _epl(0.0)
    assert abs(dll_discriminator(e, l, 0.5)) < 1e-3
    assert dll_discriminator(0j, 0j, 0.5) == 0.0


def test_pll_discriminator():
    p = np.exp(1j * math.radians(10.0))
    assert math.degrees(pll_discriminator(p)) == pytest.approx(10.0, abs=0.1)
    assert math.degrees(pll_discriminator(-p)) == pytest.approx(10.0, abs=0.1)
    assert pll_discriminator(1 + 0j) == 0.0
    assert pll_discriminator(1j) == pytest.approx(math.pi / 2)


@settings(max_examples=50, deadline=None)
@given(f=st.floats(-240.0, 240.0))
def test_fll_discriminator_recovers_frequency(f):
    dt = 1e-3
    assert fll_discriminator(1 + 0j, np.exp(2j * math.pi * f * dt), dt) == pytest.approx(f, abs=1e-6)


def test_thresholds():
    th = JitterThresholds.for_loop(0.5, 1e-3)
    assert th.sigma_dll_th == pytest.approx(1 / 12)
    assert th.sigma_pll_th == 15.0
    assert th.sigma_fll_th == pytest.approx(83.33, abs=0.01)


def test_jitter_report_zero_history():
    z = np.zeros(200)
    rep = jitter_report(z, z, z)
    assert rep.passed and rep.sigma_dll == 0.0
    assert rep.margins() == {"dll": 1.0, "pll": 1.0, "fll": 1.0}
    with pytest.raises(ValueError):
        jitter_report(z[:50], z, z)


def test_jitter_report_ignores_nan_and_flags_failure():
    rng = np.random.default_rng(1)
    dll = rng.normal(0, 0.1, 1000)
    pll = rng.normal(0, 5, 1000)
    fll = rng.normal(0, 10, 1000)
    fll[::20] = np.nan
    rep = jitter_report(dll, pll, fll)
    assert not rep.pass_dll and rep.pass_pll and rep.pass_fll
    assert not rep.passed


# -- C/N0 -------------------------------------------------------------------

def _prompt_history(cn0, n_bits, seed, t=1e-3):
    rng = np.random.default_rng(seed)
    sigma = math.sqrt(1.0 / (2 * 10 ** (cn0 / 10) * t))   # unit amplitude, per-component noise
    bits = np.repeat(rng.choice([-1.0, 1.0], n_bits), 20)
    ph = 0.2
    i = bits * math.cos(ph) + sigma * rng.standard_normal(len(bits))
    q = bits * math.sin(ph) + sigma * rng.standard_normal(len(bits))
    return i, q


@pytest.mark.parametrize("cn0", [40.0, 45.0, 50.0])
def test_cn0_estimator_monte_carlo(cn0):
    est = [estimate_cn0(*_prompt_history(cn0, 500, s), 1e-3) for s in range(20)]
    assert abs(np.mean(est) - cn0) < 0.5


def test_cn0_noiseless_and_limits():
    i = np.repeat([1.0, -1.0, 1.0], 20)
    assert estimate_cn0(i, np.zeros_like(i), 1e-3) > 55
    assert nwpr_cn0(20, 20, 1e-3) == float("inf")
    assert nwpr_cn0(1.0, 20, 1e-3) == float("-inf")
    with pytest.raises(ValueError):
        estimate_cn0(i[:30], i[:30], 1e-3)


# -- closed loop ------------------------------------------------------------

def _channel_for(fd, chip0, doppler_err, code_err, params=None):
    rate = F_CA * (1 + fd / F_L1)
    pos0 = (CA_LEN - chip0 + code_err) / rate * FS
    return TrackingChannel(1, FS, pos0, fd + doppler_err, params or LoopParams(), noise_power=1.0)


def _run(ch, x):
    while math.ceil(ch.interval_end()) <= len(x):
        ch.step(x, 0)
    return ch


def test_loop_pulls_in_and_locks_noiseless():
    fd = 1500.0
    x = _signal(fd, 300.0, 1.5)
    ch = _run(_channel_for(fd, 300.0, 40.0, 0.2), x)
    dop = ch.history("doppler")
    assert abs(dop[-200:] - fd).max() < 0.5
    # at 2.44 samples/chip the sampled correlator steps as the code slides past the grid
    assert abs(ch.history("dll")[-200:]).max() < 0.02
    assert abs(np.degrees(ch.history("pll")[-200:])).max() < 2.0
    assert ch.bit_edge is not None and ch.mode == "pll"
    assert not ch.lost


def test_loop_tracks_in_noise():
    fd = -800.0
    x = _signal(fd, 700.0, 2.0, cn0=45.0, seed=11)
    ch = _run(_channel_for(fd, 700.0, 20.0, 0.1), x)
    keep = ch.history("t") >= 0.5 * FS
    rep = jitter_report(ch.history("dll")[keep], np.degrees(ch.history("pll")[keep]), ch.history("fll")[keep])
    assert rep.passed
    assert not ch.lost
    assert abs(ch.cn0 - 45.0) < 1.5


def test_loop_parameter_validation():
    with pytest.raises(ValueError):
        TrackingChannel(1, FS, 0.0, 0.0, LoopParams(spacing=1.5))
    with pytest.raises(ValueError):
        TrackingChannel(1, FS, 0.0, 0.0, LoopParams(integration_time=3e-3))
