"""Parallel code-phase acquisition and fine-frequency refinement."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..codegen import ca_code
from ..constants import CA_LEN, CA_PERIOD, F_CA


class AcquisitionError(ValueError):
    pass


@dataclass(frozen=True)
class AcquisitionResult:
    prn: int
    detected: bool
    code_phase: float        # received chip phase at the first sample, [0, 1023)
    doppler: float           # Hz
    peak_metric: float       # peak / second peak in the same Doppler bin


def sampled_code(prn, fs, n, chip0=0.0, chip_rate=F_CA):
    chips = ca_code(prn).chips.astype(np.float64)
    idx = np.floor(chip0 + np.arange(n) * chip_rate / fs).astype(np.int64) % CA_LEN
    return chips[idx]


def acquire(samples, fs, prn, doppler_span=10e3, doppler_bin=500.0, if_center=0.0, n_noncoherent=10,
            threshold=2.0, doppler_center=0.0) -> AcquisitionResult:
    """FFT circular-correlation search over code phase x Doppler.

    ``samples`` must hold at least ``n_noncoherent`` (and >= 2) code periods.
    Each 1 ms period is correlated coherently; periods are combined
    non-coherently.
    """
    x = np.asarray(samples.samples if hasattr(samples, "samples") else samples)
    if doppler_bin <= 0 or abs(doppler_span / doppler_bin - round(doppler_span / doppler_bin)) > 1e-9:
        raise AcquisitionError("doppler span must be a multiple of the bin")
    n = int(round(fs * CA_PERIOD))
    m = max(2, int(n_noncoherent))
    if len(x) < m * n:
        raise AcquisitionError(f"need {m} code periods ({m * n} samples), got {len(x)}")
    code_f = np.conj(np.fft.fft(sampled_code(prn, fs, n)))
    dopplers = doppler_center + np.arange(-doppler_span, doppler_span + doppler_bin / 2, doppler_bin)
    t = np.arange(n) / fs
    power = np.zeros((len(dopplers), n))
    blocks = x[: m * n].reshape(m, n)
    for r in range(m):
        t_abs = t + r * n / fs
        for i, fd in enumerate(dopplers):
            w = blocks[r] * np.exp(-2j * np.pi * (if_center + fd) * t_abs)
            power[i] += np.abs(np.fft.ifft(np.fft.fft(w) * code_f)) ** 2
    i_d, k = np.unravel_index(np.argmax(power), power.shape)
    row = power[i_d]
    excl = int(np.ceil(fs / F_CA)) + 1
    mask = np.ones(n, bool)
    lags = (np.arange(n) - k + n // 2) % n - n // 2
    mask[np.abs(lags) <= excl] = False
    second = row[mask].max()
    metric = float(row[k] / second) if second > 0 else float("inf")
    # parabolic refinement of the lag
    y0, y1, y2 = row[(k - 1) % n], row[k], row[(k + 1) % n]
    den = y0 - 2 * y1 + y2
    frac = 0.5 * (y0 - y2) / den if den != 0 else 0.0
    lag = k + float(np.clip(frac, -0.5, 0.5))
    code_phase = float(np.mod(-lag * F_CA / fs, CA_LEN))
    return AcquisitionResult(prn, metric > threshold, code_phase, float(dopplers[i_d]), metric)


def refine_doppler(samples, fs, prn, code_phase, doppler, if_center=0.0, coherent_ms=5, total_ms=20,
                   half_span=250.0, step=25.0):
    """Fine Doppler from longer coherent windows with the code wiped off.

    Coherent sums over ``coherent_ms`` windows are combined non-coherently
    over ``total_ms``; the grid maximum is refined by a parabola.
    """
    x = np.asarray(samples.samples if hasattr(samples, "samples") else samples)
    n = int(round(total_ms * 1e-3 * fs))
    if len(x) < n:
        raise AcquisitionError("not enough samples for frequency refinement")
    rate = F_CA * (1.0 + doppler / 1575.42e6)
    rep = sampled_code(prn, fs, n, code_phase, rate)
    y = x[:n] * rep
    t = np.arange(n) / fs
    w = int(round(coherent_ms * 1e-3 * fs))
    grid = doppler + np.arange(-half_span, half_span + step / 2, step)
    p = np.zeros(len(grid))
    for i, f in enumerate(grid):
        z = y * np.exp(-2j * np.pi * (if_center + f) * t)
        nw = n // w
        p[i] = np.sum(np.abs(z[: nw * w].reshape(nw, w).sum(axis=1)) ** 2)
    i = int(np.argmax(p))
    if 0 < i < len(grid) - 1:
        y0, y1, y2 = p[i - 1], p[i], p[i + 1]
        den = y0 - 2 * y1 + y2
        off = 0.5 * (y0 - y2) / den if den != 0 else 0.0
        return float(grid[i] + np.clip(off, -0.5, 0.5) * step)
    return float(grid[i])
