"""Signal and clock-domain validation: PSD, Allan deviation, drift fits, observable comparison."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .constants import F_CA


def estimate_psd(samples, fs, segment=4096, overlap=0.5):
    """Welch PSD of a complex stream: (frequency Hz ascending over +-fs/2, PSD dB/Hz).

    Hann window, power-normalized, two-sided; the integral of the linear PSD
    equals the mean power of the input.
    """
    x = np.asarray(samples.samples if hasattr(samples, "samples") else samples)
    if segment > len(x):
        raise ValueError("segment longer than data")
    if len(x) < 2 * segment:
        raise ValueError("need at least two segments")
    f, p = signal.welch(x, fs=fs, window="hann", nperseg=segment, noverlap=int(segment * overlap),
                        detrend=False, return_onesided=False, scaling="density")
    f, p = np.fft.fftshift(f), np.fft.fftshift(p)
    return f, 10.0 * np.log10(np.maximum(p, 1e-300))


def estimate_psd_stream(blocks, fs, segment=4096, overlap=0.5):
    """Welch PSD over an iterable of sample blocks, averaged with equal weight per segment.

    Segments do not straddle block boundaries, so memory stays at one block.
    """
    acc, count, f = None, 0, None
    for b in blocks:
        x = np.asarray(b.samples if hasattr(b, "samples") else b)
        if len(x) < segment:
            continue
        f, p = signal.welch(x, fs=fs, window="hann", nperseg=segment, noverlap=int(segment * overlap),
                            detrend=False, return_onesided=False, scaling="density", average="mean")
        step = segment - int(segment * overlap)
        n_seg = (len(x) - segment) // step + 1
        acc = p * n_seg if acc is None else acc + p * n_seg
        count += n_seg
    if count < 2:
        raise ValueError("need at least two segments")
    return np.fft.fftshift(f), 10.0 * np.log10(np.maximum(np.fft.fftshift(acc / count), 1e-300))


@dataclass(frozen=True)
class NullReport:
    lower: float                  # Hz offset of the lower null from the centre
    upper: float
    depth_lower: float            # dB below the main-lobe peak
    depth_upper: float


def bpsk_nulls(f, psd_db, center=0.0, chip_rate=F_CA, search=0.05e6):
    """Locate the first spectral nulls of a BPSK main lobe around ``center``.

    Near a null the linear PSD is locally quadratic in frequency, so the null
    is the vertex of a least-squares parabola over +-``search`` around
    +-chip_rate; this is insensitive to the code's 1 kHz line structure. Depth
    is the main-lobe peak over the fitted floor, both in a ``search`` average.
    """
    lin = 10 ** (np.asarray(psd_db) / 10)
    rel = f - center
    df = f[1] - f[0]
    k = max(1, int(round(search / 10 / df)))
    smooth = np.convolve(lin, np.ones(k) / k, mode="same")
    peak = smooth[np.abs(rel) < 0.3 * chip_rate].max()
    out = []
    for side in (-1, 1):
        sel = np.abs(rel - side * chip_rate) < search
        x = rel[sel] - side * chip_rate
        c2, c1, c0 = np.polyfit(x / search, lin[sel], 2)
        if c2 <= 0:
            raise ValueError("no null found near the expected offset")
        v = -c1 / (2 * c2)
        floor = c0 - c1 * c1 / (4 * c2)
        floor = max(floor, float(np.min(smooth[sel])))
        out.append((float(side * chip_rate + v * search), float(10 * np.log10(peak / floor))))
    return NullReport(out[0][0], out[1][0], out[0][1], out[1][1])


@dataclass
class ClockSeries:
    epochs: np.ndarray            # s
    bias: np.ndarray              # s
    tau0: float = field(default=None)

    def __post_init__(self):
        self.epochs = np.asarray(self.epochs, float)
        self.bias = np.asarray(self.bias, float)
        if len(self.epochs) != len(self.bias):
            raise ValueError("epochs and bias differ in length")
        if len(self.bias) < 3:
            raise ValueError("need at least 3 samples")
        d = np.diff(self.epochs)
        if self.tau0 is None:
            self.tau0 = float(np.mean(d))
        if np.any(np.abs(d - self.tau0) > 1e-6 * self.tau0):
            raise ValueError("epochs are not uniformly spaced")


def allan_deviation(cs: ClockSeries, taus):
    """Overlapping Allan deviation from a time-error series: [(tau, sigma)].

    sigma^2(tau) = sum (x[i+2m] - 2 x[i+m] + x[i])^2 / (2 (N - 2m) tau^2), tau = m tau0.
    """
    x = cs.bias
    n = len(x)
    out = []
    for tau in np.atleast_1d(taus):
        m_f = tau / cs.tau0
        m = int(round(m_f))
        if m < 1 or abs(m_f - m) > 1e-6 * max(1.0, m_f):
            raise ValueError(f"tau {tau} is not a multiple of tau0 {cs.tau0}")
        if n - 2 * m < 1:
            raise ValueError(f"too few clusters for tau {tau}")
        d2 = x[2 * m:] - 2 * x[m:n - m] + x[:n - 2 * m]
        tau_m = m * cs.tau0
        out.append((float(tau_m), float(np.sqrt(np.sum(d2 ** 2) / (2 * (n - 2 * m) * tau_m ** 2)))))
    return out


def fit_clock_drift(cs: ClockSeries, t_ref=None):
    """Least-squares line through the bias series: (bias at t_ref, drift s/s, residual RMS s).

    ``t_ref`` defaults to the first epoch.
    """
    t_ref = cs.epochs[0] if t_ref is None else t_ref
    t = cs.epochs - t_ref
    tm = t.mean()
    a = np.vstack([np.ones_like(t), t - tm]).T
    (c0, c1), *_ = np.linalg.lstsq(a, cs.bias, rcond=None)
    res = cs.bias - (c0 + c1 * (t - tm))
    return float(c0 - c1 * tm), float(c1), float(np.sqrt(np.mean(res ** 2)))


@dataclass
class Comparison:
    errors: dict                  # PRN -> {"t": ..., "pseudorange": ..., "doppler": ..., "carrier_phase": ...}
    summary: dict                 # PRN -> metric -> {"mean", "rms", "max"}

    def rms(self, metric):
        return {p: s[metric]["rms"] for p, s in self.summary.items()}


def _stats(v):
    v = np.asarray(v, float)
    return {"mean": float(np.mean(v)), "rms": float(np.sqrt(np.mean(v ** 2))), "max": float(np.max(np.abs(v)))}


def compare_observables(truth, est, epoch_tol=1e-6) -> Comparison:
    """Per-PRN error series est - truth on common epochs.

    Pseudorange errors have the per-epoch common mode across PRNs removed
    (receiver clock); carrier-phase errors have the per-PRN integer offset
    removed (ambiguity).
    """
    key = lambda r: (int(round(r.t_rx / epoch_tol)), r.prn)
    tmap = {key(r): r for r in truth}
    pairs = [(tmap[key(r)], r) for r in est if key(r) in tmap]
    if not pairs:
        raise ValueError("no common PRNs/epochs")
    by_epoch = {}
    for tr, er in pairs:
        by_epoch.setdefault(key(tr)[0], []).append(er.pseudorange - tr.pseudorange)
    common = {k: float(np.mean(v)) for k, v in by_epoch.items()}
    raw = {}
    for tr, er in pairs:
        d = raw.setdefault(tr.prn, {"t": [], "pseudorange": [], "doppler": [], "carrier_phase": []})
        d["t"].append(tr.t_rx)
        d["pseudorange"].append(er.pseudorange - tr.pseudorange - common[key(tr)[0]])
        d["doppler"].append(er.doppler - tr.doppler)
        d["carrier_phase"].append(er.carrier_phase - tr.carrier_phase)
    errors, summary = {}, {}
    for prn, d in sorted(raw.items()):
        arr = {k: np.asarray(v, float) for k, v in d.items()}
        arr["carrier_phase"] = arr["carrier_phase"] - np.round(np.mean(arr["carrier_phase"]))
        errors[prn] = arr
        summary[prn] = {k: _stats(arr[k]) for k in ("pseudorange", "doppler", "carrier_phase")}
    return Comparison(errors, summary)


@dataclass(frozen=True)
class Metric:
    name: str
    value: float
    threshold: float
    passed: bool
    note: str = ""


def metric(name, value, threshold, below=True, note=""):
    ok = bool(value < threshold) if below else bool(value >= threshold)
    return Metric(name, float(value), float(threshold), ok, note)


def verdict(metrics):
    """Text verdict (one line per metric plus an overall line) and the overall flag."""
    lines = []
    for m in metrics:
        lines.append(f"{'PASS' if m.passed else 'FAIL'} {m.name} value={m.value:.6g} threshold={m.threshold:.6g}"
                     + (f" ({m.note})" if m.note else ""))
    ok = all(m.passed for m in metrics)
    lines.append(f"OVERALL {'PASS' if ok else 'FAIL'}")
    return "\n".join(lines) + "\n", ok
