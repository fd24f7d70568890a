"""Vectorized numpy versions of the compiled kernels (reference semantics)."""
from __future__ import annotations

import numpy as np


def synth_accumulate(out, k0, fs, h, seg_first, chip_c, phase_c, amp_c, code, bits, chips_per_bit):
    """Add one channel's samples into ``out`` (absolute sample indices k0..k0+len-1).

    Segment j covers receiver-relative time [j*h, (j+1)*h); each row of the
    coefficient arrays holds a polynomial in the local time s within it:
    chip count (cubic), carrier phase in cycles (cubic), amplitude (linear).
    """
    n = len(out)
    k = k0 + np.arange(n, dtype=np.int64)
    t = k.astype(np.float64) / fs
    jabs = np.floor(t / h).astype(np.int64)
    j = jabs - seg_first
    if j.min() < 0 or j.max() >= len(chip_c):
        raise IndexError("sample outside supplied truth segments")
    s = t - jabs.astype(np.float64) * h
    cc, pc, ac = chip_c[j], phase_c[j], amp_c[j]
    chips = cc[:, 0] + s * (cc[:, 1] + s * (cc[:, 2] + s * cc[:, 3]))
    ci = np.floor(chips).astype(np.int64)
    bi = np.where(ci >= 0, ci // chips_per_bit, -1)
    if bi.min() < 0 or bi.max() >= len(bits):
        raise IndexError("chip count outside navigation message")
    ph = pc[:, 0] + s * (pc[:, 1] + s * (pc[:, 2] + s * pc[:, 3]))
    amp = ac[:, 0] + ac[:, 1] * s
    v = amp * code[ci % len(code)] * bits[bi]
    ph = 2.0 * np.pi * ph
    out += v * np.cos(ph) + 1j * (v * np.sin(ph))


def correlate_epl(x, start, n, code, chip0, chip_step, ph0, ph_step, spacing):
    """Early, prompt and late correlations of ``x[start:start+n]``.

    The replica carrier phase is ph0 + i*ph_step cycles and the replica code
    phase chip0 + i*chip_step chips; early leads prompt by spacing/2 chips.
    """
    if start < 0 or start + n > len(x):
        raise IndexError("correlation window outside sample buffer")
    i = np.arange(n, dtype=np.float64)
    c = chip0 + i * chip_step
    ph = -2.0 * np.pi * (ph0 + i * ph_step)
    w = x[start:start + n] * (np.cos(ph) + 1j * np.sin(ph))
    m = len(code)
    half = 0.5 * spacing
    p = np.dot(w, code[np.floor(c).astype(np.int64) % m])
    e = np.dot(w, code[np.floor(c + half).astype(np.int64) % m])
    l = np.dot(w, code[np.floor(c - half).astype(np.int64) % m])
    return complex(e), complex(p), complex(l)
