"""Hand-built truth tracks with constant Doppler, for exact small-signal tests."""
import numpy as np

from gpstwin.channel import TruthTrack
from gpstwin.codegen import ca_code
from gpstwin.constants import F_L1
from gpstwin.synth import build_plan

H = 0.01


def const_track(fd=0.0, amp=1.0, seconds=0.3, d0=0.0, prn=1):
    """Track whose code delay falls at the rate implied by ``fd``: D(t) = d0 - fd t / f_L1."""
    n = int(round(seconds / H)) + 2
    t = np.arange(n) * H
    d = d0 - fd / F_L1 * t
    rate = np.full(n, -fd / F_L1)
    z = np.zeros(n)
    z3 = np.zeros((n, 3))
    return TruthTrack(prn, t, d, rate, d.copy(), rate.copy(), z, z, z, z, z, z, np.full(n, amp ** 2), z, z,
                      z3, z3, z3, z3)


def const_plan(fd=0.0, amp=1.0, seconds=0.3, d0=0.0, prn=1, levels=None, phase0=0.0, if_center=0.0):
    tr = const_track(fd, amp, seconds, d0, prn)
    n_bits = int(seconds * 50) + 3
    lv = np.ones(n_bits, np.int8) if levels is None else np.asarray(levels, np.int8)
    return build_plan(tr, 0, len(tr.t_rx) - 1, 0.0, 0.0, ca_code(prn).chips, lv, if_center, phase0, h=H)
