"""Code/carrier tracking: discriminators, loop filters and the channel state machine.

A channel integrates over whole replica code periods, so every interval ends
on a replica code epoch. The carrier loop is a third-order PLL assisted by a
second-order FLL; the code loop is a carrier-aided first-order DLL.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..codegen import ca_code
from ..constants import CA_LEN, F_CA, F_L1

# FLL-assisted PLL coefficients (third-order PLL, second-order FLL)
A3, B3, A2 = 1.1, 2.4, 2.0 ** 0.5
W0_PER_BL_PLL3 = 1.0 / 0.7845
W0_PER_BL_FLL2 = 1.0 / 0.53
VALID_T_MS = (1, 2, 4, 10, 20)


def dll_discriminator(e, l, spacing):
    """Normalized non-coherent early-minus-late power, in chips (unit slope near zero)."""
    pe, pl = abs(e) ** 2, abs(l) ** 2
    s = pe + pl
    if s == 0:
        return 0.0
    return 0.5 * (1.0 - spacing / 2.0) * (pe - pl) / s


def pll_discriminator(p):
    """Costas arctangent, radians in (-pi/2, pi/2]; insensitive to data sign."""
    i, q = p.real, p.imag
    if i == 0.0:
        return math.copysign(math.pi / 2, q) if q != 0 else 0.0
    return math.atan(q / i)


def fll_discriminator(p_prev, p, dt, four_quadrant=True):
    """Cross/dot frequency error in Hz between consecutive prompt correlations."""
    cross = p_prev.real * p.imag - p.real * p_prev.imag
    dot = p_prev.real * p.real + p_prev.imag * p.imag
    if four_quadrant:
        ang = math.atan2(cross, dot)
    else:
        ang = math.atan(cross / dot) if dot != 0 else math.copysign(math.pi / 2, cross)
    return ang / (2.0 * math.pi * dt)


@dataclass
class LoopParams:
    spacing: float = 0.5
    integration_time: float = 1e-3
    dll_bandwidth: float = 2.0
    pll_bandwidth: float = 18.0
    fll_pullin_bandwidth: float = 10.0
    fll_bandwidth: float = 2.0
    pullin_time: float = 0.2
    pure_pll: bool = True
    lock_snr: float = 2.0           # mean |P|^2 over noise power below this -> weak window
    lock_windows: int = 5           # consecutive weak 20-interval windows -> lost

    @classmethod
    def from_config(cls, rc):
        return cls(rc.dll_spacing, rc.integration_time, rc.dll_bandwidth, rc.pll_bandwidth,
                   rc.fll_pullin_bandwidth, rc.fll_bandwidth, rc.pullin_time)


@dataclass
class Latch:
    """Raw measurement of one channel at one receiver epoch."""
    epoch: int                      # receiver epoch number
    sample: int                     # absolute sample index of the epoch
    code_epoch: int                 # replica code epochs since tracking start
    chips: float                    # replica chips since that code epoch
    doppler: float                  # Hz, loop frequency state
    carrier_cycles: float           # accumulated carrier phase minus IF, cycles
    cn0: float
    locked: bool


@dataclass
class TrackingChannel:
    prn: int
    fs: float
    pos: float                      # sample position of the current interval start (a code epoch)
    doppler: float                  # initial carrier Doppler, Hz
    params: LoopParams = field(default_factory=LoopParams)
    if_center: float = 0.0
    noise_power: float = 1.0        # per-sample complex noise variance estimate

    def __post_init__(self):
        if not 0 < self.params.spacing <= 1:
            raise ValueError("DLL spacing must lie in (0, 1]")
        t_ms = self.params.integration_time * 1e3
        if round(t_ms) not in VALID_T_MS or abs(t_ms - round(t_ms)) > 1e-9:
            raise ValueError("integration time must be 1, 2, 4, 10 or 20 ms")
        self.code = ca_code(self.prn).chips
        self.code_epoch = 0
        self.pos0 = self.pos
        self.acc_v = 2 * math.pi * self.doppler
        self.acc_a = 0.0
        self.code_rate = F_CA * (1.0 + self.doppler / F_L1)
        self.carrier_phase = 0.0    # NCO phase (cycles, mod 1) at pos
        self.carrier_cycles = 0.0   # accumulated Doppler phase at pos
        self.carrier_freq = self.if_center + self.doppler
        self.elapsed = 0.0
        self.mode = "pullin"
        self.p_prev = None
        self._last_i = None
        self.bit_edge = None
        self.hist = np.zeros(20, dtype=int)
        self.bits = []              # (code epoch of bit start, +-1 soft sum)
        self._bit_i = 0.0
        self._bit_q = 0.0
        self._bit_wb = 0.0
        self._bit_n = 0
        self._bit_start = None
        self.nwpr = []              # narrowband/wideband ratios per bit
        self.cn0 = float("nan")
        self.locked = True
        self.lost = False
        self._weak = 0
        self._win = []
        self.latches = []
        self.log = {k: [] for k in ("t", "code_epoch", "dll", "pll", "fll", "doppler", "code_rate", "i", "q",
                                    "cn0", "mode", "dt")}

    # -- scheduling ---------------------------------------------------------

    def codes_this_interval(self):
        n_t = int(round(self.params.integration_time * 1e3))
        if n_t == 1 or self.bit_edge is None:
            return 1
        # after bit sync, longer intervals start on bit-aligned multiples
        if (self.code_epoch - self.bit_edge) % n_t == 0:
            return n_t
        return 1

    def interval_end(self, n_codes=None):
        n_codes = self.codes_this_interval() if n_codes is None else n_codes
        return self.pos + n_codes * CA_LEN / self.code_rate * self.fs

    # -- one integration interval -------------------------------------------

    def step(self, x, x_offset, epochs=None):
        """Integrate one interval from buffer ``x`` (x[0] is absolute sample ``x_offset``).

        ``epochs`` is a list of pending receiver-epoch sample indices; entries
        inside this interval are latched and consumed.
        """
        n_codes = self.codes_this_interval()
        start = self.pos
        end = self.interval_end(n_codes)
        i0 = math.ceil(start)
        i1 = math.ceil(end)
        n = i1 - i0
        chip_step = self.code_rate / self.fs
        chip0 = (i0 - start) * chip_step
        f = self.carrier_freq
        ph0 = self.carrier_phase + f * (i0 - start) / self.fs
        e, p, l = kernels.correlate_epl(x, i0 - x_offset, n, self.code, chip0, chip_step, ph0, f / self.fs,
                                        self.params.spacing)
        dt = (end - start) / self.fs

        if epochs:
            while epochs and epochs[0][1] < end:
                m, s_idx = epochs.pop(0)
                if s_idx < start:
                    continue
                frac = (s_idx - start) / self.fs
                self.latches.append(Latch(m, s_idx, self.code_epoch, frac * self.code_rate,
                                          self.acc_v / (2 * math.pi),
                                          self.carrier_cycles + (f - self.if_center) * frac, self.cn0,
                                          self.locked and not self.lost))

        # advance NCOs over the interval just integrated
        self.pos = end
        self.code_epoch += n_codes
        self.carrier_phase = (self.carrier_phase + f * dt) % 1.0
        self.carrier_cycles += (f - self.if_center) * dt
        self.elapsed += dt

        new_bit = self.bit_edge is not None and (self.code_epoch - n_codes - self.bit_edge) % 20 == 0
        d_dll = dll_discriminator(e, l, self.params.spacing)
        d_pll = pll_discriminator(p)
        if self.p_prev is None:
            d_fll = float("nan")
        elif self.bit_edge is None:
            d_fll = fll_discriminator(self.p_prev, p, dt, four_quadrant=False)
        elif new_bit:
            d_fll = float("nan")      # a data transition may sit between the two
        else:
            d_fll = fll_discriminator(self.p_prev, p, dt, four_quadrant=True)
        self.p_prev = p
        self._loop_update(d_dll, d_pll, d_fll, dt)
        self._bit_sync(p, n_codes)
        self._lock_check(p, n)

        lg = self.log
        lg["t"].append(start)
        lg["code_epoch"].append(self.code_epoch - n_codes)
        lg["dll"].append(d_dll)
        lg["pll"].append(d_pll)
        lg["fll"].append(d_fll)
        lg["doppler"].append(self.acc_v / (2 * math.pi))
        lg["code_rate"].append(self.code_rate)
        lg["i"].append(p.real)
        lg["q"].append(p.imag)
        lg["cn0"].append(self.cn0)
        lg["mode"].append(self.mode)
        lg["dt"].append(dt)
        return e, p, l

    def _loop_update(self, d_dll, d_pll, d_fll, dt):
        pp = self.params
        if self.mode == "pullin" and self.elapsed >= pp.pullin_time:
            self.mode = "fll_pll"
        if self.mode == "pullin":
            bw_f, e_p = pp.fll_pullin_bandwidth, 0.0
        else:
            bw_f, e_p = pp.fll_bandwidth, d_pll
        e_f = 0.0 if (math.isnan(d_fll) or self.mode == "pll") else 2 * math.pi * d_fll
        w0p = pp.pll_bandwidth * W0_PER_BL_PLL3 if self.mode != "pullin" else 0.0
        w0f = bw_f * W0_PER_BL_FLL2
        self.acc_a += dt * (w0p ** 3 * e_p + w0f ** 2 * e_f)
        self.acc_v += dt * (self.acc_a + A3 * w0p ** 2 * e_p + A2 * w0f * e_f)
        w = self.acc_v + B3 * w0p * e_p
        self.carrier_freq = self.if_center + w / (2 * math.pi)
        doppler = self.acc_v / (2 * math.pi)
        self.code_rate = F_CA * (1.0 + doppler / F_L1) + 4.0 * pp.dll_bandwidth * d_dll
        if self.mode == "fll_pll" and pp.pure_pll and self.bit_edge is not None and len(self.nwpr) >= 10:
            f = np.asarray(self.log["fll"][-200:], dtype=float)
            f = f[~np.isnan(f)]
            # frequency error averaged over 20 ms well inside the FLL threshold
            if len(f) >= 100 and abs(np.mean(f)) < 2.0 and np.std(f) / math.sqrt(20) < 1.0 / (12 * dt) / 4:
                self.mode = "pll"

    def _bit_sync(self, p, n_codes):
        if self.mode == "pullin":
            return
        if self.bit_edge is None:
            if n_codes == 1 and self._last_i is not None and (p.real > 0) != (self._last_i > 0):
                self.hist[(self.code_epoch - 1) % 20] += 1
            self._last_i = p.real
            tot = self.hist.sum()
            k = int(np.argmax(self.hist))
            if tot >= 16 and self.hist[k] >= 0.6 * tot and self.hist[k] >= 10:
                self.bit_edge = k
            return
        ce = self.code_epoch - n_codes
        if (ce - self.bit_edge) % 20 == 0:
            self._close_bit()
            self._bit_start = ce
        if self._bit_start is None:
            return
        self._bit_i += p.real
        self._bit_q += p.imag
        self._bit_wb += abs(p) ** 2
        self._bit_n += n_codes

    def _close_bit(self):
        if self._bit_start is not None and self._bit_n == 20:
            self.bits.append((self._bit_start, self._bit_i))
            nb = self._bit_i ** 2 + self._bit_q ** 2
            if self._bit_wb > 0:
                self.nwpr.append(nb / self._bit_wb)
                self._update_cn0()
        self._bit_i = self._bit_q = self._bit_wb = 0.0
        self._bit_n = 0

    def _update_cn0(self, window=50):
        r = self.nwpr[-window:]
        if len(r) < 2:
            return
        m = int(round(self.params.integration_time * 1e3))
        self.cn0 = nwpr_cn0(np.mean(r), 20 // m, self.params.integration_time)

    def _lock_check(self, p, n):
        self._win.append(abs(p) ** 2 / (n * self.noise_power))
        if len(self._win) < 20:
            return
        snr = float(np.mean(self._win)) - 1.0
        self._win = []
        if snr < self.params.lock_snr:
            self._weak += 1
            self.locked = False
            if self._weak >= self.params.lock_windows:
                self.lost = True
        else:
            self._weak = 0
            self.locked = True

    def history(self, key):
        return np.asarray(self.log[key], dtype=float if key != "mode" else object)


def nwpr_cn0(mu, m, t):
    """Narrowband-wideband power ratio C/N0 (dB-Hz) from the mean ratio ``mu`` over ``m`` intervals of ``t`` s."""
    if mu >= m:
        return float("inf")
    if mu <= 1:
        return float("-inf")
    return 10.0 * math.log10((mu - 1.0) / (m - mu) / t)


def estimate_cn0(i, q, t, m=20, window=None):
    """C/N0 from prompt I/Q histories aligned so index 0 starts a data bit.

    Needs at least two bit windows (40 intervals at 1 ms).
    """
    i = np.asarray(i, float)
    q = np.asarray(q, float)
    if window is not None:
        i, q = i[-window:], q[-window:]
    k = len(i) // m
    if k < 2:
        raise ValueError(f"need >= {2 * m} intervals for a C/N0 estimate")
    i, q = i[: k * m].reshape(k, m), q[: k * m].reshape(k, m)
    nb = i.sum(axis=1) ** 2 + q.sum(axis=1) ** 2
    wb = (i ** 2 + q ** 2).sum(axis=1)
    return nwpr_cn0(float(np.mean(nb / wb)), m, t)


def track_step(ch: TrackingChannel, x, x_offset=0, epochs=None):
    """One integration interval; returns (channel, dll chips, pll degrees, fll Hz)."""
    ch.step(x, x_offset, epochs)
    lg = ch.log
    return ch, lg["dll"][-1], math.degrees(lg["pll"][-1]), lg["fll"][-1]


@dataclass(frozen=True)
class JitterThresholds:
    sigma_dll_th: float           # chips
    sigma_pll_th: float           # degrees
    sigma_fll_th: float           # Hz

    @classmethod
    def for_loop(cls, spacing=0.5, t=1e-3):
        # 3 sigma limits: d/2 chips for code, a quarter of the 180 deg Costas range
        # for phase, a quarter of the 1/T wide frequency range
        return cls(spacing / 6.0, 15.0, 1.0 / (12.0 * t))


@dataclass(frozen=True)
class JitterReport:
    sigma_dll: float
    sigma_pll: float
    sigma_fll: float
    thresholds: JitterThresholds
    pass_dll: bool
    pass_pll: bool
    pass_fll: bool

    @property
    def passed(self):
        return self.pass_dll and self.pass_pll and self.pass_fll

    def margins(self):
        """Fraction of each threshold left unused (smaller means closer to the boundary)."""
        th = self.thresholds
        return {"dll": 1 - self.sigma_dll / th.sigma_dll_th, "pll": 1 - self.sigma_pll / th.sigma_pll_th,
                "fll": 1 - self.sigma_fll / th.sigma_fll_th}


MIN_JITTER_SAMPLES = 100


def jitter_report(dll, pll_deg, fll, spacing=0.5, t=1e-3) -> JitterReport:
    """Sample standard deviations of discriminator histories against the thresholds.

    NaN entries (intervals without a valid output) are ignored.
    """
    sig = []
    for h in (dll, pll_deg, fll):
        h = np.asarray(h, float)
        h = h[~np.isnan(h)]
        if len(h) < MIN_JITTER_SAMPLES:
            raise ValueError(f"need >= {MIN_JITTER_SAMPLES} samples per history, got {len(h)}")
        sig.append(float(np.std(h)))
    th = JitterThresholds.for_loop(spacing, t)
    return JitterReport(sig[0], sig[1], sig[2], th, sig[0] < th.sigma_dll_th, sig[1] < th.sigma_pll_th,
                        sig[2] < th.sigma_fll_th)
