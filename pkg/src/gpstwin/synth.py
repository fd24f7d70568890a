"""Complex baseband synthesis from per-satellite truth.

Each satellite's dense truth track is turned into per-segment polynomials
(chip count, carrier phase, amplitude) once; samples are then evaluated from
the absolute sample index, so the stream does not depend on how it is cut
into blocks. Noise is drawn in fixed-size chunks keyed by chunk number for
the same reason.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .constants import BIT_RATE, CA_LEN, CODES_PER_BIT, F_CA, F_L1

CHIPS_PER_BIT = CA_LEN * CODES_PER_BIT
NOISE_CHUNK = 1 << 16
MAX_BLOCK_SECONDS = 0.1


@dataclass
class ChannelState:
    """Signal parameters of one channel at the end of the last synthesized block."""
    prn: int
    code_phase: float = 0.0        # chips, [0, 1023)
    carrier_phase: float = 0.0     # cycles, [0, 1)
    doppler: float = 0.0           # Hz
    doppler_rate: float = 0.0      # Hz/s
    amplitude: float = 0.0         # sqrt(W)
    tau: float = 0.0               # code delay D, s
    data_bit_index: int = 0
    next_sample: int = 0


@dataclass
class IqBlock:
    samples: np.ndarray
    fs: float
    epoch: float                   # receiver time of the first sample, s of week
    scale: float = 1.0             # full-scale amplitude (quantized streams)
    index: int = 0                 # absolute index of the first sample

    def __post_init__(self):
        if len(self.samples) == 0:
            raise ValueError("empty IQ block")

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self):
        return len(self.samples) / self.fs

    def next_epoch(self):
        return self.epoch + len(self.samples) / self.fs


@dataclass
class SegmentPlan:
    """Polynomial coefficients for consecutive truth segments of one signal path."""
    prn: int
    h: float
    chip_c: np.ndarray             # (nseg, 4)
    phase_c: np.ndarray            # (nseg, 4)
    amp_c: np.ndarray              # (nseg, 2)
    code: np.ndarray               # int8 chips
    bits: np.ndarray               # int8 data levels from t_ref
    t_ref: float
    t_offset: float = 0.0          # stream start minus t_ref, s
    replicas: list = field(default_factory=list)


def hermite_coefficients(y, dy, h):
    """Local cubic coefficients (c0..c3 in s) per interval of a Hermite interpolant."""
    y0, y1, d0, d1 = y[:-1], y[1:], dy[:-1], dy[1:]
    dlt = (y1 - y0) / h
    c2 = (3 * dlt - 2 * d0 - d1) / h
    c3 = (d0 + d1 - 2 * dlt) / (h * h)
    return np.stack([y0, d0, c2, c3], axis=1)


def build_plan(track, first, count, t_start, t_ref, code, nav_levels, if_center=0.0, phase0=0.0,
               extra_delay=None, amp_scale=1.0, phase_offset=0.0, h=None):
    """Segment polynomials for ``count`` segments starting at truth index ``first``.

    Truth index ``first`` must sit at receiver time ``t_start`` (the stream start).
    ``extra_delay`` = (delay, ramp) adds an excess path delay to both code and
    carrier (a reflected replica). ``h`` is the nominal truth step; differencing
    large time-of-week values loses the last digits, so callers should pass it.
    """
    h = track.step if h is None else h
    sl = slice(first, first + count + 1)
    d = track.code_delay[sl].copy()
    dd = track.code_rate[sl].copy()
    dp = track.carrier_delay[sl].copy()
    dpp = track.carrier_rate[sl].copy()
    t_rel = np.arange(count + 1) * h
    if extra_delay is not None:
        delay, ramp = extra_delay
        d += delay + ramp * t_rel
        dp += delay + ramp * t_rel
        dd += ramp
        dpp += ramp
    cd = hermite_coefficients(d, dd, h)
    cp = hermite_coefficients(dp, dpp, h)
    t0 = t_start - t_ref
    chip_c = np.empty((count, 4))
    chip_c[:, 0] = F_CA * ((t0 + t_rel[:-1]) - cd[:, 0])
    chip_c[:, 1] = F_CA * (1.0 - cd[:, 1])
    chip_c[:, 2] = -F_CA * cd[:, 2]
    chip_c[:, 3] = -F_CA * cd[:, 3]
    phase_c = np.empty((count, 4))
    base = if_center * t_rel[:-1] - F_L1 * cp[:, 0] + phase0 + phase_offset / (2 * np.pi)
    phase_c[:, 0] = base - np.floor(base)
    phase_c[:, 1] = if_center - F_L1 * cp[:, 1]
    phase_c[:, 2] = -F_L1 * cp[:, 2]
    phase_c[:, 3] = -F_L1 * cp[:, 3]
    a = amp_scale * np.sqrt(track.carrier_power[sl])
    amp_c = np.stack([a[:-1], (a[1:] - a[:-1]) / h], axis=1)
    return SegmentPlan(track.prn, h, chip_c, phase_c, amp_c, np.ascontiguousarray(code, np.int8),
                       np.ascontiguousarray(nav_levels, np.int8), t_ref, t0)


def synthesize_channel_block(plan: SegmentPlan, k0: int, n: int, fs: float, state: ChannelState | None = None,
                             out=None):
    """Samples k0..k0+n-1 of one satellite (direct path plus any replicas).

    Returns (samples, updated state). The state describes the signal at the
    first sample after the block.
    """
    if n / fs > MAX_BLOCK_SECONDS + 1e-12:
        raise ValueError(f"block longer than {MAX_BLOCK_SECONDS} s")
    if out is None:
        out = np.zeros(n, dtype=np.complex128)
    for p in [plan] + plan.replicas:
        kernels.synth_accumulate(out, int(k0), float(fs), p.h, 0, p.chip_c, p.phase_c, p.amp_c,
                                 p.code, p.bits, CHIPS_PER_BIT)
    new = channel_state_at(plan, k0 + n, fs)
    if state is not None and state.next_sample not in (0, k0):
        raise ValueError("channel state does not continue at this block")
    return out, new


def channel_state_at(plan: SegmentPlan, k: int, fs: float) -> ChannelState:
    t = k / fs
    j = min(int(np.floor(t / plan.h)), len(plan.chip_c) - 1)
    s = t - j * plan.h
    c, p, a = plan.chip_c[j], plan.phase_c[j], plan.amp_c[j]
    chips = c[0] + s * (c[1] + s * (c[2] + s * c[3]))
    ph = p[0] + s * (p[1] + s * (p[2] + s * p[3]))
    f = p[1] + s * (2 * p[2] + 3 * s * p[3])
    fdot = 2 * p[2] + 6 * s * p[3]
    return ChannelState(prn=plan.prn, code_phase=float(np.mod(chips, CA_LEN)), carrier_phase=float(np.mod(ph, 1.0)),
                        doppler=float(f), doppler_rate=float(fdot), amplitude=float(a[0] + a[1] * s),
                        tau=float(t + plan.t_offset - chips / F_CA),
                        data_bit_index=int(np.floor(chips / CHIPS_PER_BIT)), next_sample=int(k))


def noise_chunk(seed: int, chunk: int, sigma: float):
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(chunk),))
    g = np.random.Generator(np.random.PCG64(ss))
    z = g.standard_normal(2 * NOISE_CHUNK)
    return sigma * (z[0::2] + 1j * z[1::2])


class NoiseSource:
    """Circular complex Gaussian noise, variance n0*fs, addressed by absolute sample index."""

    def __init__(self, seed: int, n0: float, fs: float):
        self.seed, self.sigma = seed, np.sqrt(n0 * fs / 2.0)
        self._cache = (None, None)

    def _chunk(self, c):
        if self._cache[0] != c:
            self._cache = (c, noise_chunk(self.seed, c, self.sigma))
        return self._cache[1]

    def samples(self, k0, n):
        out = np.empty(n, dtype=np.complex128)
        pos = 0
        while pos < n:
            k = k0 + pos
            c, off = divmod(k, NOISE_CHUNK)
            take = min(NOISE_CHUNK - off, n - pos)
            out[pos:pos + take] = self._chunk(c)[off:off + take]
            pos += take
        return out


def mix_and_noise(contributions, n0, fs, rng=None, n=None, epoch=None, index=0):
    """Sum channel contributions and add complex noise of total variance n0*fs.

    ``rng`` may be a numpy Generator, a :class:`NoiseSource`, or None (no noise).
    """
    blocks = list(contributions)
    if blocks:
        ref = blocks[0]
        for b in blocks[1:]:
            if b.fs != ref.fs or len(b) != len(ref) or b.epoch != ref.epoch:
                raise ValueError("contributions differ in fs, epoch or length")
        if ref.fs != fs:
            raise ValueError("contribution fs does not match")
        n, epoch, index = len(ref), ref.epoch, ref.index
    if n is None:
        raise ValueError("block length needed when there are no contributions")
    total = np.zeros(n, dtype=np.complex128)
    for b in blocks:
        total += b.samples
    if n0 > 0 and rng is not None:
        if isinstance(rng, NoiseSource):
            total += rng.samples(index, n)
        else:
            s = np.sqrt(n0 * fs / 2.0)
            total += s * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return IqBlock(total, fs, 0.0 if epoch is None else epoch, 1.0, index)


@dataclass
class QuantizedBlock:
    data: np.ndarray               # interleaved I, Q signed integers
    clipped: int
    scale: float                   # integer units per signal unit
    bits: int


def quantize_iq(block, bits=8, full_scale_sigma=3.0, sigma=None) -> QuantizedBlock:
    """Scale, round and saturate to interleaved signed I,Q integers.

    ``sigma`` is the per-component standard deviation that maps to
    full_scale/full_scale_sigma; when omitted it is measured from the block.
    """
    if full_scale_sigma <= 0:
        raise ValueError("full_scale_sigma must be > 0")
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    x = block.samples if isinstance(block, IqBlock) else np.asarray(block)
    fs_int = 127 if bits == 8 else 32767
    if sigma is None:
        sigma = float(np.sqrt(np.mean(x.real ** 2 + x.imag ** 2) / 2.0))
    dtype = np.int8 if bits == 8 else np.dtype("<i2")
    if sigma == 0:
        return QuantizedBlock(np.zeros(2 * len(x), dtype=dtype), 0, 0.0, bits)
    scale = fs_int / (full_scale_sigma * sigma)
    inter = np.empty(2 * len(x))
    inter[0::2] = x.real
    inter[1::2] = x.imag
    q = np.rint(inter * scale)
    clipped = int(np.count_nonzero(np.abs(q) > fs_int))
    q = np.clip(q, -fs_int, fs_int).astype(dtype)
    return QuantizedBlock(q, clipped, scale, bits)


def dequantize(data, scale=1.0):
    d = np.asarray(data, dtype=np.float64)
    x = d[0::2] + 1j * d[1::2]
    return x / scale if scale else x


def read_iq_file(path, bits, offset_samples=0, count=None):
    """Read interleaved I/Q samples; returns complex128 in integer units."""
    dtype = np.int8 if bits == 8 else np.dtype("<i2")
    width = 2 * np.dtype(dtype).itemsize
    with open(path, "rb") as f:
        f.seek(offset_samples * width)
        raw = np.fromfile(f, dtype=dtype, count=-1 if count is None else 2 * count)
    raw = raw[: len(raw) // 2 * 2]
    return dequantize(raw)


def code_doppler_chips(doppler, dt):
    """Extra chips accumulated over ``dt`` by code Doppler coherent with carrier Doppler."""
    return F_CA * doppler / F_L1 * dt


def bit_duration():
    return 1.0 / BIT_RATE
