"""Streaming multi-channel receiver: acquisition, hand-off and tracking over a sample stream."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..constants import CA_LEN, CA_PERIOD, F_CA, F_L1
from .acquisition import acquire, refine_doppler
from .tracking import LoopParams, TrackingChannel

ACQ_MS = 20                    # samples buffered before acquisition, ms


@dataclass
class ReceiverOutput:
    fs: float
    t_start: float                 # receiver time of sample 0, s of week
    epoch_interval: float
    channels: dict                 # PRN -> TrackingChannel
    acquisitions: list             # AcquisitionResult for every searched PRN
    n_samples: int = 0

    def epoch_time(self, m):
        return self.t_start + epoch_sample(m, self.epoch_interval, self.fs) / self.fs


def epoch_sample(m, interval, fs):
    return int(round(m * interval * fs))


class Receiver:
    def __init__(self, fs, t_start, rc, if_center=0.0, prns=None, params: LoopParams | None = None):
        if fs < 2 * F_CA:
            raise ValueError("sample rate must be at least 2.046 Msps")
        self.fs, self.t_start, self.rc = float(fs), float(t_start), rc
        self.if_center = if_center
        self.prns = list(range(1, 33)) if prns is None else list(prns)
        self.params = LoopParams.from_config(rc) if params is None else params
        self.channels = {}
        self.acquisitions = []
        self._buf = np.zeros(0, dtype=np.complex128)
        self._buf_start = 0
        self._epochs = {}
        self._next_m = {}
        self.n_samples = 0

    def _acquire(self):
        rc = self.rc
        x = self._buf
        n_need = int(round(ACQ_MS * 1e-3 * self.fs))
        x = x[:n_need]
        noise_power = float(np.mean(np.abs(x) ** 2))
        found = []
        for prn in self.prns:
            r = acquire(x, self.fs, prn, rc.doppler_span, rc.doppler_bin, self.if_center, rc.acq_noncoherent,
                        rc.acq_threshold)
            self.acquisitions.append(r)
            if r.detected:
                found.append(r)
        found.sort(key=lambda r: -r.peak_metric)
        for r in found[: rc.max_channels]:
            fd = refine_doppler(x, self.fs, r.prn, r.code_phase, r.doppler, self.if_center,
                                total_ms=min(ACQ_MS, 20))
            rate = F_CA * (1.0 + fd / F_L1)
            pos0 = (CA_LEN - r.code_phase) / rate * self.fs
            self.channels[r.prn] = TrackingChannel(r.prn, self.fs, pos0, fd, self.params, self.if_center,
                                                   noise_power)
            self._epochs[r.prn] = []
            self._next_m[r.prn] = 1

    def feed(self, samples):
        x = np.asarray(samples.samples if hasattr(samples, "samples") else samples, dtype=np.complex128)
        self._buf = np.concatenate([self._buf, x]) if len(self._buf) else x.copy()
        self.n_samples += len(x)
        if not self.channels and not self.acquisitions:
            if self.n_samples < int(round(ACQ_MS * 1e-3 * self.fs)):
                return
            self._acquire()
        self._run()

    def _run(self):
        buf_end = self._buf_start + len(self._buf)
        for prn, ch in self.channels.items():
            ep = self._epochs[prn]
            while True:
                m = self._next_m[prn]
                s = epoch_sample(m, self.rc.epoch_interval, self.fs)
                if s >= buf_end + self.fs * CA_PERIOD * 20:
                    break
                ep.append((m, s))
                self._next_m[prn] = m + 1
            while not ch.lost and math.ceil(ch.interval_end()) <= buf_end:
                ch.step(self._buf, self._buf_start, ep)
        live = [math.floor(c.pos) for c in self.channels.values() if not c.lost]
        drop = (min(live) - 1 - self._buf_start) if live else len(self._buf)
        if self.channels or self.acquisitions:
            drop = max(0, min(drop, len(self._buf)))
            self._buf = self._buf[drop:]
            self._buf_start += drop

    def process(self, blocks) -> ReceiverOutput:
        for b in blocks:
            self.feed(b)
        return self.output()

    def output(self) -> ReceiverOutput:
        return ReceiverOutput(self.fs, self.t_start, self.rc.epoch_interval, self.channels, self.acquisitions,
                              self.n_samples)
