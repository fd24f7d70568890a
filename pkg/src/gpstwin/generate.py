"""Scenario assembly and the streaming IF generator.

``build_scenario`` turns a configuration into everything the synthesizer and
the validators need: decoded-equivalent ephemerides, the user trajectory,
dense per-satellite truth, navigation bit streams and resolved impairments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .channel import AntennaPattern, ChannelModel, ClockModel, TruthTrack
from .codegen import NavMessage, build_nav_message, ca_code, quantize_ephemeris
from .constants import SUBFRAME_SECONDS
from .impairments import gen_interference, resolve_amplitude
from .orbits import elevation_azimuth, sat_state_at
from .scenario.config import ScenarioConfig
from .scenario.ephemeris import load_ephemerides
from .scenario.trajectory import (HighDynamicsProfile, ModerateProfile, StaticProfile, Trajectory,
                                  build_trajectory)
from .synth import (IqBlock, NoiseSource, SegmentPlan, build_plan, quantize_iq, synthesize_channel_block)

TRUTH_MARGIN = 4              # extra truth points beyond each end of the stream
TRAJECTORY_PAD = 1.0          # s of trajectory beyond each end


@dataclass
class Scenario:
    config: ScenarioConfig
    ephemerides: dict            # PRN -> BroadcastEphemeris as broadcast (LNAV-quantized)
    alpha: tuple
    beta: tuple
    trajectory: Trajectory
    model: ChannelModel
    prns: list
    tracks: dict                 # PRN -> TruthTrack
    messages: dict               # PRN -> NavMessage
    t_ref: float
    truth_first: int             # truth index of the stream's first sample
    reference_prn: int
    interference: list = field(default_factory=list)
    phase0: dict = field(default_factory=dict)

    @property
    def t_start(self):
        return self.config.start_tow

    @property
    def fs(self):
        return self.config.sample_rate

    @property
    def n_samples(self):
        return int(round(self.config.duration * self.config.sample_rate))

    def signal_power(self):
        """Mean total carrier power (W) over the scenario, interference included."""
        p = sum(float(np.mean(self.tracks[k].carrier_power)) for k in self.prns)
        return p + sum(s.amplitude ** 2 for s in self.interference)

    def component_sigma(self):
        """Per-component standard deviation of the composite stream."""
        n0 = self.config.noise_density if self.config.noise else 0.0
        return math.sqrt((n0 * self.fs + self.signal_power()) / 2.0)


def _trajectory(cfg: ScenarioConfig) -> Trajectory:
    tc = cfg.trajectory
    pad = TRAJECTORY_PAD + abs(cfg.clock.bias) + abs(cfg.clock.drift) * cfg.duration
    t0 = cfg.start_tow - pad
    span = cfg.duration + 2 * pad
    if tc.kind == "static":
        prof = StaticProfile(tc.lat_deg, tc.lon_deg, tc.height, t0, span, tc.rate)
    elif tc.kind == "moderate":
        wp = [(cfg.start_tow + w[0], w[1], w[2], w[3]) for w in tc.waypoints]
        prof = ModerateProfile(tc.lat_deg, tc.lon_deg, tc.height, wp, tc.corner_time, tc.max_speed,
                               tc.rate, pad)
    else:
        launch = t0 + min(tc.launch_offset, 0.0)
        prof = HighDynamicsProfile(tc.lat_deg, tc.lon_deg, tc.height, launch, span + (t0 - launch), tc.speed,
                                   tc.elevation_deg, tc.azimuth_deg, tc.drag_k, tc.scale_height, tc.rate,
                                   tc.min_peak_accel)
    return build_trajectory(prof)


def channel_model(cfg: ScenarioConfig) -> ChannelModel:
    lk, at = cfg.link, cfg.atmosphere
    pattern = AntennaPattern.default_patch()
    if lk.rx_pattern:
        from pathlib import Path
        p = Path(lk.rx_pattern)
        pattern = AntennaPattern.from_file(p if p.is_absolute() else Path(cfg.base_dir) / p)
    n0 = cfg.noise_density if cfg.noise_density > 0 else 10 ** (-20.4)
    return ChannelModel(
        clock=ClockModel(cfg.clock.bias, cfg.clock.drift, cfg.start_tow),
        ionosphere=at.ionosphere, troposphere=at.troposphere, carrier_advance=at.carrier_advance,
        sagnac=lk.sagnac, meteo=at.meteo, magnus_denominator=at.magnus_denominator,
        tx_power_w=lk.tx_power_w, tx_gain_dbi=lk.tx_gain_dbi, rx_pattern=pattern, l_atm=lk.l_atm,
        n0=n0, cn0_override=lk.cn0_dbhz)


def visible_prns(ephs, trajectory, t_start, duration, mask_deg, allowlist=None, max_count=12):
    """PRNs above the mask at start, middle and end of the window, highest first."""
    mask = np.deg2rad(mask_deg)
    keep = []
    ts = np.array([t_start, t_start + duration / 2, t_start + duration])
    r_u, _ = trajectory.state_at(ts)
    for prn, eph in sorted(ephs.items()):
        if allowlist is not None and prn not in allowlist:
            continue
        if eph.health != 0:
            continue
        st = sat_state_at(eph, ts)
        el, _ = elevation_azimuth(r_u, st.r_s)
        if np.all(el > mask):
            keep.append((float(np.min(el)), prn))
    keep.sort(reverse=True)
    return [p for _, p in keep[:max_count]]


def build_scenario(cfg: ScenarioConfig, prns=None) -> Scenario:
    nav = load_ephemerides(cfg.ephemeris_path(), cfg.start_week, cfg.start_tow)
    alpha, beta = tuple(nav.alpha), tuple(nav.beta)
    ephs = {p: quantize_ephemeris(e, alpha, beta) for p, e in nav.ephemerides.items()}
    alpha, beta = next(iter(ephs.values())).klobuchar_alpha, next(iter(ephs.values())).klobuchar_beta
    traj = _trajectory(cfg)
    if prns is None:
        prns = visible_prns(ephs, traj, cfg.start_tow, cfg.duration, cfg.elevation_mask_deg,
                            cfg.prn_allowlist, cfg.receiver.max_channels)
    else:
        prns = [p for p in prns if p in ephs]
    model = channel_model(cfg)
    h = 1.0 / cfg.truth_rate
    n_seg = int(math.ceil(cfg.duration / h))
    idx = np.arange(-TRUTH_MARGIN, n_seg + TRUTH_MARGIN + 1)
    t_rx = cfg.start_tow + idx * h
    tracks = {p: model.truth_track(ephs[p], traj, t_rx) for p in prns}
    if tracks:
        t_sv_min = min(float(np.min(t_rx - tr.code_delay)) for tr in tracks.values())
    else:
        t_sv_min = cfg.start_tow - 0.1
    t_ref = SUBFRAME_SECONDS * math.floor((t_sv_min - 0.02) / SUBFRAME_SECONDS)
    span = cfg.start_tow + cfg.duration + 1.0 - t_ref
    messages = {p: build_nav_message(ephs[p], t_ref, span, alpha, beta) for p in prns}
    if cfg.reference_prn is not None and cfg.reference_prn in prns:
        ref = cfg.reference_prn
    else:
        ref = prns[0] if prns else 0
    rng = np.random.default_rng(np.random.SeedSequence(entropy=int(cfg.seed), spawn_key=(2 ** 31,)))
    phase0 = {p: float(rng.uniform()) for p in prns}
    scen = Scenario(cfg, ephs, alpha, beta, traj, model, prns, tracks, messages, t_ref, TRUTH_MARGIN, ref,
                    phase0=phase0)
    ref_power = float(np.mean(tracks[ref].carrier_power)) if prns else 0.0
    scen.interference = [resolve_amplitude(s, ref_power) for s in cfg.interference]
    return scen


class SignalGenerator:
    """Composite IF stream (signal + interference + noise) in blocks."""

    def __init__(self, scen: Scenario, noise=None):
        self.scen = scen
        cfg = scen.config
        self.fs = cfg.sample_rate
        use_noise = cfg.noise if noise is None else noise
        self.noise = NoiseSource(cfg.seed, cfg.noise_density, self.fs) if use_noise and cfg.noise_density > 0 else None
        self.plans = {p: self._plan(p) for p in scen.prns}

    def _plan(self, prn) -> SegmentPlan:
        s = self.scen
        tr: TruthTrack = s.tracks[prn]
        count = len(tr.t_rx) - s.truth_first - TRUTH_MARGIN - 1
        code = ca_code(prn).chips
        levels = s.messages[prn].levels()
        args = (tr, s.truth_first, count, s.t_start, s.t_ref, code, levels, s.config.if_center, s.phase0[prn])
        h = 1.0 / s.config.truth_rate
        plan = build_plan(*args, h=h)
        for mp in s.config.multipath:
            if mp.prn != prn:
                continue
            for path in mp.paths:
                plan.replicas.append(build_plan(*args, extra_delay=(path.delay, path.ramp), amp_scale=path.alpha,
                                                phase_offset=path.phase, h=h))
        return plan

    def channel(self, prn, k0, n):
        out, _ = synthesize_channel_block(self.plans[prn], k0, n, self.fs)
        return out

    def block(self, k0, n, signals=True, interference=True, noise=True) -> IqBlock:
        out = np.zeros(n, dtype=np.complex128)
        if signals:
            for prn in self.scen.prns:
                synthesize_channel_block(self.plans[prn], k0, n, self.fs, out=out)
        if interference:
            for spec in self.scen.interference:
                out += gen_interference(spec, k0 / self.fs, n, self.fs)
        if noise and self.noise is not None:
            out += self.noise.samples(k0, n)
        return IqBlock(out, self.fs, self.scen.t_start + k0 / self.fs, 1.0, k0)

    def blocks(self, block_samples=None, start=0, stop=None):
        if block_samples is None:
            block_samples = int(round(0.05 * self.fs))
        stop = self.scen.n_samples if stop is None else stop
        k = start
        while k < stop:
            n = min(block_samples, stop - k)
            yield self.block(k, n)
            k += n

    def quantized_blocks(self, block_samples=None, sigma=None):
        """(IqBlock, QuantizedBlock) pairs with a fixed quantizer scale for the whole stream."""
        cfg = self.scen.config
        sigma = self.scen.component_sigma() if sigma is None else sigma
        if self.noise is None:
            sigma = math.sqrt(self.scen.signal_power() / 2.0)
        for b in self.blocks(block_samples):
            yield b, quantize_iq(b, cfg.quantization, cfg.full_scale_sigma, sigma)
