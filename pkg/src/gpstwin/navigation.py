"""Navigation message decoding, pseudorange formation and least-squares PVT."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .atmosphere import klobuchar_delay, saastamoinen_ztd, standard_meteo, tropo_mapping
from .codegen import ephemeris_from_subframes, find_subframes
from .constants import C, CA_PERIOD, CODES_PER_BIT, F_CA, LAMBDA_L1, OMEGA_E
from .orbits import (clock_correction, ecef_to_geodetic, elevation_azimuth, enu_matrix, rotate_earth,
                     sat_state_at)

PR_MIN, PR_MAX = 1.8e7, 3.0e7
TOW_TOLERANCE = 0.08          # s, max spread of transmit times across channels at one epoch
PVT_TOL = 1e-4                # m
PVT_MAX_ITER = 10
GDOP_MAX = 50.0


class PvtError(RuntimeError):
    pass


@dataclass
class ChannelNav:
    """What the decoder learned from one channel's bit stream."""
    prn: int
    subframes: list
    inverted: bool | None = None
    anchor_epoch: int | None = None    # code epoch at the leading edge of a decoded subframe
    anchor_time: float | None = None   # GPS (SV) time of that edge
    ephemeris: object = None

    @property
    def has_tow(self):
        return self.anchor_epoch is not None

    def transmit_time(self, code_epoch, chips):
        """SV time of the replica state (code epoch count, chips into it)."""
        return self.anchor_time + (code_epoch - self.anchor_epoch) * CA_PERIOD + chips / F_CA


def _bit_runs(bits):
    """Split (code_epoch, soft) bit records into runs of consecutive bits."""
    runs, cur = [], []
    for rec in bits:
        if cur and rec[0] - cur[-1][0] != CODES_PER_BIT:
            runs.append(cur)
            cur = []
        cur.append(rec)
    if cur:
        runs.append(cur)
    return runs


def decode_subframes(prn, bits, template=None, week_hint=None) -> ChannelNav:
    """Find parity-valid subframes in a channel's bit records and anchor its time.

    ``bits`` holds (code epoch of the bit start, soft prompt sum). A data level
    of +1 carries logic 0. Subframes failing parity are skipped. The anchor
    ties a code epoch to the transmit time taken from the HOW. ``week_hint``
    resolves the 10-bit broadcast week.
    """
    nav = ChannelNav(prn, [])
    anchors = []
    for run in _bit_runs(bits):
        if len(run) < 300:
            continue
        hard = np.array([1 if s < 0 else 0 for _, s in run], dtype=np.uint8)
        for sf in find_subframes(hard):
            nav.subframes.append(sf)
            anchors.append((run[sf.start][0], sf.t_start, sf.inverted))
    if anchors:
        # every anchor must describe the same epoch-to-time map
        offs = np.array([t - e * CA_PERIOD for e, t, _ in anchors])
        ref = np.median(offs)
        good = [a for a, o in zip(anchors, offs) if abs(o - ref) < 1e-6]
        if good:
            nav.anchor_epoch, nav.anchor_time, nav.inverted = good[0]
    nav.ephemeris = ephemeris_from_subframes(prn, nav.subframes, template, week_hint)
    return nav


@dataclass(frozen=True)
class ObservableRecord:
    t_rx: float
    prn: int
    pseudorange: float            # m
    doppler: float                # Hz
    carrier_phase: float          # cycles
    cn0: float                    # dB-Hz
    source: str = "receiver"
    locked: bool = True


def form_pseudoranges(output, navs, smoothing=0.0):
    """Receiver observables per epoch: {epoch m: [ObservableRecord]}.

    Pseudorange is c * (receive time - transmit time) with the transmit time
    rebuilt from the code-epoch count anchored by the decoded TOW.
    ``smoothing`` > 0 applies a carrier-smoothing filter with that window (s).
    """
    fs = output.fs
    by_epoch = {}
    for prn, ch in output.channels.items():
        nav = navs.get(prn)
        if nav is None or not nav.has_tow:
            continue
        ph_off = (ch.if_center * ch.pos0 / fs) % 1.0 + (0.5 if nav.inverted else 0.0)
        n_win = max(1, int(round(smoothing / output.epoch_interval))) if smoothing > 0 else 1
        prev = None
        for la in ch.latches:
            t_rx = output.t_start + la.sample / fs
            t_sv = nav.transmit_time(la.code_epoch, la.chips)
            rho = C * (t_rx - t_sv)
            phi = la.carrier_cycles + ph_off
            if n_win > 1:
                if prev is None or prev[0] != la.epoch - 1 or not la.locked:
                    k, rho_s = 1, rho
                else:
                    k = min(prev[1] + 1, n_win)
                    rho_s = rho / k + (prev[2] - LAMBDA_L1 * (phi - prev[3])) * (k - 1) / k
                prev = (la.epoch, k, rho_s, phi)
                rho = rho_s
            by_epoch.setdefault(la.epoch, []).append(
                ObservableRecord(t_rx, prn, rho, la.doppler, phi, la.cn0, "receiver", la.locked))
    for m, recs in by_epoch.items():
        t_sv = [r.t_rx - r.pseudorange / C for r in recs]
        if len(t_sv) > 1 and max(t_sv) - min(t_sv) > TOW_TOLERANCE:
            raise PvtError(f"epoch {m}: transmit times spread more than {TOW_TOLERANCE} s")
    return dict(sorted(by_epoch.items()))


def truth_observables(scen, t_rx):
    """Truth ObservableRecords at receiver times ``t_rx`` for every scenario PRN."""
    t_rx = np.atleast_1d(np.asarray(t_rx, float))
    out = []
    for prn in scen.prns:
        tr = scen.tracks[prn]
        rho = C * tr.interp("code_delay", t_rx)
        dop = tr.interp("doppler", t_rx)
        phi = scen.phase0[prn] - 1575.42e6 * tr.interp("carrier_delay", t_rx)
        cn0 = tr.interp("cn0", t_rx)
        for k, t in enumerate(t_rx):
            out.append(ObservableRecord(float(t), prn, float(rho[k]), float(dop[k]), float(phi[k]),
                                        float(cn0[k]), "truth"))
    return out


@dataclass
class PvtSolution:
    t_rx: float
    r_u: np.ndarray
    v_u: np.ndarray
    clock_bias: float             # s
    clock_drift: float            # s/s
    used_prns: list
    residual_rms: float           # m
    gdop: float
    hdop: float
    vdop: float
    iterations: int = 0
    geometry: np.ndarray = field(default=None, repr=False)   # unit LOS rows, user to satellite


@dataclass
class PvtOptions:
    ionosphere: bool = True
    troposphere: bool = True
    elevation_mask_deg: float = 5.0
    alpha: tuple = (0.0, 0.0, 0.0, 0.0)
    beta: tuple = (0.0, 0.0, 0.0, 0.0)
    max_iter: int = PVT_MAX_ITER


def _sat_terms(eph, t_rx, rho):
    """Transmit-epoch satellite state and clock from the measured pseudorange."""
    t_sv = t_rx - rho / C
    dt = clock_correction(eph, t_sv)
    t_tx = t_sv - float(dt)
    dt = float(clock_correction(eph, t_tx))
    st = sat_state_at(eph, t_tx)
    return st, dt, float(st.clock_drift)


def solve_pvt(obs, ephs, t_rx, options: PvtOptions | None = None, x0=None) -> PvtSolution:
    """Gauss-Newton position/clock fit, then Doppler least squares for velocity/drift.

    ``obs`` is a list of ObservableRecord for one epoch; ``ephs`` maps PRN to
    ephemeris. ``x0`` (ECEF, m) seeds the iteration; the Earth centre otherwise.
    """
    opt = options or PvtOptions()
    obs = [o for o in obs if o.prn in ephs]
    if len(obs) < 4:
        raise PvtError(f"need >= 4 satellites, have {len(obs)}")
    sats = []
    for o in obs:
        st, dt, ddt = _sat_terms(ephs[o.prn], t_rx, o.pseudorange)
        sats.append((o, np.asarray(st.r_s, float), np.asarray(st.v_s, float), dt, ddt))
    x = np.zeros(4) if x0 is None else np.r_[np.asarray(x0, float), 0.0]
    if x0 is not None:
        # clock seed from the mean residual so the first step is small
        x[3] = np.mean([o.pseudorange + C * dt - np.linalg.norm(rs - x[:3]) for o, rs, _, dt, _ in sats])
    mask = math.radians(opt.elevation_mask_deg)
    used = sats
    for it in range(1, opt.max_iter + 1):
        near_surface = 6.0e6 < np.linalg.norm(x[:3]) < 8.0e6
        if near_surface:
            lat, lon, h = ecef_to_geodetic(x[:3])
        rows, res, keep = [], [], []
        for s in sats:
            o, rs, _, dt, _ = s
            flight = (o.pseudorange + C * dt) / C - x[3] / C
            r_s = rotate_earth(rs, OMEGA_E * flight)
            d = r_s - x[:3]
            rng = np.linalg.norm(d)
            corr = 0.0
            if near_surface:
                el, az = elevation_azimuth(x[:3], r_s)
                if el < mask:
                    continue
                if opt.ionosphere:
                    corr += float(klobuchar_delay(opt.alpha, opt.beta, lat, lon, el, az, t_rx - x[3] / C))
                if opt.troposphere:
                    p, t, rh = standard_meteo(h)
                    corr += float(saastamoinen_ztd(p, t, rh, lat, h / 1000.0) * tropo_mapping(el))
            u = d / rng
            rows.append(np.r_[-u, 1.0])
            res.append(o.pseudorange + C * dt - corr - rng - x[3])
            keep.append(s)
        if len(rows) < 4:
            raise PvtError(f"only {len(rows)} satellites above the mask")
        h_mat, res = np.array(rows), np.array(res)
        dx, *_ = np.linalg.lstsq(h_mat, res, rcond=None)
        x += dx
        used = keep
        if np.linalg.norm(dx[:3]) < PVT_TOL:
            break
    else:
        raise PvtError(f"no convergence in {opt.max_iter} iterations")
    q = np.linalg.inv(h_mat.T @ h_mat)
    gdop = float(math.sqrt(np.trace(q)))
    if not np.isfinite(gdop) or gdop > GDOP_MAX:
        raise PvtError(f"singular geometry (GDOP {gdop:.1f})")
    lat, lon, _ = ecef_to_geodetic(x[:3])
    e = enu_matrix(float(lat), float(lon))
    q_enu = e @ q[:3, :3] @ e.T
    # velocity and drift from Doppler with the same geometry
    rr = []
    for (o, rs, vs, dt, ddt), row in zip(used, h_mat):
        flight = (o.pseudorange + C * dt) / C - x[3] / C
        v_s = rotate_earth(vs, OMEGA_E * flight)
        u = -row[:3]
        rr.append(-LAMBDA_L1 * o.doppler - u @ v_s + C * ddt)
    v, *_ = np.linalg.lstsq(h_mat, np.array(rr), rcond=None)
    res_final = res - h_mat @ dx
    return PvtSolution(t_rx, x[:3].copy(), v[:3], x[3] / C, v[3] / C, [o.prn for o, *_ in used],
                       float(np.sqrt(np.mean(res_final ** 2))), gdop,
                       float(math.sqrt(q_enu[0, 0] + q_enu[1, 1])), float(math.sqrt(q_enu[2, 2])), it,
                       -h_mat[:, :3])


def solve_epochs(epochs, ephs, options=None, min_sats=4):
    """PVT for every epoch with enough locked observables; failures are skipped."""
    sols, x0 = [], None
    for m, recs in epochs.items():
        recs = [r for r in recs if r.locked and PR_MIN < r.pseudorange < PR_MAX]
        if len(recs) < min_sats:
            continue
        try:
            sol = solve_pvt(recs, ephs, recs[0].t_rx, options, x0)
        except PvtError:
            x0 = None
            continue
        sols.append(sol)
        x0 = sol.r_u
    return sols


@dataclass
class PositionErrors:
    t_rx: np.ndarray
    enu: np.ndarray               # (n, 3) m
    horizontal: np.ndarray
    error_3d: np.ndarray

    def summary(self):
        out = {}
        for name, v in (("east", self.enu[:, 0]), ("north", self.enu[:, 1]), ("up", self.enu[:, 2]),
                        ("horizontal", self.horizontal), ("3d", self.error_3d)):
            out[name] = {"rms": float(np.sqrt(np.mean(v ** 2))), "max": float(np.max(np.abs(v)))}
        return out


def position_errors(solutions, trajectory, clock=None) -> PositionErrors:
    """ENU errors of each solution against the truth trajectory.

    The truth is sampled at true time t_rx - b, with b from ``clock`` (the
    scenario clock model) when given, else from the solution's own bias.
    """
    if not solutions:
        raise ValueError("no solutions")
    t = np.array([s.t_rx for s in solutions])
    b = clock.offset(t) if clock is not None else np.array([s.clock_bias for s in solutions])
    r_true, _ = trajectory.state_at(t - b)
    r_true = np.atleast_2d(r_true)
    est = np.array([s.r_u for s in solutions])
    enu = np.empty_like(est)
    for k in range(len(est)):
        lat, lon, _ = ecef_to_geodetic(r_true[k])
        enu[k] = enu_matrix(float(lat), float(lon)) @ (est[k] - r_true[k])
    horiz = np.hypot(enu[:, 0], enu[:, 1])
    return PositionErrors(t, enu, horiz, np.linalg.norm(enu, axis=1))
