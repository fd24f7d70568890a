"""Scenario configuration: TOML file -> validated, immutable dataclasses.

Every accepted key is a field of one of the config dataclasses; anything
else is rejected. Validation collects all problems and reports them with
their key paths.
"""
from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..atmosphere import MAGNUS_PRINTED, MAGNUS_STANDARD
from ..impairments import ImpairmentError, InterferenceSpec, MultipathSpec, ReflectedPath

BUILTIN_EPHEMERIS = "builtin"
MIN_SAMPLE_RATE = 2.5e6
DEFAULT_N0 = 10 ** (-204 / 10)


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))


@dataclass(frozen=True)
class ClockConfig:
    bias: float = 0.0          # s
    drift: float = 0.0         # s/s


@dataclass(frozen=True)
class AtmosphereConfig:
    ionosphere: bool = True
    troposphere: bool = True
    carrier_advance: bool = True
    pressure_hpa: float | None = None
    temperature_c: float | None = None
    relative_humidity: float | None = None
    magnus_denominator: float = MAGNUS_PRINTED

    @property
    def meteo(self):
        if self.pressure_hpa is None:
            return None
        return (self.pressure_hpa, self.temperature_c, self.relative_humidity)


@dataclass(frozen=True)
class LinkConfig:
    tx_power_w: float = 26.8
    tx_gain_dbi: float = 13.0
    rx_pattern: str | None = None
    l_atm: float = 1.0
    cn0_dbhz: float | None = None
    sagnac: bool = True


@dataclass(frozen=True)
class TrajectoryConfig:
    kind: str = "static"
    lat_deg: float = 26.5
    lon_deg: float = 80.2
    height: float = 100.0
    rate: float = 100.0
    waypoints: tuple = ()
    corner_time: float = 2.0
    max_speed: float = 30.0
    speed: float = 0.0
    elevation_deg: float = 45.0
    azimuth_deg: float = 0.0
    drag_k: float = 0.0
    scale_height: float = 8500.0
    min_peak_accel: float = 0.0
    launch_offset: float = 0.0    # launch time relative to scenario start (<= 0), s


@dataclass(frozen=True)
class ReceiverConfig:
    dll_spacing: float = 0.5
    integration_time: float = 1e-3
    dll_bandwidth: float = 2.0
    pll_bandwidth: float = 18.0
    fll_pullin_bandwidth: float = 10.0
    fll_bandwidth: float = 2.0
    pullin_time: float = 0.2
    acq_threshold: float = 2.0
    doppler_span: float = 10e3
    doppler_bin: float = 500.0
    acq_noncoherent: int = 10
    epoch_interval: float = 0.1
    elevation_mask_deg: float = 5.0
    correct_ionosphere: bool = True
    correct_troposphere: bool = True
    carrier_smoothing: float = 0.0   # Hatch window in s, 0 disables
    max_channels: int = 12


@dataclass(frozen=True)
class ScenarioConfig:
    start_week: int
    start_tow: float
    duration: float
    sample_rate: float = 2.5e6
    if_center: float = 0.0
    quantization: int = 8
    seed: int = 0
    prn_allowlist: tuple | None = None
    ephemeris: str = BUILTIN_EPHEMERIS
    noise_density: float = DEFAULT_N0
    noise: bool = True
    full_scale_sigma: float = 3.0
    elevation_mask_deg: float = 10.0
    truth_rate: float = 100.0
    reference_prn: int | None = None
    clock: ClockConfig = field(default_factory=ClockConfig)
    atmosphere: AtmosphereConfig = field(default_factory=AtmosphereConfig)
    link: LinkConfig = field(default_factory=LinkConfig)
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    receiver: ReceiverConfig = field(default_factory=ReceiverConfig)
    interference: tuple = ()
    multipath: tuple = ()
    base_dir: str = "."

    @property
    def start_epoch(self):
        return self.start_week, self.start_tow

    def ephemeris_path(self):
        if self.ephemeris == BUILTIN_EPHEMERIS:
            from .constellation import builtin_nav_path
            return builtin_nav_path()
        p = Path(self.ephemeris)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def to_dict(self):
        d = asdict(self)
        d.pop("base_dir")
        return d

    def digest(self):
        """SHA-256 over the normalized configuration and the ephemeris file bytes."""
        h = hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True, default=list).encode())
        try:
            h.update(Path(self.ephemeris_path()).read_bytes())
        except OSError:
            pass
        return h.hexdigest()

    def replace(self, **kw):
        from dataclasses import replace
        return replace(self, **kw)


_SECTIONS = {
    "scenario": ScenarioConfig, "clock": ClockConfig, "atmosphere": AtmosphereConfig,
    "link": LinkConfig, "trajectory": TrajectoryConfig, "receiver": ReceiverConfig,
}
_INTERFERENCE_KEYS = set(InterferenceSpec.__dataclass_fields__)
_PATH_KEYS = set(ReflectedPath.__dataclass_fields__)
_NESTED = {"clock", "atmosphere", "link", "trajectory", "receiver", "interference", "multipath", "base_dir"}


def _fields(cls):
    return {k: f for k, f in cls.__dataclass_fields__.items() if k not in _NESTED}


def _check_types(section, cls, values, problems):
    out = {}
    for key, val in values.items():
        path = f"{section}.{key}"
        fdef = _fields(cls).get(key)
        if fdef is None:
            problems.append(f"{path}: unknown key")
            continue
        t = str(fdef.type)
        if "bool" in t and not isinstance(val, bool):
            problems.append(f"{path}: expected true/false")
            continue
        if ("float" in t or "int" in t) and "bool" not in t and "tuple" not in t:
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                problems.append(f"{path}: expected a number")
                continue
            if t.startswith("int") and not isinstance(val, int):
                problems.append(f"{path}: expected an integer")
                continue
        if "str" in t and not isinstance(val, str):
            problems.append(f"{path}: expected a string")
            continue
        if isinstance(val, list):
            val = tuple(tuple(v) if isinstance(v, list) else v for v in val)
        out[key] = val
    return out


def _validate(cfg: ScenarioConfig, problems):
    def bad(path, msg):
        problems.append(f"{path}: {msg}")

    if cfg.duration <= 0:
        bad("scenario.duration", "must be > 0")
    if cfg.sample_rate < MIN_SAMPLE_RATE:
        bad("scenario.sample_rate", f"must be >= {MIN_SAMPLE_RATE:g} to hold the +-1.023 MHz main lobe")
    elif abs(cfg.if_center) + 1.023e6 > cfg.sample_rate / 2:
        bad("scenario.if_center", "main lobe would alias at this sample rate")
    if cfg.quantization not in (8, 16):
        bad("scenario.quantization", "must be 8 or 16")
    if not 0 <= cfg.seed < 2 ** 64:
        bad("scenario.seed", "must be a 64-bit unsigned integer")
    if not 0 <= cfg.start_tow < 604800:
        bad("scenario.start_tow", "must lie within the GPS week")
    if cfg.start_week < 0:
        bad("scenario.start_week", "must be >= 0")
    if cfg.noise_density < 0:
        bad("scenario.noise_density", "must be >= 0")
    if cfg.full_scale_sigma <= 0:
        bad("scenario.full_scale_sigma", "must be > 0")
    if cfg.truth_rate < 100:
        bad("scenario.truth_rate", "must be >= 100 Hz")
    if cfg.prn_allowlist is not None:
        if not cfg.prn_allowlist or any(not isinstance(p, int) or not 1 <= p <= 32 for p in cfg.prn_allowlist):
            bad("scenario.prn_allowlist", "must be a non-empty list of PRNs in 1..32")
    a = cfg.atmosphere
    met = (a.pressure_hpa, a.temperature_c, a.relative_humidity)
    if any(v is not None for v in met) and any(v is None for v in met):
        bad("atmosphere", "pressure_hpa, temperature_c and relative_humidity go together")
    elif a.pressure_hpa is not None:
        if not 300 < a.pressure_hpa < 1100:
            bad("atmosphere.pressure_hpa", "must lie in (300, 1100)")
        if not -60 < a.temperature_c < 60:
            bad("atmosphere.temperature_c", "must lie in (-60, 60)")
        if not 0 <= a.relative_humidity <= 1:
            bad("atmosphere.relative_humidity", "must be a fraction in [0, 1]")
    if a.magnus_denominator not in (MAGNUS_PRINTED, MAGNUS_STANDARD):
        bad("atmosphere.magnus_denominator", f"must be {MAGNUS_PRINTED} or {MAGNUS_STANDARD}")
    lk = cfg.link
    if lk.tx_power_w <= 0:
        bad("link.tx_power_w", "must be > 0")
    if not 0 < lk.l_atm <= 1:
        bad("link.l_atm", "must lie in (0, 1]")
    if lk.cn0_dbhz is not None and not 10 <= lk.cn0_dbhz <= 70:
        bad("link.cn0_dbhz", "must lie in [10, 70] dB-Hz")
    if lk.cn0_dbhz is not None and cfg.noise_density <= 0:
        bad("scenario.noise_density", "must be > 0 when link.cn0_dbhz fixes the carrier power")
    tr = cfg.trajectory
    if tr.kind not in ("static", "moderate", "high_dynamics"):
        bad("trajectory.kind", "must be static, moderate or high_dynamics")
    if tr.rate < 100:
        bad("trajectory.rate", "must be >= 100 Hz")
    if not -90 <= tr.lat_deg <= 90:
        bad("trajectory.lat_deg", "must lie in [-90, 90]")
    if tr.kind == "moderate" and len(tr.waypoints) < 2:
        bad("trajectory.waypoints", "moderate profile needs >= 2 waypoints [t, e, n, u]")
    if tr.kind == "high_dynamics" and tr.speed <= 0:
        bad("trajectory.speed", "must be > 0 for high_dynamics")
    if tr.launch_offset > 0:
        bad("trajectory.launch_offset", "must be <= 0 (the stream starts at or after launch)")
    rc = cfg.receiver
    if not 0 < rc.dll_spacing <= 1:
        bad("receiver.dll_spacing", "must lie in (0, 1]")
    if round(rc.integration_time * 1000) not in (1, 2, 4, 10, 20) or \
            abs(rc.integration_time * 1000 - round(rc.integration_time * 1000)) > 1e-9:
        bad("receiver.integration_time", "must be 1, 2, 4, 10 or 20 ms")
    if rc.doppler_bin <= 0 or abs(rc.doppler_span / rc.doppler_bin - round(rc.doppler_span / rc.doppler_bin)) > 1e-9:
        bad("receiver.doppler_span", "must be a positive multiple of receiver.doppler_bin")
    for i, spec in enumerate(cfg.interference):
        try:
            spec.validate(cfg.sample_rate)
        except ImpairmentError as exc:
            bad(f"interference[{i}]", str(exc))
    for i, spec in enumerate(cfg.multipath):
        try:
            spec.validate(cfg.sample_rate)
        except ImpairmentError as exc:
            bad(f"multipath[{i}]", str(exc))


def config_from_dict(data: dict, base_dir=".") -> ScenarioConfig:
    problems = []
    for key in data:
        if key not in _SECTIONS and key not in ("interference", "multipath"):
            problems.append(f"{key}: unknown section")
    parts = {}
    for name, cls in _SECTIONS.items():
        sec = data.get(name, {})
        if not isinstance(sec, dict):
            problems.append(f"{name}: expected a table")
            sec = {}
        parts[name] = _check_types(name, cls, sec, problems)
    scen = parts.pop("scenario")
    for req in ("start_week", "start_tow", "duration"):
        if req not in scen:
            problems.append(f"scenario.{req}: required")
    interference = []
    for i, item in enumerate(data.get("interference", [])):
        extra = set(item) - _INTERFERENCE_KEYS
        for k in sorted(extra):
            problems.append(f"interference[{i}].{k}: unknown key")
        kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in item.items() if k in _INTERFERENCE_KEYS}
        if "kind" not in kw:
            problems.append(f"interference[{i}].kind: required")
            continue
        interference.append(InterferenceSpec(**kw))
    multipath = []
    for i, item in enumerate(data.get("multipath", [])):
        for k in sorted(set(item) - {"prn", "paths"}):
            problems.append(f"multipath[{i}].{k}: unknown key")
        paths = []
        for j, p in enumerate(item.get("paths", [])):
            for k in sorted(set(p) - _PATH_KEYS):
                problems.append(f"multipath[{i}].paths[{j}].{k}: unknown key")
            if "alpha" not in p or "delay" not in p:
                problems.append(f"multipath[{i}].paths[{j}]: alpha and delay are required")
                continue
            paths.append(ReflectedPath(**{k: float(v) for k, v in p.items() if k in _PATH_KEYS}))
        if "prn" not in item:
            problems.append(f"multipath[{i}].prn: required")
            continue
        multipath.append(MultipathSpec(int(item["prn"]), tuple(paths)))
    if problems:
        raise ConfigError(problems)
    if "prn_allowlist" in scen:
        scen["prn_allowlist"] = tuple(scen["prn_allowlist"])
    cfg = ScenarioConfig(**scen,
                         clock=ClockConfig(**parts["clock"]),
                         atmosphere=AtmosphereConfig(**parts["atmosphere"]),
                         link=LinkConfig(**parts["link"]),
                         trajectory=TrajectoryConfig(**parts["trajectory"]),
                         receiver=ReceiverConfig(**parts["receiver"]),
                         interference=tuple(interference), multipath=tuple(multipath),
                         base_dir=str(base_dir))
    _validate(cfg, problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text())
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror or exc}"]) from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: {exc}"]) from exc
    return config_from_dict(data, base_dir=path.parent)


def config_to_toml(cfg: ScenarioConfig) -> str:
    """Serialize back to TOML (round-trips through :func:`config_from_dict`)."""
    def fmt(v):
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, (int, float)):
            return repr(v)
        if isinstance(v, str):
            return json.dumps(v)
        if isinstance(v, (list, tuple)):
            return "[" + ", ".join(fmt(x) for x in v) + "]"
        raise TypeError(type(v))

    d = cfg.to_dict()
    lines = ["[scenario]"]
    for k, v in d.items():
        if k in _NESTED or v is None:
            continue
        lines.append(f"{k} = {fmt(v)}")
    for sec in ("clock", "atmosphere", "link", "trajectory", "receiver"):
        lines.append(f"\n[{sec}]")
        for k, v in d[sec].items():
            if v is None or (isinstance(v, tuple) and not v):
                continue
            lines.append(f"{k} = {fmt(v)}")
    for spec in d["interference"]:
        lines.append("\n[[interference]]")
        for k, v in spec.items():
            if v is None or (isinstance(v, (tuple, list)) and not v):
                continue
            lines.append(f"{k} = {fmt(v)}")
    for spec in d["multipath"]:
        lines.append("\n[[multipath]]")
        lines.append(f"prn = {spec['prn']}")
        for p in spec["paths"]:
            lines.append("[[multipath.paths]]")
            for k, v in p.items():
                lines.append(f"{k} = {fmt(v)}")
    return "\n".join(lines) + "\n"
