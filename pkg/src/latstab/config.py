"""Run configuration: nested dataclasses with INI-file round-trip.

A run is fully described by one config plus a seed; everything the plant
trajectory depends on is hashed so output files from different controllers
can only be combined when their physics matches.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path as FsPath


class ConfigError(ValueError):
    pass


@dataclass
class VehicleConfig:
    m: float = 2070.0
    i_z: float = 3658.0
    l_f: float = 1.362
    l_r: float = 1.308
    w_b: float = 1.715
    i_w: float = 2.4
    r_w: float = 0.358
    c_f: float = -108350.0
    c_r: float = -105898.0
    h_cg: float = 0.54


@dataclass
class TireConfig:
    model: str = "mf"
    b_lat: float = 10.0
    c_lat: float = 1.9
    e_lat: float = 0.3
    b_long: float = 12.0
    c_long: float = 1.65
    e_long: float = 0.6


@dataclass
class RhonnSettings:
    mu_vx: float = 1.0
    beta_vx: float = 0.03
    mu_vy: float = 1.0
    beta_vy: float = 0.2
    mu_wr: float = 1.0
    beta_wr: float = 2.0
    mu_delta: float = 1.0
    beta_delta: float = 0.5
    dt_scale_fixed_terms: bool = True


@dataclass
class EkfSettings:
    p0: float = 10.0
    q: float = 1e-4
    r: float = 0.1
    zeta: float = 1.0
    weight_guard: float = 1e6
    trace_guard: float = 1e9


@dataclass
class SearchSettings:
    grid_vy: float = 0.05
    grid_wr: float = 0.005
    r0_vy: float = 0.3
    r0_wr: float = 0.06
    eps_t: float = 0.12
    eta: float = 10.0
    vy_limit: float = 4.0            # absolute cap, m/s
    vy_limit_tau: float = 0.4        # grip scaling: |V_yd| <= tau*mu*g
    wr_limit_fraction: float = 0.95


@dataclass
class NmpcSettings:
    q: float = 100.0
    r_w: float = 1000.0
    dm_min: float = -1600.0
    dm_max: float = 1600.0
    nm_maxiter: int = 80
    polish_rounds: int = 2
    mf_nm_maxiter: int = 30      # lighter budget for the physics baseline,
    mf_polish_rounds: int = 1    # whose cost evaluations are expensive


@dataclass
class DriverSettings:
    preview_time: float = 0.6
    min_lookahead: float = 3.0
    steer_ratio: float = 17.2
    max_wheel_angle_deg: float = 500.0
    use_feedforward: bool = True
    lat_ki: float = 0.05
    lat_int_cap: float = 2.0
    speed_kp: float = 800.0
    speed_ki: float = 50.0


@dataclass
class DlcGeometry:
    # Transition lengths put the 65 km/h low-mu run just past the adhesion
    # limit (heavy sliding) while staying linear on dry road.
    offset: float = 3.5
    entry: float = 25.0
    change: float = 40.0
    hold: float = 20.0
    back: float = 40.0
    exit: float = 40.0


@dataclass
class CurveGeometry:
    # Corner entry precedes the 5 s controller activation so the online
    # model has already seen cornering data when control starts; the
    # clothoid ramps the demand instead of stepping it.
    lead_in: float = 80.0
    radius: float = 200.0
    arc_deg: float = 140.0
    spiral: float = 50.0


@dataclass
class ScenarioConfig:
    scenario: str = "dlc"            # dlc | curve
    mu: float = 0.35
    v0_kmh: float = 65.0
    controller: str = "nmpc_rhonn"   # nmpc_rhonn | nmpc_mf | lmpc | off
    identification_only: bool = False
    estimators: bool = False         # run the open-loop physics estimators
    seed: int = 0
    t_max: float = 30.0
    warmup: float = 1.0
    activation: float = -1.0         # <0 means scenario default (0 dlc, 5 curve)
    speed_hold: bool | None = None   # None means scenario default (off dlc, on curve)
    dt_plant: float = 5e-4
    dt_control: float = 0.05
    motor_cap: float = 400.0
    sensor_noise_std: float = 0.0    # additive Gaussian on measured body states
    vehicle: VehicleConfig = field(default_factory=VehicleConfig)
    tires: TireConfig = field(default_factory=TireConfig)
    rhonn: RhonnSettings = field(default_factory=RhonnSettings)
    ekf: EkfSettings = field(default_factory=EkfSettings)
    search: SearchSettings = field(default_factory=SearchSettings)
    nmpc: NmpcSettings = field(default_factory=NmpcSettings)
    driver: DriverSettings = field(default_factory=DriverSettings)
    dlc: DlcGeometry = field(default_factory=DlcGeometry)
    curve: CurveGeometry = field(default_factory=CurveGeometry)

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.scenario not in ("dlc", "curve"):
            raise ConfigError(f"unknown scenario {self.scenario!r}")
        if self.controller not in ("nmpc_rhonn", "nmpc_mf", "lmpc", "off"):
            raise ConfigError(f"unknown controller {self.controller!r}")
        if not (0.0 < self.mu <= 1.2):
            raise ConfigError(f"mu={self.mu} outside (0, 1.2]")
        if self.v0_kmh <= 0.0:
            raise ConfigError("initial speed must be positive")
        if self.dt_plant > 1e-3 + 1e-12:
            raise ConfigError("plant step must be at most 1 ms")
        if self.dt_control <= 0.0 or self.dt_control < self.dt_plant:
            raise ConfigError("controller tick must be positive and >= plant step")

    @property
    def v0(self) -> float:
        return self.v0_kmh / 3.6

    @property
    def activation_time(self) -> float:
        if self.activation >= 0.0:
            return self.activation
        return 5.0 if self.scenario == "curve" else 0.0

    @property
    def speed_hold_on(self) -> bool:
        if self.speed_hold is not None:
            return self.speed_hold
        return self.scenario == "curve"

    def plant_hash(self) -> str:
        """Hash of everything the plant trajectory depends on (controller
        and estimator settings excluded)."""
        payload = {
            "scenario": self.scenario,
            "mu": self.mu,
            "v0_kmh": self.v0_kmh,
            "seed": self.seed,
            "t_max": self.t_max,
            "dt_plant": self.dt_plant,
            "dt_control": self.dt_control,
            "motor_cap": self.motor_cap,
            "sensor_noise_std": self.sensor_noise_std,
            "vehicle": asdict(self.vehicle),
            "tires": asdict(self.tires),
            "driver": asdict(self.driver),
            "dlc": asdict(self.dlc),
            "curve": asdict(self.curve),
        }
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


_SECTIONS = {
    "vehicle": VehicleConfig,
    "tires": TireConfig,
    "rhonn": RhonnSettings,
    "ekf": EkfSettings,
    "search": SearchSettings,
    "nmpc": NmpcSettings,
    "driver": DriverSettings,
    "dlc": DlcGeometry,
    "curve": CurveGeometry,
}

_SCENARIO_KEYS = [f.name for f in fields(ScenarioConfig)
                  if f.name not in _SECTIONS]


def _coerce(raw: str, current):
    if isinstance(current, bool) or current is None:
        low = raw.strip().lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        if current is None and low in ("none", "auto", ""):
            return None
        raise ConfigError(f"cannot parse boolean from {raw!r}")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        v = float(raw)
        if not math.isfinite(v):
            raise ConfigError(f"non-finite value {raw!r}")
        return v
    return raw


def load_config(path) -> ScenarioConfig:
    """Read an INI file; missing keys keep their defaults."""
    parser = configparser.ConfigParser()
    read = parser.read(str(path))
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    cfg = ScenarioConfig()
    if parser.has_section("scenario"):
        for key, raw in parser.items("scenario"):
            if key not in _SCENARIO_KEYS:
                raise ConfigError(f"unknown key [scenario] {key}")
            setattr(cfg, key, _coerce(raw, getattr(cfg, key)))
    for section, cls in _SECTIONS.items():
        if not parser.has_section(section):
            continue
        sub = getattr(cfg, section)
        names = {f.name for f in fields(cls)}
        for key, raw in parser.items(section):
            if key not in names:
                raise ConfigError(f"unknown key [{section}] {key}")
            setattr(sub, key, _coerce(raw, getattr(sub, key)))
    cfg.validate()
    return cfg


def save_config(cfg: ScenarioConfig, path):
    parser = configparser.ConfigParser()
    parser["scenario"] = {k: str(getattr(cfg, k)) for k in _SCENARIO_KEYS}
    for section in _SECTIONS:
        parser[section] = {k: str(v) for k, v in asdict(getattr(cfg, section)).items()}
    with open(path, "w") as fh:
        parser.write(fh)


def preset(scenario: str, controller: str = "nmpc_rhonn", mu: float | None = None,
           v0_kmh: float | None = None, **kw) -> ScenarioConfig:
    """Scenario defaults matching the reference experiments."""
    if scenario == "dlc":
        cfg = ScenarioConfig(scenario="dlc", controller=controller,
                             mu=0.35 if mu is None else mu,
                             v0_kmh=65.0 if v0_kmh is None else v0_kmh, **kw)
    elif scenario == "curve":
        cfg = ScenarioConfig(scenario="curve", controller=controller,
                             mu=0.35 if mu is None else mu,
                             v0_kmh=85.0 if v0_kmh is None else v0_kmh, **kw)
    else:
        raise ConfigError(f"unknown scenario {scenario!r}")
    return cfg
