"""Scenario orchestration: closed-loop runs, metrics, telemetry files.

A run steps the truth plant at sub-millisecond resolution and executes the
identification / reference / control / allocation chain every 50 ms tick
with zero-order hold on the commands. Per-tick telemetry goes to a CSV
whose contents are bit-reproducible from config plus seed (wall-clock
timing therefore lives in the JSON summary, not the CSV).
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path as FsPath

import numpy as np

from .allocation import allocate
from .config import ScenarioConfig
from .control import ControlDecision, NmpcConfig, NmpcRhonnController, make_controller
from .driver import DriverConfig, PurePursuitDriver, SpeedHold
from .ekf import ControlInput, EkfConfig, RhonnIdentifier
from .paths import Path, PathExhausted, dlc_path, slippery_curve_path
from .plant import (CompanionModel, DegenerateSpeedError, NonFinitePlantError,
                    VehicleParams, VehicleState, integrate, understeer_gradient)
from .refgen import SearchConfig
from .rhonn import RhonnModel, SigmoidParams
from .tires import MfCoeffs


class MismatchedRunsError(RuntimeError):
    """Runs combined into one table do not share the same plant."""


CSV_COLUMNS = [
    "t", "vx", "vy", "wr", "psi", "x", "y", "w1", "w2", "w3", "w4",
    "vx_hat", "vy_hat", "wr_hat",
    "vx_mf", "vy_mf", "wr_mf", "vx_li", "vy_li", "wr_li",
    "vyd", "wrd", "betad", "search_converged", "search_evals", "search_cost",
    "dm", "cost", "t1", "t2", "t3", "t4", "tt", "delta_w", "deviation",
]

ESTIMATOR_KEYS = ("rhonn", "mf", "li")
_EST_COLS = {"rhonn": ("vx_hat", "vy_hat", "wr_hat"),
             "mf": ("vx_mf", "vy_mf", "wr_mf"),
             "li": ("vx_li", "vy_li", "wr_li")}


def build_vehicle(cfg: ScenarioConfig) -> VehicleParams:
    v = cfg.vehicle
    t = cfg.tires
    return VehicleParams(m=v.m, i_z=v.i_z, l_f=v.l_f, l_r=v.l_r, w_b=v.w_b,
                         i_w=v.i_w, r_w=v.r_w, c_f=v.c_f, c_r=v.c_r,
                         mu=cfg.mu, h_cg=v.h_cg,
                         mf=MfCoeffs(b_lat=t.b_lat, c_lat=t.c_lat, e_lat=t.e_lat,
                                     b_long=t.b_long, c_long=t.c_long, e_long=t.e_long))


def build_path(cfg: ScenarioConfig) -> Path:
    if cfg.scenario == "dlc":
        g = cfg.dlc
        return dlc_path(offset=g.offset,
                        sections=(g.entry, g.change, g.hold, g.back, g.exit))
    g = cfg.curve
    return slippery_curve_path(lead_in=g.lead_in, radius=g.radius, arc_deg=g.arc_deg,
                               spiral=g.spiral)


def build_model(cfg: ScenarioConfig, params: VehicleParams) -> RhonnModel:
    r = cfg.rhonn
    return RhonnModel(
        sig_vx=SigmoidParams(r.mu_vx, r.beta_vx),
        sig_vy=SigmoidParams(r.mu_vy, r.beta_vy),
        sig_wr=SigmoidParams(r.mu_wr, r.beta_wr),
        sig_delta=SigmoidParams(r.mu_delta, r.beta_delta),
        fixed_gain_vx=1.0 / (params.m * params.r_w),
        fixed_gain_wr=params.w_b / (2.0 * params.i_z * params.r_w),
        dt=cfg.dt_control,
        dt_scale_fixed_terms=r.dt_scale_fixed_terms,
    )


def _nmpc_config(cfg: ScenarioConfig) -> NmpcConfig:
    n = cfg.nmpc
    return NmpcConfig(q=(n.q,) * 3, r_w=(n.r_w,) * 3, dm_min=n.dm_min, dm_max=n.dm_max,
                      nm_maxiter=n.nm_maxiter, polish_rounds=n.polish_rounds,
                      mf_nm_maxiter=n.mf_nm_maxiter, mf_polish_rounds=n.mf_polish_rounds)


def _search_config(cfg: ScenarioConfig) -> SearchConfig:
    s = cfg.search
    vy_lim = min(s.vy_limit, s.vy_limit_tau * cfg.mu * 9.81)
    return SearchConfig(grid=(s.grid_vy, s.grid_wr), r0=(s.r0_vy, s.r0_wr),
                        dr=(s.r0_vy, s.r0_wr), eps_t=s.eps_t, eta=s.eta,
                        vy_bounds=(-vy_lim, vy_lim))


@dataclass
class RunResult:
    config: ScenarioConfig
    rows: list[dict]
    metrics: dict
    termination: str
    completed: bool
    compute_ms: list[float] = field(default_factory=list)
    out_dir: str | None = None


def run_scenario(cfg: ScenarioConfig, out_dir=None, instance_sink: list | None = None) -> RunResult:
    """Execute one scenario end to end; optionally write telemetry files.

    ``instance_sink``, when given, collects frozen mid-maneuver snapshots of
    the neural predictive controller's optimization problem (used to build
    solver oracle fixtures).
    """
    params = build_vehicle(cfg)
    path = build_path(cfg)
    d = cfg.driver
    driver_cfg = DriverConfig(preview_time=d.preview_time, min_lookahead=d.min_lookahead,
                              steer_ratio=d.steer_ratio,
                              max_wheel_angle=math.radians(d.max_wheel_angle_deg),
                              understeer_gradient=understeer_gradient(params),
                              use_feedforward=d.use_feedforward,
                              lat_ki=d.lat_ki, lat_int_cap=d.lat_int_cap,
                              speed_kp=d.speed_kp, speed_ki=d.speed_ki,
                              torque_limit=4.0 * cfg.motor_cap)
    driver = PurePursuitDriver(path, driver_cfg, params.wheelbase, dt=cfg.dt_control)
    speed = SpeedHold(cfg.v0, driver_cfg, cfg.dt_control) if cfg.speed_hold_on else None

    model = build_model(cfg, params)
    e = cfg.ekf
    ident = RhonnIdentifier(model, EkfConfig(p0=e.p0, q=e.q, r=e.r, zeta=e.zeta,
                                             weight_guard=e.weight_guard,
                                             trace_guard=e.trace_guard))
    ctrl_name = "off" if cfg.identification_only else cfg.controller
    controller = make_controller(ctrl_name, identifier=ident, params=params,
                                 cfg=_nmpc_config(cfg), search=_search_config(cfg),
                                 mu=cfg.mu, motor_cap=cfg.motor_cap, dt=cfg.dt_control,
                                 wr_fraction=cfg.search.wr_limit_fraction)

    companions = {}
    if cfg.estimators:
        for key, kind in (("mf", "mf"), ("li", "linear")):
            comp = CompanionModel(params, kind)
            comp.reset(cfg.v0)
            companions[key] = comp
    comp_alive = {k: True for k in companions}

    rng = np.random.default_rng(cfg.seed)
    state = VehicleState.rolling(cfg.v0, params)
    n_sub = max(1, round(cfg.dt_control / cfg.dt_plant))
    dt_sub = cfg.dt_control / n_sub
    n_ticks = int(math.ceil(cfg.t_max / cfg.dt_control))
    activation = cfg.activation_time
    end_margin = 1.2 * (cfg.v0 * d.preview_time + d.min_lookahead + 5.0)

    rows: list[dict] = []
    timings: list[float] = []
    sat_count = 0
    bound_violations = 0
    termination = "time_limit"

    for k in range(n_ticks):
        t = k * cfg.dt_control
        if cfg.sensor_noise_std > 0.0:
            noise = rng.normal(0.0, cfg.sensor_noise_std, 3)
            meas = (state.vx + noise[0], state.vy + noise[1], state.wr + noise[2])
        else:
            meas = (state.vx, state.vy, state.wr)
        meas_state = replace(state, vx=meas[0], vy=meas[1], wr=meas[2])
        est = ident.estimate
        comp_est = {key: companions[key].body_state for key in companions}

        try:
            steer_w = driver.steer(state.x, state.y, state.psi, state.vx)
        except PathExhausted:
            termination = "path_end"
            break
        steer_road = steer_w / driver_cfg.steer_ratio
        t_t = speed.torque(meas[0]) if speed else 0.0

        tick_start = time.perf_counter()
        ident.assimilate(meas)
        active = t >= activation and controller.name != "off"
        if active:
            dec = controller.tick(meas_state, steer_w, steer_road, t_t)
        else:
            controller.observe(meas_state)
            dec = ControlDecision()
        dm = dec.cmd.dm
        if dm < cfg.nmpc.dm_min - 1e-9 or dm > cfg.nmpc.dm_max + 1e-9:
            bound_violations += 1
        tq = allocate(t_t, dm, cfg.motor_cap)
        ident.predict(meas, ControlInput(t_t, dm, steer_w))
        timings.append((time.perf_counter() - tick_start) * 1e3)

        if tq.saturated:
            sat_count += 1
        if instance_sink is not None and active and isinstance(controller, NmpcRhonnController):
            instance_sink.append(_snapshot_instance(model, meas, t_t, steer_w, dec, cfg))

        row = {
            "t": t, "vx": state.vx, "vy": state.vy, "wr": state.wr,
            "psi": state.psi, "x": state.x, "y": state.y,
            "w1": state.w1, "w2": state.w2, "w3": state.w3, "w4": state.w4,
            "vx_hat": est[0], "vy_hat": est[1], "wr_hat": est[2],
            "vyd": dec.refs.v_yd, "wrd": dec.refs.w_rd, "betad": dec.refs.beta_d,
            "search_converged": int(dec.refs.converged),
            "search_evals": dec.refs.n_evaluated,
            "search_cost": dec.refs.cost,
            "dm": dm, "cost": dec.cmd.cost,
            "t1": tq.t1, "t2": tq.t2, "t3": tq.t3, "t4": tq.t4,
            "tt": t_t, "delta_w": steer_w, "deviation": driver.deviation,
        }
        for key in ESTIMATOR_KEYS[1:]:
            cols = _EST_COLS[key]
            vals = comp_est.get(key)
            for c, v in zip(cols, vals if vals else ("", "", "")):
                row[c] = v
        rows.append(row)

        torques = tq.as_tuple()
        try:
            for _ in range(n_sub):
                state = integrate(state, torques, steer_road, params, dt_sub,
                                  tire_model=cfg.tires.model)
        except (NonFinitePlantError, DegenerateSpeedError) as exc:
            termination = "plant_diverged" if isinstance(exc, NonFinitePlantError) else "degenerate_speed"
            break
        for key, comp in companions.items():
            if not comp_alive[key]:
                continue
            try:
                comp.advance(torques, steer_road, cfg.dt_control, n_sub)
            except (NonFinitePlantError, DegenerateSpeedError):
                comp_alive[key] = False
        if state.vx < 1.0:
            termination = "slow"
            break
        if driver.s_now >= path.length - end_margin:
            termination = "path_end"
            break
    else:
        termination = "time_limit"

    if termination == "time_limit" and driver.s_now >= path.length - end_margin:
        termination = "path_end"
    completed = termination == "path_end"

    metrics = compute_metrics(rows, cfg)
    metrics["termination"] = termination
    metrics["completed"] = completed
    metrics["saturation_count"] = sat_count
    metrics["dm_bound_violations"] = bound_violations
    metrics["n_ticks"] = len(rows)
    metrics["mean_compute_ms"] = float(np.mean(timings)) if timings else 0.0
    metrics["max_compute_ms"] = float(np.max(timings)) if timings else 0.0
    metrics["plant_config_hash"] = cfg.plant_hash()
    metrics["scenario"] = cfg.scenario
    metrics["controller"] = ctrl_name
    metrics["mu"] = cfg.mu
    metrics["v0_kmh"] = cfg.v0_kmh
    metrics["estimator_alive"] = {k: bool(v) for k, v in comp_alive.items()}

    result = RunResult(config=cfg, rows=rows, metrics=metrics,
                       termination=termination, completed=completed,
                       compute_ms=timings, out_dir=None)
    if out_dir is not None:
        out = FsPath(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_trajectory_csv(out / "trajectory.csv", rows, cfg.plant_hash())
        with open(out / "summary.json", "w") as fh:
            json.dump(metrics, fh, indent=2, sort_keys=True)
        from .config import save_config
        save_config(cfg, out / "run.ini")
        result.out_dir = str(out)
    return result


def _snapshot_instance(model: RhonnModel, meas, t_t, steer_w, dec: ControlDecision,
                       cfg: ScenarioConfig) -> dict:
    return {
        "w_vx": model.w_vx.tolist(), "w_vy": model.w_vy.tolist(), "w_wr": model.w_wr.tolist(),
        "sig": [[model.sig_vx.mu, model.sig_vx.beta], [model.sig_vy.mu, model.sig_vy.beta],
                [model.sig_wr.mu, model.sig_wr.beta], [model.sig_delta.mu, model.sig_delta.beta]],
        "fixed_gain_vx": model.fixed_gain_vx, "fixed_gain_wr": model.fixed_gain_wr,
        "dt": model.dt, "dt_scale_fixed_terms": model.dt_scale_fixed_terms,
        "x0": list(meas), "t_t": t_t, "steer_w": steer_w,
        "w_rd": dec.refs.w_rd, "beta_d": dec.refs.beta_d,
        "q": cfg.nmpc.q, "r_w": cfg.nmpc.r_w,
        "dm_min": cfg.nmpc.dm_min, "dm_max": cfg.nmpc.dm_max,
        "solver_dm": dec.cmd.dm, "solver_cost": dec.cmd.cost,
    }


# ---------------------------------------------------------------------------
# Metrics

def convex_hull_area(points) -> float:
    """Area of the convex hull of a 2-D point set (monotone chain)."""
    pts = sorted(set((float(p[0]), float(p[1])) for p in points))
    if len(pts) < 3:
        return 0.0

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0.0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0.0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        return 0.0
    area = 0.0
    for (x1, y1), (x2, y2) in zip(hull, hull[1:] + hull[:1]):
        area += x1 * y2 - x2 * y1
    return 0.5 * abs(area)


def phase_area(beta: np.ndarray, dt: float) -> float:
    """Convex-hull area of the sideslip vs sideslip-rate trajectory.

    The rate is the central finite difference, so endpoints are dropped.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.size < 3:
        return 0.0
    rate = (beta[2:] - beta[:-2]) / (2.0 * dt)
    return convex_hull_area(zip(beta[1:-1], rate))


def estimation_stats(truth: np.ndarray, est: np.ndarray, scale: float) -> dict:
    """Min / max / RMSE of the absolute estimation error, scaled to
    reporting units (km/h or deg/s)."""
    err = np.abs(est - truth) * scale
    return {"min": float(np.min(err)), "max": float(np.max(err)),
            "rmse": float(math.sqrt(np.mean((est - truth) ** 2))) * scale}


def compute_metrics(rows: list[dict], cfg: ScenarioConfig) -> dict:
    out: dict = {"estimation": {}}
    if not rows:
        out.update({"phase_area": 0.0, "max_deviation": 0.0, "final_t": 0.0,
                    "search_converged_fraction": 1.0})
        return out
    t = np.array([r["t"] for r in rows])
    keep = t >= cfg.warmup
    truth = {s: np.array([r[s] for r in rows]) for s in ("vx", "vy", "wr")}
    for key in ESTIMATOR_KEYS:
        cols = _EST_COLS[key]
        if rows[0].get(cols[0], "") == "":
            continue
        est = {s: np.array([float(r[c]) for r in rows]) for s, c in zip(("vx", "vy", "wr"), cols)}
        if not np.any(keep):
            continue
        out["estimation"][key] = {
            "vx": estimation_stats(truth["vx"][keep], est["vx"][keep], 3.6),
            "vy": estimation_stats(truth["vy"][keep], est["vy"][keep], 3.6),
            "wr": estimation_stats(truth["wr"][keep], est["wr"][keep], 180.0 / math.pi),
        }
    beta = np.arctan2(truth["vy"], truth["vx"])
    out["phase_area"] = phase_area(beta[keep], cfg.dt_control) if np.any(keep) else 0.0
    out["max_deviation"] = float(np.max([r["deviation"] for r in rows]))
    out["final_t"] = float(t[-1])
    conv = [r["search_converged"] for r in rows if r["search_evals"]]
    out["search_converged_fraction"] = float(np.mean(conv)) if conv else 1.0
    return out


# ---------------------------------------------------------------------------
# Files

def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_trajectory_csv(path, rows: list[dict], plant_hash: str):
    with open(path, "w", newline="") as fh:
        fh.write(f"# plant_config_hash={plant_hash}\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow([_fmt(r.get(c, "")) for c in CSV_COLUMNS])


def read_trajectory_csv(path) -> tuple[list[dict], str]:
    with open(path) as fh:
        first = fh.readline().strip()
        plant_hash = first.split("=", 1)[1] if first.startswith("#") else ""
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            row = {}
            for k, v in raw.items():
                if v == "" or v is None:
                    row[k] = ""
                elif k in ("search_converged", "search_evals"):
                    row[k] = int(v)
                else:
                    row[k] = float(v)
            rows.append(row)
    return rows, plant_hash


def metrics_from_csv(path, cfg: ScenarioConfig) -> dict:
    rows, _ = read_trajectory_csv(path)
    return compute_metrics(rows, cfg)


# ---------------------------------------------------------------------------
# Reports

def estimation_report(results: list[RunResult]) -> dict:
    """Min/Max/RMSE table per model per state from identification runs.

    All runs must share the same plant configuration and truth trajectory.
    """
    if not results:
        raise ValueError("no runs given")
    ref_hash = results[0].metrics["plant_config_hash"]
    for r in results[1:]:
        if r.metrics["plant_config_hash"] != ref_hash:
            raise MismatchedRunsError("plant config hashes differ")
        for col in ("vx", "vy", "wr"):
            a = [row[col] for row in results[0].rows]
            b = [row[col] for row in r.rows]
            if a != b:
                raise MismatchedRunsError(f"plant trace column {col!r} differs")
    table: dict = {}
    for r in results:
        for model_key, stats in r.metrics["estimation"].items():
            table.setdefault(model_key, stats)
    return table


def format_estimation_table(table: dict) -> str:
    lines = [f"{'state':<6} {'model':<8} {'min':>10} {'max':>10} {'rmse':>10}"]
    for state, unit in (("vx", "km/h"), ("vy", "km/h"), ("wr", "deg/s")):
        for model_key in ("li", "mf", "rhonn"):
            if model_key not in table:
                continue
            s = table[model_key][state]
            lines.append(f"{state:<6} {model_key:<8} {s['min']:>10.3f} {s['max']:>10.3f} "
                         f"{s['rmse']:>10.3f}  [{unit}]")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Speed frontier

def _passes(cfg: ScenarioConfig, v0_kmh: float, max_dev: float = 1.0) -> bool:
    trial = replace(cfg, v0_kmh=v0_kmh)
    res = run_scenario(trial)
    return res.completed and res.metrics["max_deviation"] < max_dev


def speed_frontier(cfg: ScenarioConfig, lo_kmh: float = 40.0, hi_kmh: float = 110.0,
                   resolution: float = 0.5, max_dev: float = 1.0) -> float:
    """Largest entry speed (bisection, fixed resolution) that completes the
    course within the deviation budget. Returns the floor speed if even
    that fails."""
    lo = int(round(lo_kmh / resolution))
    hi = int(round(hi_kmh / resolution))
    if not _passes(cfg, lo * resolution, max_dev):
        return lo * resolution
    if _passes(cfg, hi * resolution, max_dev):
        return hi * resolution
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if _passes(cfg, mid * resolution, max_dev):
            lo = mid
        else:
            hi = mid
    return lo * resolution
