"""Yaw-moment controllers: the neural-model predictive controller and the
two baselines (physics-model predictive, linear).

All three minimize the same quadratic tracking cost over a 3-step horizon
(yaw-rate error weighted 100, sideslip error weighted 1000 per step) and
apply only the first element of the optimized left/right torque-difference
sequence. The decision variable is box-bounded by the motor capacity.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.optimize import lsq_linear, minimize, minimize_scalar

from .allocation import allocate
from .ekf import RhonnIdentifier
from .plant import CompanionModel, VehicleParams, VehicleState, understeer_gradient
from .refgen import (ReferenceTargets, SearchConfig, desired_sideslip,
                     friction_yaw_limit, neighbors_search, rhonn_lateral_map)
from .rhonn import RhonnModel, step

log = logging.getLogger(__name__)

BETA_VX_FLOOR = 0.5  # m/s floor when forming sideslip quotients


@dataclass
class NmpcConfig:
    horizon: int = 3
    q: tuple[float, float, float] = (100.0, 100.0, 100.0)
    r_w: tuple[float, float, float] = (1000.0, 1000.0, 1000.0)
    dm_min: float = -1600.0
    dm_max: float = 1600.0
    nm_maxiter: int = 80
    polish_rounds: int = 2
    mf_nm_maxiter: int = 30
    mf_polish_rounds: int = 1

    def __post_init__(self):
        if self.horizon != 3:
            raise ValueError("prediction horizon is fixed at 3 steps")
        if not (self.dm_min < 0.0 < self.dm_max):
            raise ValueError("yaw-moment bounds must bracket zero")


@dataclass
class YawMomentCommand:
    dm: float = 0.0
    cost: float = 0.0
    n_evals: int = 0
    ok: bool = True


@dataclass
class ControlDecision:
    refs: ReferenceTargets = field(default_factory=ReferenceTargets)
    cmd: YawMomentCommand = field(default_factory=YawMomentCommand)


def predict_rhonn(model: RhonnModel, x0: tuple[float, float, float],
                  dm_seq, total_torque: float, steer: float):
    """Roll the identified model over the horizon.

    Weights, total torque and steer are held; only the yaw-moment sequence
    varies across the horizon.
    """
    preds = []
    state = x0
    for dm in dm_seq:
        state = step(model, state, total_torque, float(dm), steer)
        preds.append(state)
    return preds


def nmpc_cost(preds, w_rd: float, beta_d: float, cfg: NmpcConfig) -> float:
    """Quadratic tracking cost over the horizon; references held constant."""
    j = 0.0
    for (vx_i, vy_i, wr_i), qi, ri in zip(preds, cfg.q, cfg.r_w):
        beta_i = vy_i / max(vx_i, BETA_VX_FLOOR)
        j += qi * (w_rd - wr_i) ** 2 + ri * (beta_d - beta_i) ** 2
    return j


def solve_boxed(costfn, warm: np.ndarray, lo: float, hi: float,
                maxiter: int = 150, polish_rounds: int = 2):
    """Direct search over the box: restarted Nelder-Mead plus a
    coordinate-wise polish.

    Returns (solution, cost, evaluation count). The returned cost never
    exceeds the warm-start cost because the warm start itself stays in the
    candidate set.
    """
    n = len(warm)
    bounds = [(lo, hi)] * n
    evals = [0]

    def f(x):
        evals[0] += 1
        j = costfn(np.clip(x, lo, hi))
        return j if math.isfinite(j) else 1e30

    best_x = np.clip(np.asarray(warm, dtype=float), lo, hi)
    best_j = f(best_x)

    half = 0.5 * hi * np.ones(n)
    probes = [np.zeros(n), half, -half]
    probe_js = [f(p) for p in probes]
    k = int(np.argmin(probe_js))
    if probe_js[k] < best_j:
        best_j = probe_js[k]
        best_x = probes[k]
    starts = [np.clip(np.asarray(warm, dtype=float), lo, hi), probes[k]]

    for x0 in starts:
        res = minimize(f, x0, method="Nelder-Mead", bounds=bounds,
                       options={"maxiter": maxiter, "xatol": 0.2, "fatol": 1e-12})
        if res.fun < best_j:
            best_j = float(res.fun)
            best_x = np.clip(res.x, lo, hi)

    for _ in range(polish_rounds):
        for i in range(n):
            xi = best_x.copy()

            def f1(v, i=i, xi=xi):
                xi[i] = v
                return f(xi)

            r = minimize_scalar(f1, bounds=(lo, hi), method="bounded",
                                options={"xatol": 1e-3})
            if r.fun < best_j:
                best_j = float(r.fun)
                best_x = best_x.copy()
                best_x[i] = float(r.x)
    return best_x, best_j, evals[0]


def bicycle_matrices(vx: float, p: VehicleParams):
    """Continuous-time two-state linear lateral model (V_y, w_r).

    Inputs are the front road-wheel angle and the left/right torque
    difference; the latter acts through w_B/(2 r) as a yaw moment.
    """
    cf, cr = p.c_f, p.c_r
    lf, lr = p.l_f, p.l_r
    m, iz = p.m, p.i_z
    a = np.array([
        [(cf + cr) / (m * vx), (cf * lf - cr * lr) / (m * vx) - vx],
        [(cf * lf - cr * lr) / (iz * vx), (cf * lf ** 2 + cr * lr ** 2) / (iz * vx)],
    ])
    b_steer = np.array([-cf / m, -cf * lf / iz])
    b_moment = np.array([0.0, p.w_b / (2.0 * iz * p.r_w)])
    return a, b_steer, b_moment


def bicycle_steady_state(vx: float, steer_road: float, p: VehicleParams) -> tuple[float, float]:
    """Settled (V_y, w_r) of the linear model under constant steer."""
    a, b_steer, _ = bicycle_matrices(vx, p)
    sol = np.linalg.solve(a, -b_steer * steer_road)
    return float(sol[0]), float(sol[1])


class OffController:
    """No intervention; emits a zero yaw-moment command."""

    name = "off"

    def observe(self, state: VehicleState):
        pass

    def tick(self, state: VehicleState, steer_wheel: float, steer_road: float,
             total_torque: float) -> ControlDecision:
        return ControlDecision()


class NmpcRhonnController:
    """Predictive controller on the online-identified neural model.

    References come from the neighborhood equilibrium search seeded at the
    previous measured lateral state; the prediction model is the same
    identified model the search probes.
    """

    name = "nmpc_rhonn"

    def __init__(self, identifier: RhonnIdentifier, cfg: NmpcConfig,
                 search: SearchConfig, mu: float, wr_fraction: float = 0.95,
                 ref_slew: tuple[float, float] = (0.3, 0.04)):
        self.identifier = identifier
        self.cfg = cfg
        self.search = search
        self.mu = mu
        self.wr_fraction = wr_fraction
        self.ref_slew = ref_slew      # per-tick cap on (V_yd, w_rd) moves
        self._warm = np.zeros(cfg.horizon)
        self._prev_lateral: tuple[float, float] | None = None
        self._prev_refs: tuple[float, float] | None = None
        self._last_beta_d = 0.0

    def observe(self, state: VehicleState):
        self._prev_lateral = (state.vy, state.wr)

    def references(self, state: VehicleState, steer_wheel: float) -> ReferenceTargets:
        model = self.identifier.model
        vx_hat = self.identifier.estimate[0]
        if vx_hat <= BETA_VX_FLOOR:
            vx_hat = state.vx
        lateral_map = rhonn_lateral_map(model, vx_hat, steer_wheel)
        prev = self._prev_lateral if self._prev_lateral is not None else (state.vy, state.wr)
        # Seed the equilibrium hunt at the model's one-step free response
        # from the last lateral state: during legitimate transients the
        # nearest equilibrium then leads the motion instead of pinning it,
        # while the feasibility box still pulls the targets back inside the
        # adhesion envelope whenever the free response leaves it.
        pv, pw = lateral_map(*prev)
        center = (float(pv), float(pw))
        wlim = friction_yaw_limit(self.mu, vx_hat, self.wr_fraction)
        cfg = SearchConfig(grid=self.search.grid, r0=self.search.r0, dr=self.search.dr,
                           eps_t=self.search.eps_t, eta=self.search.eta,
                           vy_bounds=self.search.vy_bounds, wr_bounds=(-wlim, wlim))
        refs = neighbors_search(center, cfg, lateral_map)
        if self._prev_refs is not None:
            dv, dw = self.ref_slew
            pv, pw = self._prev_refs
            refs.v_yd = min(max(refs.v_yd, pv - dv), pv + dv)
            refs.w_rd = min(max(refs.w_rd, pw - dw), pw + dw)
        self._prev_refs = (refs.v_yd, refs.w_rd)
        try:
            refs.beta_d = desired_sideslip(refs.v_yd, vx_hat)
            self._last_beta_d = refs.beta_d
        except Exception:
            refs.beta_d = self._last_beta_d
        return refs

    def tick(self, state: VehicleState, steer_wheel: float, steer_road: float,
             total_torque: float) -> ControlDecision:
        refs = self.references(state, steer_wheel)
        model = self.identifier.model
        x0 = (state.vx, state.vy, state.wr)

        def cost(dm_seq):
            preds = predict_rhonn(model, x0, dm_seq, total_torque, steer_wheel)
            return nmpc_cost(preds, refs.w_rd, refs.beta_d, self.cfg)

        try:
            sol, j, n_evals = solve_boxed(cost, self._warm, self.cfg.dm_min, self.cfg.dm_max,
                                          self.cfg.nm_maxiter, self.cfg.polish_rounds)
            cmd = YawMomentCommand(dm=float(sol[0]), cost=j, n_evals=n_evals, ok=True)
            self._warm = np.concatenate([sol[1:], sol[-1:]])
        except ArithmeticError:
            log.warning("nmpc_rhonn solve failed, emitting neutral command")
            cmd = YawMomentCommand(dm=0.0, ok=False)
            self._warm = np.zeros(self.cfg.horizon)
        self.observe(state)
        return ControlDecision(refs=refs, cmd=cmd)


class NmpcMfController:
    """Predictive controller on the small-angle physics model with the
    empirical tire curve; references from the linear steady state."""

    name = "nmpc_mf"

    def __init__(self, params: VehicleParams, cfg: NmpcConfig, motor_cap: float = 400.0,
                 dt: float = 0.05):
        self.params = params
        self.cfg = cfg
        self.cap = motor_cap
        self.dt = dt
        self.companion = CompanionModel(params, "mf")
        self._warm = np.zeros(cfg.horizon)
        # wheel-spin eigenvalue bounds the rollout substep (explicit RK4)
        slope = params.mf.b_long * params.mf.c_long * params.mu * 0.25 * params.m * 9.81
        lam = slope * params.r_w ** 2 / (params.i_w * 12.0)
        self.substeps = max(2, int(math.ceil(dt * lam / 2.2)))

    def observe(self, state: VehicleState):
        pass

    def references(self, state: VehicleState, steer_road: float) -> ReferenceTargets:
        vx = max(state.vx, BETA_VX_FLOOR)
        vy_ss, wr_ss = bicycle_steady_state(vx, steer_road, self.params)
        return ReferenceTargets(v_yd=vy_ss, w_rd=wr_ss, beta_d=vy_ss / vx)

    def tick(self, state: VehicleState, steer_wheel: float, steer_road: float,
             total_torque: float) -> ControlDecision:
        refs = self.references(state, steer_road)
        x0 = (state.vx, state.vy, state.wr) + state.wheel_speeds()

        def cost(dm_seq):
            torques_seq = [allocate(total_torque, float(dm), self.cap).as_tuple()
                           for dm in dm_seq]
            try:
                preds = self.companion.rollout(x0, torques_seq, steer_road, self.dt, self.substeps)
            except (ArithmeticError, RuntimeError):
                return math.inf
            j = 0.0
            for (vx_i, vy_i, wr_i, *_), qi, ri in zip(preds, self.cfg.q, self.cfg.r_w):
                beta_i = vy_i / max(vx_i, BETA_VX_FLOOR)
                j += qi * (refs.w_rd - wr_i) ** 2 + ri * (refs.beta_d - beta_i) ** 2
            return j

        try:
            sol, j, n_evals = solve_boxed(cost, self._warm, self.cfg.dm_min, self.cfg.dm_max,
                                          self.cfg.mf_nm_maxiter, self.cfg.mf_polish_rounds)
            cmd = YawMomentCommand(dm=float(sol[0]), cost=j, n_evals=n_evals, ok=True)
            self._warm = np.concatenate([sol[1:], sol[-1:]])
        except ArithmeticError:
            log.warning("nmpc_mf solve failed, emitting neutral command")
            cmd = YawMomentCommand(dm=0.0, ok=False)
            self._warm = np.zeros(self.cfg.horizon)
        return ControlDecision(refs=refs, cmd=cmd)


class LmpcController:
    """Fully linear baseline: linear references, discretized linear lateral
    model, and the exact solution of the resulting box-constrained QP."""

    name = "lmpc"

    def __init__(self, params: VehicleParams, cfg: NmpcConfig, dt: float = 0.05):
        self.params = params
        self.cfg = cfg
        self.dt = dt

    def observe(self, state: VehicleState):
        pass

    def references(self, state: VehicleState, steer_road: float) -> ReferenceTargets:
        vx = max(state.vx, BETA_VX_FLOOR)
        vy_ss, wr_ss = bicycle_steady_state(vx, steer_road, self.params)
        return ReferenceTargets(v_yd=vy_ss, w_rd=wr_ss, beta_d=vy_ss / vx)

    def tick(self, state: VehicleState, steer_wheel: float, steer_road: float,
             total_torque: float) -> ControlDecision:
        refs = self.references(state, steer_road)
        vx = max(state.vx, BETA_VX_FLOOR)
        a, b_s, b_m = bicycle_matrices(vx, self.params)
        ad = expm(a * self.dt)
        a_inv_step = np.linalg.solve(a, ad - np.eye(2))
        bd_s = a_inv_step @ b_s
        bd_m = a_inv_step @ b_m

        h = self.cfg.horizon
        base = np.array([state.vy, state.wr])
        gain = np.zeros((2, h))
        rows = []
        rhs = []
        for i in range(h):
            base = ad @ base + bd_s * steer_road
            gain = ad @ gain
            gain[:, i] += bd_m
            sq_q = math.sqrt(self.cfg.q[i])
            sq_r = math.sqrt(self.cfg.r_w[i])
            rows.append(sq_q * gain[1])
            rhs.append(sq_q * (refs.w_rd - base[1]))
            rows.append(sq_r * gain[0] / vx)
            rhs.append(sq_r * (refs.beta_d - base[0] / vx))
        a_ls = np.vstack(rows)
        b_ls = np.asarray(rhs)
        try:
            res = lsq_linear(a_ls, b_ls, bounds=(self.cfg.dm_min, self.cfg.dm_max), method="bvls")
            j = float(2.0 * res.cost)  # lsq_linear reports 0.5*||r||^2
            cmd = YawMomentCommand(dm=float(res.x[0]), cost=j, n_evals=int(res.nit), ok=True)
        except Exception:
            log.warning("lmpc solve failed, emitting neutral command")
            cmd = YawMomentCommand(dm=0.0, ok=False)
        return ControlDecision(refs=refs, cmd=cmd)


def make_controller(name: str, *, identifier: RhonnIdentifier | None = None,
                    params: VehicleParams | None = None, cfg: NmpcConfig | None = None,
                    search: SearchConfig | None = None, mu: float = 0.85,
                    motor_cap: float = 400.0, dt: float = 0.05, wr_fraction: float = 0.95):
    cfg = cfg or NmpcConfig()
    if name == "off":
        return OffController()
    if name == "nmpc_rhonn":
        return NmpcRhonnController(identifier, cfg, search or SearchConfig(), mu,
                                   wr_fraction=wr_fraction)
    if name == "nmpc_mf":
        return NmpcMfController(params, cfg, motor_cap=motor_cap, dt=dt)
    if name == "lmpc":
        return LmpcController(params, cfg, dt=dt)
    raise ValueError(f"unknown controller {name!r}")
