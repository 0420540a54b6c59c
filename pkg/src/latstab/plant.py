"""Ground-truth 7-DoF vehicle and its companion physics estimators.

The truth plant carries three planar body states, pose, and four wheel-spin
states, integrated with RK4 at a millisecond step. Tire forces are applied
with full trigonometric projection of the steered wheels and vertical loads
include algebraic longitudinal/lateral transfer.

The companion models (used both as open-loop physics estimators and as the
internal prediction model of one of the baseline controllers) share the
slip kinematics and tire curves but follow the small-steer-angle planar
equations with static vertical loads. That fidelity gap between companion
and truth is deliberate.

Axis convention (ISO 8855): x forward, y left, z up. Positive steer and
positive yaw rate mean a left turn. A positive left/right torque
difference (more torque on the right wheels) yields a positive yaw moment.
Wheel order: front-left, front-right, rear-left, rear-right.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

from .tires import MfCoeffs, friction_circle, linear_lateral, linear_longitudinal, mf_lateral, mf_longitudinal

G = 9.81


class DegenerateSpeedError(RuntimeError):
    """Forward speed below the floor where slip quantities are defined."""


class NonFinitePlantError(ArithmeticError):
    """Plant integration produced NaN/inf."""


@dataclass(frozen=True)
class VehicleParams:
    m: float = 2070.0          # kg
    i_z: float = 3658.0        # kg m^2
    l_f: float = 1.362         # m, front axle to cg
    l_r: float = 1.308         # m, rear axle to cg
    w_b: float = 1.715         # m, track width
    i_w: float = 2.4           # kg m^2, wheel spin inertia
    r_w: float = 0.358         # m, rolling radius
    c_f: float = -108350.0     # N/rad, front axle cornering stiffness
    c_r: float = -105898.0     # N/rad, rear axle cornering stiffness
    mu: float = 0.85           # road adhesion
    h_cg: float = 0.54         # m, cg height (load transfer)
    mf: MfCoeffs = field(default_factory=MfCoeffs)
    vx_floor: float = 0.1      # m/s, below this slip quantities degenerate
    slip_speed_floor: float = 2.0  # m/s, denominator floor in slip ratio; keeps
                                   # the wheel-spin eigenvalue inside the RK4
                                   # stability region at sub-ms steps

    def __post_init__(self):
        if self.l_f + self.l_r <= 0.0 or self.m <= 0.0 or self.i_z <= 0.0:
            raise ValueError("vehicle geometry/mass must be positive")
        if self.c_f >= 0.0 or self.c_r >= 0.0:
            raise ValueError("cornering stiffnesses use the negative sign convention")

    @property
    def wheelbase(self) -> float:
        return self.l_f + self.l_r

    @property
    def static_loads(self) -> tuple[float, float, float, float]:
        lw = self.wheelbase
        front = self.m * G * self.l_r / (2.0 * lw)
        rear = self.m * G * self.l_f / (2.0 * lw)
        return (front, front, rear, rear)

    def wheel_positions(self) -> tuple[tuple[float, float], ...]:
        half = 0.5 * self.w_b
        return ((self.l_f, half), (self.l_f, -half), (-self.l_r, half), (-self.l_r, -half))

    def linear_slip_stiffness(self) -> float:
        """Longitudinal slip stiffness used by the linear tire model (origin
        slope of the longitudinal curve at nominal load)."""
        front, _, rear, _ = self.static_loads
        fz_nom = 0.5 * (front + rear)
        return self.mf.b_long * self.mf.c_long * self.mu * fz_nom


@dataclass
class VehicleState:
    vx: float = 0.0
    vy: float = 0.0
    wr: float = 0.0
    psi: float = 0.0
    x: float = 0.0
    y: float = 0.0
    w1: float = 0.0
    w2: float = 0.0
    w3: float = 0.0
    w4: float = 0.0

    @classmethod
    def rolling(cls, vx: float, params: VehicleParams, x: float = 0.0, y: float = 0.0, psi: float = 0.0):
        w = vx / params.r_w
        return cls(vx=vx, psi=psi, x=x, y=y, w1=w, w2=w, w3=w, w4=w)

    def wheel_speeds(self) -> tuple[float, float, float, float]:
        return (self.w1, self.w2, self.w3, self.w4)

    def as_tuple(self) -> tuple[float, ...]:
        return (self.vx, self.vy, self.wr, self.psi, self.x, self.y,
                self.w1, self.w2, self.w3, self.w4)

    @classmethod
    def from_tuple(cls, t):
        return cls(*t)


@dataclass
class TireForces:
    fx: tuple[float, float, float, float]
    fy: tuple[float, float, float, float]
    kappa: tuple[float, float, float, float]
    alpha: tuple[float, float, float, float]
    fz: tuple[float, float, float, float]


def _slips(vx, vy, wr, steer, wheel_speeds, params: VehicleParams):
    """Per-wheel slip angle and slip ratio from rigid-body kinematics."""
    alphas = []
    kappas = []
    vtxs = []
    for (px, py), w in zip(params.wheel_positions(), wheel_speeds):
        delta = steer if px > 0.0 else 0.0
        cx = vx - wr * py
        cy = vy + wr * px
        cos_d = math.cos(delta)
        sin_d = math.sin(delta)
        vtx = cx * cos_d + cy * sin_d
        vty = -cx * sin_d + cy * cos_d
        alphas.append(math.atan2(vty, vtx))
        denom = max(abs(vtx), params.slip_speed_floor)
        kappas.append((w * params.r_w - vtx) / denom)
        vtxs.append(vtx)
    return alphas, kappas, vtxs


def _vertical_loads(params: VehicleParams, ax: float, ay: float):
    """Static distribution plus algebraic longitudinal/lateral transfer.

    ``ax``/``ay`` are the specific forces (tire force sums over mass); a
    positive ay (left turn) moves load to the right-hand wheels.
    """
    lw = params.wheelbase
    m = params.m
    h = params.h_cg
    front_axle = m * (G * params.l_r - ax * h) / lw
    rear_axle = m * (G * params.l_f + ax * h) / lw
    share_f = params.l_r / lw
    share_r = params.l_f / lw
    lat = m * ay * h / params.w_b
    d_f = share_f * lat
    d_r = share_r * lat
    fz = (0.5 * front_axle - d_f, 0.5 * front_axle + d_f,
          0.5 * rear_axle - d_r, 0.5 * rear_axle + d_r)
    return tuple(max(f, 1.0) for f in fz)


def _forces_at_loads(alphas, kappas, fz, steer, params: VehicleParams, tire_model: str):
    fx = []
    fy = []
    if tire_model == "mf":
        for a, k, f in zip(alphas, kappas, fz):
            fxi = mf_longitudinal(k, params.mu, f, params.mf)
            fyi = mf_lateral(a, params.mu, f, params.mf)
            fx_c, fy_c = friction_circle(fxi, fyi, params.mu, f)
            fx.append(fx_c)
            fy.append(fy_c)
    elif tire_model == "linear":
        k_long = params.linear_slip_stiffness()
        for i, (a, k, f) in enumerate(zip(alphas, kappas, fz)):
            axle_c = params.c_f if i < 2 else params.c_r
            fyi = linear_lateral(a, 0.5 * axle_c, params.mu, f)
            fxi = linear_longitudinal(k, k_long, params.mu, f)
            fx_c, fy_c = friction_circle(fxi, fyi, params.mu, f)
            fx.append(fx_c)
            fy.append(fy_c)
    else:
        raise ValueError(f"unknown tire model {tire_model!r}")
    return fx, fy


def _body_force_sums(fx, fy, steer, params: VehicleParams, small_angle: bool):
    """Project tire-frame forces into the body frame and sum force/moment."""
    sum_x = sum_y = moment = 0.0
    fxb = []
    fyb = []
    for i, ((px, py), fxi, fyi) in enumerate(zip(params.wheel_positions(), fx, fy)):
        delta = steer if px > 0.0 else 0.0
        if small_angle:
            bx = fxi - fyi * delta
            by = fxi * delta + fyi
        else:
            cos_d = math.cos(delta)
            sin_d = math.sin(delta)
            bx = fxi * cos_d - fyi * sin_d
            by = fxi * sin_d + fyi * cos_d
        fxb.append(bx)
        fyb.append(by)
        sum_x += bx
        sum_y += by
        moment += px * by - py * bx
    return sum_x, sum_y, moment, fxb, fyb


def compute_tire_forces(state: VehicleState, steer: float, params: VehicleParams,
                        tire_model: str = "mf", load_transfer: bool = True) -> TireForces:
    """Self-consistent tire forces: one fixed-point pass on the load transfer.

    Raises DegenerateSpeedError below the forward-speed floor.
    """
    if state.vx < params.vx_floor:
        raise DegenerateSpeedError(f"vx={state.vx:.3f} below floor {params.vx_floor}")
    alphas, kappas, _ = _slips(state.vx, state.vy, state.wr, steer, state.wheel_speeds(), params)
    fz = _vertical_loads(params, 0.0, 0.0) if load_transfer else params.static_loads
    fx, fy = _forces_at_loads(alphas, kappas, fz, steer, params, tire_model)
    if load_transfer:
        sx, sy, _, _, _ = _body_force_sums(fx, fy, steer, params, small_angle=False)
        fz = _vertical_loads(params, sx / params.m, sy / params.m)
        fx, fy = _forces_at_loads(alphas, kappas, fz, steer, params, tire_model)
    return TireForces(fx=tuple(fx), fy=tuple(fy), kappa=tuple(kappas),
                      alpha=tuple(alphas), fz=fz)


def tire_forces_mf(state: VehicleState, steer: float, params: VehicleParams) -> TireForces:
    return compute_tire_forces(state, steer, params, tire_model="mf")


def tire_forces_linear(state: VehicleState, steer: float, params: VehicleParams) -> TireForces:
    return compute_tire_forces(state, steer, params, tire_model="linear")


def _plant_derivative(s: tuple, torques, steer, params: VehicleParams, tire_model: str):
    vx, vy, wr, psi, x, y, w1, w2, w3, w4 = s
    state = VehicleState(vx, vy, wr, psi, x, y, w1, w2, w3, w4)
    tf = compute_tire_forces(state, steer, params, tire_model=tire_model, load_transfer=True)
    sum_x, sum_y, moment, _, _ = _body_force_sums(tf.fx, tf.fy, steer, params, small_angle=False)
    m = params.m
    dvx = sum_x / m + vy * wr
    dvy = sum_y / m - vx * wr
    dwr = moment / params.i_z
    dpsi = wr
    dx = vx * math.cos(psi) - vy * math.sin(psi)
    dy = vx * math.sin(psi) + vy * math.cos(psi)
    iw = params.i_w
    r = params.r_w
    dw = tuple((t - r * fxi) / iw for t, fxi in zip(torques, tf.fx))
    return (dvx, dvy, dwr, dpsi, dx, dy) + dw


def _rk4(deriv, s, dt):
    k1 = deriv(s)
    k2 = deriv(tuple(si + 0.5 * dt * ki for si, ki in zip(s, k1)))
    k3 = deriv(tuple(si + 0.5 * dt * ki for si, ki in zip(s, k2)))
    k4 = deriv(tuple(si + dt * ki for si, ki in zip(s, k3)))
    return tuple(si + dt / 6.0 * (k1i + 2.0 * k2i + 2.0 * k3i + k4i)
                 for si, k1i, k2i, k3i, k4i in zip(s, k1, k2, k3, k4))


def integrate(state: VehicleState, torques, steer: float, params: VehicleParams,
              dt: float, tire_model: str = "mf") -> VehicleState:
    """Advance the truth plant one RK4 step of at most 1 ms."""
    if dt > 1e-3 + 1e-12:
        raise ValueError(f"plant step {dt} exceeds 1 ms")
    nxt = _rk4(lambda s: _plant_derivative(s, torques, steer, params, tire_model), state.as_tuple(), dt)
    if not all(math.isfinite(v) for v in nxt):
        raise NonFinitePlantError(f"plant diverged: {nxt}")
    return VehicleState.from_tuple(nxt)


# ---------------------------------------------------------------------------
# Companion small-angle models (physics estimators / controller internals)

def _companion_derivative(s: tuple, torques, steer, params: VehicleParams, tire_model: str):
    """Small-steer-angle planar equations with static loads.

    Wheel spin reaction enters the body equations through the rotational
    accelerations, matching the torque-difference formulation of the planar
    model; front drive and spin terms project into the lateral equation
    through the steer angle.
    """
    vx, vy, wr, w1, w2, w3, w4 = s
    state = VehicleState(vx, vy, wr, 0.0, 0.0, 0.0, w1, w2, w3, w4)
    tf = compute_tire_forces(state, steer, params, tire_model=tire_model, load_transfer=False)
    m = params.m
    r = params.r_w
    iw = params.i_w
    iz = params.i_z
    wb = params.w_b
    t1, t2, t3, t4 = torques
    fy1, fy2, fy3, fy4 = tf.fy
    dw = tuple((t - r * fxi) / iw for t, fxi in zip(torques, tf.fx))
    dvx = ((t1 + t2 + t3 + t4) / (m * r)
           - iw / (m * r) * (dw[0] + dw[1] + dw[2] + dw[3])
           - (fy1 + fy2) * steer / m
           + vy * wr)
    dvy = ((t1 + t2) / (m * r) - iw / (m * r) * (dw[0] + dw[1])) * steer \
        + (fy1 + fy2 + fy3 + fy4) / m - vx * wr
    dwr = (wb / (2.0 * iz * r) * (t2 + t4 - t1 - t3)
           - wb * iw / (2.0 * iz * r) * (dw[1] + dw[3] - dw[0] - dw[2])
           + (fy1 + fy2) * params.l_f / iz
           - (fy3 + fy4) * params.l_r / iz)
    return (dvx, dvy, dwr) + dw


def _rk2(deriv, s, dt):
    k1 = deriv(s)
    mid = tuple(si + 0.5 * dt * ki for si, ki in zip(s, k1))
    k2 = deriv(mid)
    return tuple(si + dt * ki for si, ki in zip(s, k2))


class CompanionModel:
    """Seven-state small-angle planar model with a chosen tire curve.

    Used open loop as a physics estimator (same inputs as the plant, no
    feedback) and as the rollout model inside the physics-based predictive
    controller.
    """

    def __init__(self, params: VehicleParams, tire_model: str):
        self.params = params
        self.tire_model = tire_model
        self.state = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    def reset(self, vx: float, vy: float = 0.0, wr: float = 0.0, wheel_speeds=None):
        if wheel_speeds is None:
            w = vx / self.params.r_w
            wheel_speeds = (w, w, w, w)
        self.state = (vx, vy, wr) + tuple(wheel_speeds)

    def advance(self, torques, steer: float, dt: float, substeps: int, method: str = "rk4"):
        h = dt / substeps
        stepper = _rk4 if method == "rk4" else _rk2
        s = self.state
        deriv = lambda st: _companion_derivative(st, torques, steer, self.params, self.tire_model)
        for _ in range(substeps):
            s = stepper(deriv, s, h)
        if not all(math.isfinite(v) for v in s):
            raise NonFinitePlantError(f"companion model diverged: {s}")
        self.state = s
        return s

    def rollout(self, state0, torques_seq, steer: float, dt: float, substeps: int):
        """Predict a horizon from an arbitrary start state (used by control)."""
        saved = self.state
        self.state = tuple(state0)
        out = []
        try:
            for torques in torques_seq:
                out.append(self.advance(torques, steer, dt, substeps, method="rk4"))
        finally:
            self.state = saved
        return out

    @property
    def body_state(self) -> tuple[float, float, float]:
        return self.state[0], self.state[1], self.state[2]


def understeer_gradient(p: VehicleParams) -> float:
    """Steady-state steer correction per unit lateral acceleration, from
    the axle cornering stiffnesses (negative sign convention)."""
    lw = p.wheelbase
    return p.m * (p.l_r * abs(p.c_r) - p.l_f * abs(p.c_f)) / (lw * abs(p.c_f) * abs(p.c_r))


def low_mu(params: VehicleParams, mu: float) -> VehicleParams:
    """Copy of the parameters with a different adhesion coefficient."""
    return replace(params, mu=mu)
