"""Recurrent high-order neural model of vehicle planar dynamics.

The model tracks three states (longitudinal velocity, lateral velocity,
yaw rate). Each state is predicted one step ahead as a weighted sum of a
15-entry polynomial basis built from sigmoid-wrapped states and steer
input, plus a fixed physics term that injects the drive-torque / yaw-moment
authority with gains computed from the vehicle geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

N_BASIS = 15

# Index subsets behind each basis entry: singles, pairs, triples, quadruple,
# in lexicographic order within each block.
BASIS_INDEX_SETS: tuple[tuple[int, ...], ...] = (
    (0,), (1,), (2,), (3,),
    (0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3),
    (0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3),
    (0, 1, 2, 3),
)


class NonFiniteError(ArithmeticError):
    """A model evaluation produced NaN or infinity."""


@dataclass(frozen=True)
class SigmoidParams:
    """Bounded squashing nonlinearity S(x) = mu * tanh(beta * x)."""

    mu: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if not (self.mu > 0.0 and self.beta > 0.0):
            raise ValueError(f"sigmoid parameters must be positive, got mu={self.mu}, beta={self.beta}")


def sigmoid(x: float, p: SigmoidParams) -> float:
    """Evaluate mu*tanh(beta*x); odd, monotone, bounded in (-mu, mu)."""
    return p.mu * math.tanh(p.beta * x)


@dataclass
class RhonnModel:
    """Three-neuron one-step vehicle model with adaptable weights.

    Weight vectors carry the units of their state (m/s or rad/s) because the
    basis entries are dimensionless. ``fixed_gain_vx`` = 1/(m*r) and
    ``fixed_gain_wr`` = w_B/(2*I_z*r) come straight from the vehicle
    parameters; ``dt_scale_fixed_terms`` multiplies those physics terms by
    the sample period so the Euler-discretized torque authority is
    consistent with the continuous dynamics (the adaptable part absorbs its
    own time scaling through learning).
    """

    w_vx: np.ndarray = field(default_factory=lambda: np.zeros(N_BASIS))
    w_vy: np.ndarray = field(default_factory=lambda: np.zeros(N_BASIS))
    w_wr: np.ndarray = field(default_factory=lambda: np.zeros(N_BASIS))
    sig_vx: SigmoidParams = field(default_factory=lambda: SigmoidParams(1.0, 0.03))
    sig_vy: SigmoidParams = field(default_factory=lambda: SigmoidParams(1.0, 0.2))
    sig_wr: SigmoidParams = field(default_factory=lambda: SigmoidParams(1.0, 2.0))
    sig_delta: SigmoidParams = field(default_factory=lambda: SigmoidParams(1.0, 0.5))
    fixed_gain_vx: float = 1.0 / (2070.0 * 0.358)
    fixed_gain_wr: float = 1.715 / (2.0 * 3658.0 * 0.358)
    dt: float = 0.05
    dt_scale_fixed_terms: bool = True

    def __post_init__(self):
        self.w_vx = np.asarray(self.w_vx, dtype=float)
        self.w_vy = np.asarray(self.w_vy, dtype=float)
        self.w_wr = np.asarray(self.w_wr, dtype=float)
        for name in ("w_vx", "w_vy", "w_wr"):
            w = getattr(self, name)
            if w.shape != (N_BASIS,):
                raise ValueError(f"{name} must have {N_BASIS} entries, got shape {w.shape}")
        if not (self.fixed_gain_vx > 0.0 and self.fixed_gain_wr > 0.0):
            raise ValueError("fixed gains must be strictly positive")

    @property
    def torque_gain(self) -> float:
        """Effective multiplier on T_t in the longitudinal update."""
        return self.fixed_gain_vx * (self.dt if self.dt_scale_fixed_terms else 1.0)

    @property
    def moment_gain(self) -> float:
        """Effective multiplier on the yaw-moment command in the yaw update."""
        return self.fixed_gain_wr * (self.dt if self.dt_scale_fixed_terms else 1.0)

    def weights(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.w_vx, self.w_vy, self.w_wr


def build_xi(vx: float, vy: float, wr: float, steer: float, model: RhonnModel) -> np.ndarray:
    """Wrap the three state estimates and the steer input, each with its own sigmoid."""
    return np.array([
        sigmoid(vx, model.sig_vx),
        sigmoid(vy, model.sig_vy),
        sigmoid(wr, model.sig_wr),
        sigmoid(steer, model.sig_delta),
    ])


def build_basis(xi) -> np.ndarray:
    """Expand a wrapped 4-vector into the 15 polynomial regressors.

    Order: the four inputs, the six pairwise products, the four triple
    products, and the full quadruple product. Products are formed
    left-to-right so the layout matches a subset-product enumeration
    exactly, including floating-point grouping.

    Accepts arrays with a trailing axis of length 4 and broadcasts, which
    the reference search relies on to score whole candidate grids at once.
    """
    xi = np.asarray(xi, dtype=float)
    x1, x2, x3, x4 = xi[..., 0], xi[..., 1], xi[..., 2], xi[..., 3]
    p12 = x1 * x2
    p13 = x1 * x3
    p14 = x1 * x4
    p23 = x2 * x3
    p24 = x2 * x4
    p34 = x3 * x4
    return np.stack([
        x1, x2, x3, x4,
        p12, p13, p14, p23, p24, p34,
        p12 * x3, p12 * x4, p13 * x4, p23 * x4,
        (p12 * x3) * x4,
    ], axis=-1)


def basis_scalar(x1: float, x2: float, x3: float, x4: float) -> tuple[float, ...]:
    """Scalar twin of build_basis; same entries, same product grouping.

    Kept separate because the controller evaluates the model thousands of
    times per tick and the array path is an order of magnitude slower for
    single points.
    """
    p12 = x1 * x2
    p13 = x1 * x3
    p14 = x1 * x4
    p23 = x2 * x3
    p24 = x2 * x4
    p34 = x3 * x4
    return (x1, x2, x3, x4,
            p12, p13, p14, p23, p24, p34,
            p12 * x3, p12 * x4, p13 * x4, p23 * x4,
            (p12 * x3) * x4)


def step(
    model: RhonnModel,
    state: tuple[float, float, float],
    total_torque: float,
    yaw_moment: float,
    steer: float,
) -> tuple[float, float, float]:
    """One-step prediction of (V_x, V_y, omega_r).

    The longitudinal and yaw channels get the fixed torque/moment terms on
    top of the learned polynomial part; the lateral channel is fully
    learned.

    Raises NonFiniteError if any output is NaN/inf so callers can reset the
    adaptation instead of silently propagating garbage.
    """
    vx, vy, wr = state
    phi = basis_scalar(
        model.sig_vx.mu * math.tanh(model.sig_vx.beta * vx),
        model.sig_vy.mu * math.tanh(model.sig_vy.beta * vy),
        model.sig_wr.mu * math.tanh(model.sig_wr.beta * wr),
        model.sig_delta.mu * math.tanh(model.sig_delta.beta * steer),
    )
    wx = model.w_vx
    wy = model.w_vy
    wz = model.w_wr
    sx = sy = sz = 0.0
    for j in range(N_BASIS):
        pj = phi[j]
        sx += wx[j] * pj
        sy += wy[j] * pj
        sz += wz[j] * pj
    vx_next = model.torque_gain * total_torque + sx
    vy_next = sy
    wr_next = model.moment_gain * yaw_moment + sz
    if not (math.isfinite(vx_next) and math.isfinite(vy_next) and math.isfinite(wr_next)):
        raise NonFiniteError(f"model step diverged: ({vx_next}, {vy_next}, {wr_next})")
    return vx_next, vy_next, wr_next
