"""Kalman-filter weight adaptation for the high-order neural model.

Each of the three neurons owns an independent filter over its 15 weights.
The model output is linear in the weights, so the measurement Jacobian is
just the regressor vector and the update reduces to a rank-one covariance
correction per step.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .rhonn import N_BASIS, NonFiniteError, RhonnModel, build_basis, build_xi, step

log = logging.getLogger(__name__)


class SingularInnovationError(ArithmeticError):
    """Innovation variance R + H'PH was not positive (corrupted covariance)."""


@dataclass
class EkfConfig:
    p0: float = 10.0          # initial covariance scale (fast early adaptation)
    q: float = 1e-4           # process-noise scale (keeps weights plastic)
    r: float = 0.1            # measurement-noise variance
    zeta: float = 1.0         # learning rate on the Kalman correction
    weight_guard: float = 1e6     # |w_j| beyond this triggers a reset
    trace_guard: float = 1e9      # tr(P) beyond this triggers a reset

    def __post_init__(self):
        if self.r <= 0.0 or self.zeta <= 0.0 or self.q < 0.0 or self.p0 <= 0.0:
            raise ValueError("EKF configuration values out of range")


@dataclass
class EkfLearner:
    """Per-neuron filter state: covariance P plus noise parameters."""

    config: EkfConfig = field(default_factory=EkfConfig)
    P: np.ndarray = None
    n_resets: int = 0

    def __post_init__(self):
        if self.P is None:
            self.P = self.config.p0 * np.eye(N_BASIS)
        self.P = np.asarray(self.P, dtype=float)

    def reset(self):
        self.P = self.config.p0 * np.eye(N_BASIS)
        self.n_resets += 1


def jacobian(basis: np.ndarray) -> np.ndarray:
    """Sensitivity of the neuron output to its weights: identically the basis."""
    return np.asarray(basis, dtype=float)


def update(learner: EkfLearner, w: np.ndarray, error: float, h: np.ndarray) -> np.ndarray:
    """One filter step: gain, weight correction, covariance update.

        K = P h / (R + h' P h)
        w+ = w + zeta * K * e
        P+ = P - K h' P + Q, then symmetrized

    Returns the new weight vector; the learner's covariance is updated in
    place. Raises SingularInnovationError when the innovation variance is
    not positive, which can only happen if P has been corrupted.
    """
    cfg = learner.config
    P = learner.P
    ph = P @ h
    innov = cfg.r + float(h @ ph)
    if innov <= 0.0:
        raise SingularInnovationError(f"innovation variance {innov} <= 0")
    k = ph / innov
    w_next = w + cfg.zeta * k * error
    P_next = P - np.outer(k, ph) + cfg.q * np.eye(N_BASIS)
    learner.P = 0.5 * (P_next + P_next.T)
    return w_next


@dataclass
class ControlInput:
    """Inputs seen by the model: total torque, yaw-moment command, steer."""

    total_torque: float = 0.0
    yaw_moment: float = 0.0
    steer: float = 0.0


class RhonnIdentifier:
    """Online identification loop: assimilate a measurement, then predict.

    Runs in series-parallel form: every new prediction is issued from the
    measured plant state, so the regressor always carries real excitation
    and the weights converge from a zero start within a few samples. The
    stored prediction/regressor pair from the previous tick is what the
    filter corrects against (the regressor is exactly the Jacobian of that
    prediction).
    """

    def __init__(self, model: RhonnModel, config: EkfConfig | None = None):
        self.model = model
        cfg = config or EkfConfig()
        self.learners = [EkfLearner(config=cfg) for _ in range(3)]
        self.estimate = (0.0, 0.0, 0.0)   # prediction for the *current* tick
        self._basis_prev: np.ndarray | None = None
        self.last_errors = (0.0, 0.0, 0.0)

    def assimilate(self, measured: tuple[float, float, float]):
        """Correct the three weight vectors against the measured state."""
        if self._basis_prev is None:
            return
        h = jacobian(self._basis_prev)
        errors = tuple(float(x) - float(c) for x, c in zip(measured, self.estimate))
        weights = list(self.model.weights())
        for i, (learner, e) in enumerate(zip(self.learners, errors)):
            try:
                weights[i] = update(learner, weights[i], e, h)
            except SingularInnovationError:
                log.warning("neuron %d: singular innovation, resetting covariance", i)
                learner.reset()
        self.model.w_vx, self.model.w_vy, self.model.w_wr = weights
        self.last_errors = errors
        self._guard()

    def predict(self, measured: tuple[float, float, float], u: ControlInput) -> tuple[float, float, float]:
        """Issue the next-tick prediction from the measured state under u."""
        try:
            nxt = step(self.model, measured, u.total_torque, u.yaw_moment, u.steer)
        except NonFiniteError:
            log.warning("model step diverged, resetting all neurons")
            self._reset_all()
            nxt = step(self.model, measured, u.total_torque, u.yaw_moment, u.steer)
        vx, vy, wr = measured
        self._basis_prev = build_basis(build_xi(vx, vy, wr, u.steer, self.model))
        self.estimate = nxt
        return nxt

    def _guard(self):
        cfg = self.learners[0].config
        for i, (w, learner) in enumerate(zip(self.model.weights(), self.learners)):
            if np.max(np.abs(w)) > cfg.weight_guard or np.trace(learner.P) > cfg.trace_guard:
                log.warning("neuron %d: guard tripped (|w|max=%.3g trP=%.3g), resetting",
                            i, np.max(np.abs(w)), np.trace(learner.P))
                w[:] = 0.0
                learner.reset()

    def _reset_all(self):
        for w in self.model.weights():
            w[:] = 0.0
        for learner in self.learners:
            learner.reset()


def identify_step(
    identifier: RhonnIdentifier,
    measured: tuple[float, float, float],
    u: ControlInput,
) -> tuple[float, float, float]:
    """Single-call identification tick: correct weights, then re-predict.

    ``u`` is the command taking effect over the coming sample interval. In
    the closed loop the controller runs between the correction and the
    prediction (it wants fresh weights but also decides u); this helper
    keeps the plain sequence for identification-only runs.
    """
    identifier.assimilate(measured)
    return identifier.predict(measured, u)
