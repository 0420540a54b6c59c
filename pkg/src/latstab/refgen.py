"""Steady-state lateral reference targets by expanding neighborhood search.

Each control tick, the identified model is probed for an equilibrium of its
lateral-velocity / yaw-rate map near the previous operating point: grid
points in a growing rectangular neighborhood are scored by how far the
one-step map moves them, and the first pass whose best score drops below a
threshold wins. Points scored in earlier (smaller) passes are never
re-evaluated. If the neighborhood grows to cover the whole feasible box
without meeting the threshold, the best point found so far is returned and
flagged as unconverged, which keeps the per-tick cost bounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .rhonn import RhonnModel, build_basis, sigmoid


class LowSpeedError(RuntimeError):
    """Forward-speed estimate too small to define a sideslip quotient."""


class EmptyFeasibleSetError(RuntimeError):
    """The feasibility box excludes every candidate in the search area."""


@dataclass
class SearchConfig:
    grid: tuple[float, float] = (0.05, 0.005)       # m/s, rad/s cell sizes
    r0: tuple[float, float] = (0.2, 0.02)           # initial half-widths
    dr: tuple[float, float] = (0.2, 0.02)           # growth per pass
    eps_t: float = 1e-3                             # equilibrium score threshold
    eta: float = 10.0                               # yaw-rate weight in the score
    vy_bounds: tuple[float, float] = (-4.0, 4.0)    # m/s
    wr_bounds: tuple[float, float] = (-1.0, 1.0)    # rad/s, set per tick by caller

    def __post_init__(self):
        if min(self.grid) <= 0.0 or min(self.r0) <= 0.0 or min(self.dr) <= 0.0:
            raise ValueError("grid, r0 and dr must be positive")
        if self.grid[0] >= self.r0[0] or self.grid[1] >= self.r0[1]:
            raise ValueError("grid interval must be smaller than the initial radius")


@dataclass
class ReferenceTargets:
    v_yd: float = 0.0
    w_rd: float = 0.0
    beta_d: float = 0.0
    cost: float = 0.0
    converged: bool = True
    passes: int = 0
    n_evaluated: int = 0
    radius: tuple[float, float] = (0.0, 0.0)


def rhonn_lateral_map(model: RhonnModel, vx_hat: float, steer: float):
    """Vectorized one-step map (V_y, w_r) -> (V_y', w_r') at frozen V_x/steer.

    The yaw-moment command is frozen at zero and the total torque does not
    enter the lateral/yaw channels, so only the learned parts act.
    """
    xi1 = sigmoid(vx_hat, model.sig_vx)
    xi4 = sigmoid(steer, model.sig_delta)
    mu2, b2 = model.sig_vy.mu, model.sig_vy.beta
    mu3, b3 = model.sig_wr.mu, model.sig_wr.beta
    w_vy = model.w_vy
    w_wr = model.w_wr

    def f(vy, wr):
        vy = np.asarray(vy, dtype=float)
        wr = np.asarray(wr, dtype=float)
        xi = np.stack([
            np.broadcast_to(xi1, vy.shape),
            mu2 * np.tanh(b2 * vy),
            mu3 * np.tanh(b3 * wr),
            np.broadcast_to(xi4, vy.shape),
        ], axis=-1)
        phi = build_basis(xi)
        return phi @ w_vy, phi @ w_wr

    return f


def equilibrium_cost(candidate: tuple[float, float], model: RhonnModel,
                     vx_hat: float, steer: float, eta: float = 10.0) -> float:
    """Residual of the candidate under the one-step lateral map.

    Zero exactly at a fixed point of the map.
    """
    f = rhonn_lateral_map(model, vx_hat, steer)
    vy, wr = candidate
    vy_next, wr_next = f(vy, wr)
    cost = abs(float(vy_next) - vy) + eta * abs(float(wr_next) - wr)
    if not math.isfinite(cost):
        raise ArithmeticError(f"non-finite equilibrium cost at {candidate}")
    return cost


def neighbors_search(prev: tuple[float, float], cfg: SearchConfig, lateral_map) -> ReferenceTargets:
    """Expanding-grid search for the map equilibrium nearest ``prev``.

    ``lateral_map`` is a vectorized callable (vy, wr) -> (vy', wr').
    Returns the argmin of the first pass meeting the threshold, otherwise
    the best point found once the neighborhood covers the feasible box.
    """
    cy, cw = prev
    gv, gw = cfg.grid
    vy_lo, vy_hi = cfg.vy_bounds
    wr_lo, wr_hi = cfg.wr_bounds
    # radius needed to cover the feasible box from the center
    r_cov_v = max(abs(cy - vy_lo), abs(vy_hi - cy))
    r_cov_w = max(abs(cw - wr_lo), abs(wr_hi - cw))

    best = None          # (cost, vy, wr, pass index)
    n_eval = 0
    prev_nv = prev_nw = -1
    p = 0
    rv, rw = cfg.r0
    while True:
        nv = int(math.floor(rv / gv + 1e-9))
        nw = int(math.floor(rw / gw + 1e-9))
        ii = np.arange(-nv, nv + 1)
        jj = np.arange(-nw, nw + 1)
        vv = cy + ii * gv
        ww = cw + jj * gw
        vg, wg = np.meshgrid(vv, ww, indexing="ij")
        new = np.ones(vg.shape, dtype=bool)
        if prev_nv >= 0:
            inner = (np.abs(ii)[:, None] <= prev_nv) & (np.abs(jj)[None, :] <= prev_nw)
            new &= ~inner
        feas = (vg >= vy_lo) & (vg <= vy_hi) & (wg >= wr_lo) & (wg <= wr_hi)
        mask = new & feas
        if np.any(mask):
            cand_v = vg[mask]
            cand_w = wg[mask]
            fv, fw = lateral_map(cand_v, cand_w)
            costs = np.abs(fv - cand_v) + cfg.eta * np.abs(fw - cand_w)
            n_eval += cand_v.size
            k = int(np.argmin(costs))
            pass_best = (float(costs[k]), float(cand_v[k]), float(cand_w[k]), p)
            if best is None or pass_best[0] < best[0]:
                best = pass_best
            if pass_best[0] <= cfg.eps_t:
                c, v, w, _ = pass_best
                return ReferenceTargets(v_yd=v, w_rd=w, cost=c, converged=True,
                                        passes=p + 1, n_evaluated=n_eval, radius=(rv, rw))
        covered = (rv >= r_cov_v - 1e-12) and (rw >= r_cov_w - 1e-12)
        if covered:
            if best is None:
                raise EmptyFeasibleSetError(
                    f"no feasible grid point around {prev} within bounds "
                    f"{cfg.vy_bounds} x {cfg.wr_bounds}")
            c, v, w, _ = best
            return ReferenceTargets(v_yd=v, w_rd=w, cost=c, converged=False,
                                    passes=p + 1, n_evaluated=n_eval, radius=(rv, rw))
        prev_nv, prev_nw = nv, nw
        rv = min(rv + cfg.dr[0], r_cov_v)
        rw = min(rw + cfg.dr[1], r_cov_w)
        p += 1


def desired_sideslip(v_yd: float, vx_hat: float, floor: float = 0.5) -> float:
    """Sideslip target as the quotient of the lateral and forward targets."""
    if vx_hat <= floor:
        raise LowSpeedError(f"vx estimate {vx_hat:.3f} at or below floor {floor}")
    return v_yd / vx_hat


def friction_yaw_limit(mu: float, vx: float, fraction: float = 0.85) -> float:
    """Adhesion-limited yaw-rate magnitude fraction*mu*g/V_x."""
    return fraction * mu * 9.81 / max(vx, 1.0)
