"""Driver model: preview path follower plus optional PI speed hold.

Steering combines curvature feedforward, pure-pursuit feedback toward a
preview point, and a slow integral term that closes the standing offset a
proportional-only follower leaves in steady cornering. The output is a
steering-wheel angle (rad); the plant receives it divided by the fixed
steering ratio. Positive angles steer left (ISO convention), so a vehicle
offset to the left of the path gets a negative (rightward) command.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .paths import Path, PathExhausted


@dataclass
class DriverConfig:
    preview_time: float = 0.6        # s
    min_lookahead: float = 3.0       # m
    steer_ratio: float = 17.2
    max_wheel_angle: float = math.radians(500.0)
    understeer_gradient: float = 0.0  # s^2/m, feedforward steer correction
    use_feedforward: bool = True
    lat_ki: float = 0.05             # wheel rad per m*s of integrated offset
    lat_int_cap: float = 2.0         # m*s
    speed_kp: float = 800.0          # N m per m/s
    speed_ki: float = 50.0
    torque_limit: float = 1600.0


class PurePursuitDriver:
    """Preview path follower.

    Curvature feedforward (with the steady understeer correction from the
    linear vehicle knowledge) carries the cornering steer; pure-pursuit
    feedback on the preview offset beyond the arc-intrinsic one corrects
    transients; a slow capped integral removes the remaining standing
    offset.
    """

    def __init__(self, path: Path, config: DriverConfig, wheelbase: float, dt: float = 0.05):
        self.path = path
        self.cfg = config
        self.wheelbase = wheelbase
        self.dt = dt
        self.cursor = 0
        self.s_now = 0.0
        self.deviation = 0.0     # unsigned, for metrics
        self.offset = 0.0        # signed, left of path positive
        self._integral = 0.0

    def steer(self, x: float, y: float, psi: float, vx: float) -> float:
        """Steering-wheel angle toward a preview point on the path.

        Raises PathExhausted when the preview point runs past the path end.
        """
        s, offset, self.cursor = self.path.project(x, y, hint=self.cursor)
        self.s_now = s
        self.offset = offset
        self.deviation = abs(offset)
        lookahead = max(vx * self.cfg.preview_time, self.cfg.min_lookahead)
        tx, ty = self.path.point_at(s + lookahead)
        dx = tx - x
        dy = ty - y
        local_y = -math.sin(psi) * dx + math.cos(psi) * dy
        ld2 = dx * dx + dy * dy
        if self.cfg.use_feedforward:
            kappa = self.path.curvature_at(s + 0.5 * lookahead)
            feedforward = math.atan((self.wheelbase + self.cfg.understeer_gradient * vx * vx) * kappa)
        else:
            kappa = 0.0
            feedforward = 0.0
        if ld2 < 1e-6:
            feedback = 0.0
        else:
            err = local_y - 0.5 * kappa * ld2  # offset beyond the arc-intrinsic one
            feedback = math.atan(self.wheelbase * 2.0 * err / ld2)
        cap = self.cfg.lat_int_cap
        self._integral = max(-cap, min(cap, self._integral - offset * self.dt))
        sw = (feedforward + feedback) * self.cfg.steer_ratio + self.cfg.lat_ki * self._integral
        return max(-self.cfg.max_wheel_angle, min(self.cfg.max_wheel_angle, sw))

    @property
    def done(self) -> bool:
        return self.s_now >= self.path.length - 1e-6


class SpeedHold:
    """PI controller on longitudinal speed producing a total drive torque."""

    def __init__(self, v_ref: float, config: DriverConfig, dt: float):
        self.v_ref = v_ref
        self.cfg = config
        self.dt = dt
        self.integral = 0.0

    def torque(self, vx: float) -> float:
        err = self.v_ref - vx
        raw = self.cfg.speed_kp * err + self.cfg.speed_ki * self.integral
        limit = self.cfg.torque_limit
        if -limit < raw < limit:
            self.integral += err * self.dt
        return max(-limit, min(limit, raw))
