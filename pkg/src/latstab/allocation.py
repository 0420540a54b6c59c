"""Wheel-torque allocation for an in-wheel-motor vehicle.

The controller works with two aggregates: the total driving torque T_t and
the left/right torque difference dM used as the yaw-control variable.
Expansion to four wheels uses an equal front/rear split, which satisfies

    T_1 + T_2 + T_3 + T_4 = T_t
    (T_2 + T_4) - (T_1 + T_3) = dM

exactly (wheel order: front-left, front-right, rear-left, rear-right).
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class TorqueVector:
    t1: float
    t2: float
    t3: float
    t4: float
    saturated: bool = False

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.t1, self.t2, self.t3, self.t4)

    @property
    def total(self) -> float:
        return self.t1 + self.t2 + self.t3 + self.t4

    @property
    def left_right_difference(self) -> float:
        return (self.t2 + self.t4) - (self.t1 + self.t3)


def allocate(total_torque: float, yaw_moment: float, cap: float) -> TorqueVector:
    """Split (T_t, dM) into per-wheel torques under a per-motor cap.

    Left wheels each get (T_t - dM)/4, right wheels (T_t + dM)/4. If a wheel
    would exceed the cap, dM is scaled down to the largest feasible
    magnitude while T_t is preserved exactly (longitudinal demand has
    priority) and the result is flagged.
    """
    if abs(total_torque) > 4.0 * cap + 1e-9:
        raise ValueError(f"total torque {total_torque} exceeds 4x motor cap {cap}")
    dm_limit = 4.0 * cap - abs(total_torque)
    saturated = abs(yaw_moment) > dm_limit
    if saturated:
        yaw_moment = dm_limit if yaw_moment > 0.0 else -dm_limit
    left = 0.25 * (total_torque - yaw_moment)
    right = 0.25 * (total_torque + yaw_moment)
    return TorqueVector(left, right, left, right, saturated=saturated)
