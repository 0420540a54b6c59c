"""Tire force curves: empirical sine-of-arctangent model and linear model.

Both produce forces in the tire frame from slip quantities. The empirical
curve peaks at D = mu * F_z, so a single friction-circle rescale of the
combined force vector is enough to enforce the adhesion cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class MfCoeffs:
    """Shape factors for the lateral and longitudinal curves.

    The peak factor D is always mu * F_z and is supplied per call.
    """

    b_lat: float = 10.0
    c_lat: float = 1.9
    e_lat: float = 0.3
    b_long: float = 12.0
    c_long: float = 1.65
    e_long: float = 0.6


def mf_curve(slip: float, b: float, c: float, d: float, e: float) -> float:
    """D*sin(C*atan(B*s - E*(B*s - atan(B*s)))); odd in slip, slope B*C*D at 0."""
    bs = b * slip
    return d * math.sin(c * math.atan(bs - e * (bs - math.atan(bs))))


def mf_lateral(alpha: float, mu: float, fz: float, c: MfCoeffs) -> float:
    """Lateral force from the velocity slip angle; opposes the slip."""
    return -mf_curve(alpha, c.b_lat, c.c_lat, mu * fz, c.e_lat)


def mf_longitudinal(kappa: float, mu: float, fz: float, c: MfCoeffs) -> float:
    """Longitudinal force from slip ratio; positive kappa drives forward."""
    return mf_curve(kappa, c.b_long, c.c_long, mu * fz, c.e_long)


def linear_lateral(alpha: float, stiffness: float, mu: float, fz: float) -> float:
    """Per-wheel linear lateral force, saturated at the adhesion limit.

    ``stiffness`` is the (negative) per-wheel cornering stiffness, so the
    force opposes the slip angle by sign convention.
    """
    f = stiffness * alpha
    limit = mu * fz
    return max(-limit, min(limit, f))


def linear_longitudinal(kappa: float, slip_stiffness: float, mu: float, fz: float) -> float:
    f = slip_stiffness * kappa
    limit = mu * fz
    return max(-limit, min(limit, f))


def friction_circle(fx: float, fy: float, mu: float, fz: float) -> tuple[float, float]:
    """Rescale a combined force demand onto the adhesion circle if needed."""
    limit = mu * fz
    norm = math.hypot(fx, fy)
    if norm > limit and norm > 0.0:
        s = limit / norm
        return fx * s, fy * s
    return fx, fy
