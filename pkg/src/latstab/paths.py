"""Scenario reference paths as dense polylines with arc-length queries."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class PathExhausted(RuntimeError):
    """Lookahead or projection ran past the end of the path."""


@dataclass
class Path:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        dx = np.diff(self.x)
        dy = np.diff(self.y)
        seg = np.hypot(dx, dy)
        self.s = np.concatenate([[0.0], np.cumsum(seg)])

    @property
    def length(self) -> float:
        return float(self.s[-1])

    def curvature_at(self, s: float) -> float:
        """Signed path curvature (left positive) near arc length s."""
        if not hasattr(self, "_kappa"):
            dx = np.diff(self.x)
            dy = np.diff(self.y)
            theta = np.arctan2(dy, dx)
            dtheta = np.diff(np.unwrap(theta))
            ds = 0.5 * (np.diff(self.s)[:-1] + np.diff(self.s)[1:])
            kappa = np.concatenate([[0.0], dtheta / np.maximum(ds, 1e-9), [0.0]])
            self._kappa = kappa
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self.s, s, side="right")) - 1
        i = min(max(i, 0), len(self._kappa) - 1)
        return float(self._kappa[i])

    def point_at(self, s: float) -> tuple[float, float]:
        """Position at arc length s (linear interpolation between vertices)."""
        if s > self.length:
            raise PathExhausted(f"arc length {s:.1f} beyond path end {self.length:.1f}")
        s = max(s, 0.0)
        i = int(np.searchsorted(self.s, s, side="right")) - 1
        i = min(max(i, 0), len(self.s) - 2)
        span = self.s[i + 1] - self.s[i]
        f = 0.0 if span == 0.0 else (s - self.s[i]) / span
        return (float(self.x[i] + f * (self.x[i + 1] - self.x[i])),
                float(self.y[i] + f * (self.y[i + 1] - self.y[i])))

    def project(self, px: float, py: float, hint: int = 0, window: int = 200) -> tuple[float, float, int]:
        """Signed offset from (px, py) to the path near a cursor.

        Searches vertices in [hint, hint+window] so repeated calls walk
        forward monotonically. Returns (arc length, signed lateral offset
        with left-of-path positive, new cursor).
        """
        lo = max(hint, 0)
        hi = min(lo + window, len(self.x))
        dx = self.x[lo:hi] - px
        dy = self.y[lo:hi] - py
        d2 = dx * dx + dy * dy
        k = int(np.argmin(d2)) + lo
        best_s = float(self.s[k])
        best_d = math.sqrt(float(d2[k - lo]))
        seg = min(max(k, 0), len(self.x) - 2)
        best_t = (seg, 0.0)
        # refine against the two adjacent segments
        for i in (k - 1, k):
            if 0 <= i < len(self.x) - 1:
                ax, ay = self.x[i], self.y[i]
                bx, by = self.x[i + 1], self.y[i + 1]
                ux, uy = bx - ax, by - ay
                L2 = ux * ux + uy * uy
                if L2 == 0.0:
                    continue
                t = ((px - ax) * ux + (py - ay) * uy) / L2
                t = min(max(t, 0.0), 1.0)
                qx, qy = ax + t * ux, ay + t * uy
                d = math.hypot(px - qx, py - qy)
                if d < best_d:
                    best_d = d
                    best_s = float(self.s[i]) + t * math.sqrt(L2)
                    best_t = (i, t)
        i, _ = best_t
        ux, uy = self.x[i + 1] - self.x[i], self.y[i + 1] - self.y[i]
        qx = px - self.x[i]
        qy = py - self.y[i]
        side = 1.0 if ux * qy - uy * qx >= 0.0 else -1.0
        return best_s, side * best_d, k


def dlc_path(offset: float = 3.5,
             sections: tuple[float, float, float, float, float] = (25.0, 50.0, 20.0, 50.0, 40.0),
             spacing: float = 0.5) -> Path:
    """Double-lane-change course: swerve to an offset lane and return.

    Sections are (entry, lane-change, offset lane, return, exit) lengths in
    meters; transitions are cosine-smooth so curvature is continuous. The
    course starts and ends on the original lane center (y = 0).
    """
    entry, change, hold, back, exit_ = sections
    total = entry + change + hold + back + exit_
    xs = np.arange(0.0, total + spacing, spacing)
    ys = np.empty_like(xs)
    for i, x in enumerate(xs):
        if x < entry:
            ys[i] = 0.0
        elif x < entry + change:
            f = (x - entry) / change
            ys[i] = 0.5 * offset * (1.0 - math.cos(math.pi * f))
        elif x < entry + change + hold:
            ys[i] = offset
        elif x < entry + change + hold + back:
            f = (x - entry - change - hold) / back
            ys[i] = 0.5 * offset * (1.0 + math.cos(math.pi * f))
        else:
            ys[i] = 0.0
    return Path(xs, ys)


def slippery_curve_path(lead_in: float = 80.0, radius: float = 200.0,
                        arc_deg: float = 140.0, spiral: float = 50.0,
                        spacing: float = 0.5) -> Path:
    """Straight lead-in, clothoid transition, then a constant-radius
    left-hand arc.

    The spiral ramps curvature linearly from zero to 1/radius so the
    lateral-acceleration demand has no step at corner entry.
    """
    xs = [0.0]
    ys = [0.0]
    x = y = theta = s = 0.0
    total = lead_in + spiral + radius * math.radians(arc_deg)
    while s < total:
        if s < lead_in:
            k = 0.0
        elif s < lead_in + spiral:
            k = (s - lead_in) / spiral / radius
        else:
            k = 1.0 / radius
        x += spacing * math.cos(theta)
        y += spacing * math.sin(theta)
        theta += spacing * k
        s += spacing
        xs.append(x)
        ys.append(y)
    return Path(np.array(xs), np.array(ys))


def scenario_path(kind: str) -> Path:
    """Dispatch by scenario name ('dlc' or 'curve') with default geometry."""
    if kind == "dlc":
        return dlc_path()
    if kind == "curve":
        return slippery_curve_path()
    raise ValueError(f"unknown scenario kind {kind!r}")
