"""Polynomial candidate trajectories for short highway maneuvers.

Longitudinal motion is a quartic in time: five boundary conditions pin the
initial position, speed and acceleration and the terminal speed and
acceleration, leaving the terminal position free. Lateral motion is a
quintic with all six boundary values pinned. Candidates sweep a grid of
terminal speeds around the current speed crossed with the reachable lane
centers, which keeps every candidate smooth and kinematically consistent
by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .road import RoadModel

HORIZON = 5.0
DT = 0.1
SPEED_HALFSPAN = 5.0
SPEED_STEP = 1.0


@dataclass(frozen=True)
class TargetState:
    """Terminal boundary values for one candidate; x at the horizon is free."""

    vx: float
    y: float
    ax: float = 0.0
    vy: float = 0.0
    ay: float = 0.0


@dataclass(frozen=True)
class PolynomialPair:
    """Coefficients (ascending powers) of the longitudinal quartic and
    lateral quintic, both parameterized on t in [0, horizon]."""

    lon: np.ndarray
    lat: np.ndarray
    horizon: float

    def sample(self, dt: float = DT, source: str = "generated",
               target: TargetState | None = None) -> "CandidateTrajectory":
        """Evaluate the pair and its derivatives on the regular time grid."""
        n = int(round(self.horizon / dt)) + 1
        t = np.linspace(0.0, self.horizon, n)
        dlon = npoly.polyder(self.lon)
        ddlon = npoly.polyder(dlon)
        dddlon = npoly.polyder(ddlon)
        dlat = npoly.polyder(self.lat)
        ddlat = npoly.polyder(dlat)
        return CandidateTrajectory(
            t=t,
            x=npoly.polyval(t, self.lon),
            y=npoly.polyval(t, self.lat),
            vx=npoly.polyval(t, dlon),
            vy=npoly.polyval(t, dlat),
            ax=npoly.polyval(t, ddlon),
            ay=npoly.polyval(t, ddlat),
            jx=npoly.polyval(t, dddlon),
            source=source,
            target=target,
            poly=self,
        )


@dataclass
class CandidateTrajectory:
    """A sampled trajectory: 51 points at 0.1 s spacing for the default
    5 s horizon, with analytic velocity, acceleration and longitudinal
    jerk at every point."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    ax: np.ndarray
    ay: np.ndarray
    jx: np.ndarray
    source: str = "generated"
    target: TargetState | None = None
    poly: PolynomialPair | None = None

    @property
    def n(self) -> int:
        return len(self.t)

    @property
    def endpoint(self) -> np.ndarray:
        return np.array([self.x[-1], self.y[-1]])

    def speed(self, i: int) -> float:
        return float(np.hypot(self.vx[i], self.vy[i]))


def solve_longitudinal(x0: float, vx0: float, ax0: float,
                       vx1: float, ax1: float, horizon: float) -> np.ndarray:
    """Quartic x(t) with x, x', x'' pinned at t=0 and x', x'' at t=horizon.

    The three initial conditions fix the low-order coefficients directly;
    the two terminal conditions reduce to a 2x2 linear system in a3, a4.

    Returns
    -------
    np.ndarray
        Coefficients (a0..a4), ascending powers.
    """
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    T = float(horizon)
    a0, a1, a2 = x0, vx0, ax0 / 2.0
    lhs = np.array([[3 * T**2, 4 * T**3],
                    [6 * T, 12 * T**2]])
    rhs = np.array([vx1 - a1 - 2 * a2 * T,
                    ax1 - 2 * a2])
    a3, a4 = np.linalg.solve(lhs, rhs)
    return np.array([a0, a1, a2, a3, a4])


def solve_lateral(y0: float, vy0: float, ay0: float,
                  y1: float, vy1: float, ay1: float, horizon: float) -> np.ndarray:
    """Quintic y(t) with y, y', y'' pinned at both ends.

    Returns
    -------
    np.ndarray
        Coefficients (b0..b5), ascending powers.
    """
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    T = float(horizon)
    b0, b1, b2 = y0, vy0, ay0 / 2.0
    lhs = np.array([[T**3, T**4, T**5],
                    [3 * T**2, 4 * T**3, 5 * T**4],
                    [6 * T, 12 * T**2, 20 * T**3]])
    rhs = np.array([y1 - b0 - b1 * T - b2 * T**2,
                    vy1 - b1 - 2 * b2 * T,
                    ay1 - 2 * b2])
    b3, b4, b5 = np.linalg.solve(lhs, rhs)
    return np.array([b0, b1, b2, b3, b4, b5])


def sample_targets(ego_init: np.ndarray, road: RoadModel,
                   speed_halfspan: float = SPEED_HALFSPAN,
                   speed_step: float = SPEED_STEP) -> list[TargetState]:
    """Terminal-state grid around the current state.

    Speeds sweep [v - halfspan, v + halfspan] at the given step, clamped at
    zero with duplicates removed. Lateral targets are the current offset
    (lane keeping) plus the centers of the adjacent main lanes that exist;
    auxiliary strips are never offered.

    Parameters
    ----------
    ego_init : np.ndarray
        Initial state (x, y, vx, vy, ax, ay).
    road : RoadModel

    Returns
    -------
    list[TargetState]
        Ordered lane-keeping first, then left, then right, each block
        sorted by ascending terminal speed.
    """
    _, y, vx = float(ego_init[0]), float(ego_init[1]), float(ego_init[2])
    offsets = np.arange(-speed_halfspan, speed_halfspan + speed_step / 2, speed_step)
    speeds = np.unique(np.maximum(vx + offsets, 0.0))

    laterals = [y]
    lane = road.lane_at(y)
    left = road.left_of(lane)
    if left is not None:
        laterals.append(road.lane_center(left))
    right = road.right_of(lane)
    if right is not None:
        laterals.append(road.lane_center(right))
    seen: list[float] = []
    for lat in laterals:
        if lat not in seen:
            seen.append(lat)

    return [TargetState(vx=float(v), y=float(lat)) for lat in seen for v in speeds]


def generate_candidates(ego_init: np.ndarray, road: RoadModel,
                        horizon: float = HORIZON, dt: float = DT,
                        speed_halfspan: float = SPEED_HALFSPAN,
                        speed_step: float = SPEED_STEP) -> list[CandidateTrajectory]:
    """Solve and sample one candidate per target in the terminal grid.

    Every candidate departs from the same initial state, so the set is
    directly comparable under a reward that accumulates over the horizon.
    """
    x, y, vx, vy, ax, ay = (float(v) for v in ego_init[:6])
    out = []
    for target in sample_targets(ego_init, road, speed_halfspan, speed_step):
        pair = PolynomialPair(
            lon=solve_longitudinal(x, vx, ax, target.vx, target.ax, horizon),
            lat=solve_lateral(y, vy, ay, target.y, target.vy, target.ay, horizon),
            horizon=horizon,
        )
        out.append(pair.sample(dt, source="generated", target=target))
    return out


def dump_candidates(candidates: list[CandidateTrajectory], path) -> None:
    """Write candidates as line-delimited JSON, one record per candidate."""
    import json

    with open(path, "w") as fh:
        for i, c in enumerate(candidates):
            rec = {
                "candidate_id": i,
                "source": c.source,
                "target": None if c.target is None else {
                    "vx": c.target.vx, "y": c.target.y, "ax": c.target.ax,
                    "vy": c.target.vy, "ay": c.target.ay,
                },
                "points": [
                    {"t": round(float(c.t[k]), 6),
                     "x": float(c.x[k]), "y": float(c.y[k]),
                     "vx": float(c.vx[k]), "vy": float(c.vy[k]),
                     "ax": float(c.ax[k]), "ay": float(c.ay[k]),
                     "jx": float(c.jx[k])}
                    for k in range(c.n)
                ],
            }
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
