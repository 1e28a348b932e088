"""Reward features accumulated over a simulated trajectory.

Eight per-step components: travel speed, absolute longitudinal and lateral
acceleration, absolute longitudinal jerk, exponential proximity risk to
the nearest same-lane leader and follower, a latched collision indicator,
and the summed deceleration the ego imposes on reacting traffic. Speed,
acceleration and jerk read from the candidate's analytic polynomial (the
demonstration uses its refit polynomial), while the relational components
read from the simulated world. Per-trajectory features are the sums over
all steps; buffers are normalized to [0, 1] by their per-component maxima.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from .env_sim import MIN_SPEED, RolloutResult

FEATURE_NAMES = ("speed", "accel_lon", "accel_lat", "jerk_lon",
                 "risk_front", "risk_rear", "collision", "interaction")
N_FEATURES = len(FEATURE_NAMES)
SPEED = FEATURE_NAMES.index("speed")
COLLISION = FEATURE_NAMES.index("collision")
INTERACTION = FEATURE_NAMES.index("interaction")


@dataclass(frozen=True)
class NormalizationConstants:
    """Per-component maxima of the buffer that defined the scaling."""

    maxima: np.ndarray

    @property
    def divisors(self) -> np.ndarray:
        """Maxima with zero entries replaced by 1 so empty components pass
        through unchanged."""
        return np.where(self.maxima > 0.0, self.maxima, 1.0)

    def to_dict(self) -> dict:
        return {name: float(v) for name, v in zip(FEATURE_NAMES, self.maxima)}

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationConstants":
        return cls(maxima=np.array([float(d[name]) for name in FEATURE_NAMES]))

    def content_hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def step_features(rollout: RolloutResult, step: int) -> np.ndarray:
    """The eight feature components at one simulation step.

    Returns
    -------
    np.ndarray
        Shape (8,), all components non-negative.
    """
    c = rollout.candidate
    f = np.zeros(N_FEATURES)
    f[0] = math.hypot(c.vx[step], c.vy[step])
    f[1] = abs(c.ax[step])
    f[2] = abs(c.ay[step])
    f[3] = abs(c.jx[step])

    ego = rollout.ego_states[step]
    half_width = 0.5 * rollout.road.lane_width
    front_x = rear_x = None
    rear_speed = 0.0
    for vid, states in rollout.neighbor_states.items():
        if not rollout.presence[vid][step]:
            continue
        st = states[step]
        if st.x > rollout.road.length:       # left the modeled segment
            continue
        if abs(st.y - ego.y) > half_width:
            continue
        if st.x > ego.x and (front_x is None or st.x < front_x):
            front_x = st.x
        elif st.x < ego.x and (rear_x is None or st.x > rear_x):
            rear_x = st.x
            rear_speed = st.speed
    if front_x is not None:
        f[4] = math.exp(-(front_x - ego.x) / max(ego.speed, MIN_SPEED))
    if rear_x is not None:
        f[5] = math.exp(-(ego.x - rear_x) / max(rear_speed, MIN_SPEED))

    if rollout.collision.happened and step >= rollout.collision.step:
        f[6] = 1.0

    f[7] = sum(abs(a) for a in rollout.influenced_decels[step].values() if a < 0.0)
    return f


def trajectory_features(rollout: RolloutResult) -> np.ndarray:
    """Componentwise sum of the step features over the whole horizon."""
    total = np.zeros(N_FEATURES)
    for k in range(rollout.n_steps):
        total += step_features(rollout, k)
    return total


def normalize_features(matrix: np.ndarray) -> tuple[np.ndarray, NormalizationConstants]:
    """Scale a (rows, 8) buffer of raw feature vectors to [0, 1].

    The divisor per component is its maximum over all rows (demonstrations
    and generated candidates together); all-zero components keep divisor 1.
    """
    matrix = np.asarray(matrix, dtype=float)
    constants = NormalizationConstants(maxima=matrix.max(axis=0))
    return matrix / constants.divisors, constants


def apply_normalization(matrix: np.ndarray,
                        constants: NormalizationConstants) -> np.ndarray:
    """Scale rows by previously computed constants (values may exceed 1 for
    rows outside the buffer that defined the constants)."""
    return np.asarray(matrix, dtype=float) / constants.divisors
