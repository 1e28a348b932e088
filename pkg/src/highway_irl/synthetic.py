"""Synthetic tracks, scenes, and reward-recovery problems.

Used by tests and demos: hand-built kinematic tracks exercise the
simulator and ingest layers without recorded data, and the Boltzmann
generator produces demonstration sets with known reward weights so that
training quality is checkable against ground truth.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial import polynomial as npoly

from .data_ingest import Scene, VehicleTrack
from .features import COLLISION, N_FEATURES
from .irl_core import COLLISION_WEIGHT, SceneBuffer, SceneEntry, softmax
from .road import RoadModel
from .trajectory_gen import solve_lateral

M_TO_FT = 1.0 / 0.3048


def _track(vid, t0, dt, x, y, vx, vy, ax, ay, lane, length, width):
    n = len(x)
    return VehicleTrack(
        vehicle_id=vid, t0=t0, dt=dt,
        x=np.asarray(x, dtype=float), y=np.asarray(y, dtype=float),
        vx=np.asarray(vx, dtype=float), vy=np.asarray(vy, dtype=float),
        ax=np.asarray(ax, dtype=float), ay=np.asarray(ay, dtype=float),
        lane_ids=np.full(n, lane, dtype=int), length=length, width=width)


def constant_speed_track(vid: int, x0: float = 10.0, speed: float = 12.0,
                         n: int = 102, lane: int = 2, y: float | None = None,
                         road: RoadModel | None = None, length: float = 4.5,
                         width: float = 1.8, t0: float = 0.0,
                         dt: float = 0.1) -> VehicleTrack:
    """Straight lane-keeping at a fixed speed."""
    road = road or RoadModel()
    y0 = road.lane_center(lane) if y is None else y
    t = dt * np.arange(n)
    zeros = np.zeros(n)
    return _track(vid, t0, dt, x0 + speed * t, np.full(n, y0),
                  np.full(n, speed), zeros, zeros.copy(), zeros.copy(),
                  lane, length, width)


def braking_track(vid: int, x0: float = 60.0, speed: float = 12.0,
                  brake: float = 4.0, t_brake: float = 0.0, n: int = 102,
                  lane: int = 2, road: RoadModel | None = None,
                  length: float = 4.5, width: float = 1.8, t0: float = 0.0,
                  dt: float = 0.1) -> VehicleTrack:
    """Constant speed until t_brake, then steady deceleration to rest."""
    road = road or RoadModel()
    y0 = road.lane_center(lane)
    x = np.empty(n)
    v = np.empty(n)
    a = np.zeros(n)
    x[0], v[0] = x0, speed
    for k in range(n - 1):
        a[k] = -brake if k * dt >= t_brake and v[k] > 0 else 0.0
        v[k + 1] = max(0.0, v[k] + a[k] * dt)
        x[k + 1] = x[k] + max(v[k] * dt + 0.5 * a[k] * dt * dt, 0.0)
    if (n - 1) * dt >= t_brake and v[-1] > 0:
        a[-1] = -brake
    zeros = np.zeros(n)
    return _track(vid, t0, dt, x, np.full(n, y0), v, zeros, a, zeros.copy(),
                  lane, length, width)


def lane_change_track(vid: int, x0: float = 10.0, speed: float = 12.0,
                      from_lane: int = 2, to_lane: int = 3,
                      t_start: float = 1.0, duration: float = 4.0,
                      n: int = 102, road: RoadModel | None = None,
                      length: float = 4.5, width: float = 1.8,
                      t0: float = 0.0, dt: float = 0.1) -> VehicleTrack:
    """Constant longitudinal speed with one smooth lateral lane change."""
    road = road or RoadModel()
    y_a = road.lane_center(from_lane)
    y_b = road.lane_center(to_lane)
    lat = solve_lateral(y_a, 0.0, 0.0, y_b, 0.0, 0.0, duration)
    t = dt * np.arange(n)
    s = np.clip(t - t_start, 0.0, duration)
    y = npoly.polyval(s, lat)
    vy = np.where((t >= t_start) & (t <= t_start + duration),
                  npoly.polyval(s, npoly.polyder(lat)), 0.0)
    ay = np.where((t >= t_start) & (t <= t_start + duration),
                  npoly.polyval(s, npoly.polyder(lat, 2)), 0.0)
    lanes = np.where(t < t_start + 0.5 * duration, from_lane, to_lane)
    track = _track(vid, t0, dt, x0 + speed * t, y, np.full(n, speed), vy,
                   np.zeros(n), ay, from_lane, length, width)
    track.lane_ids = lanes.astype(int)
    return track


def make_scene(ego: VehicleTrack, neighbors: tuple[VehicleTrack, ...] = (),
               start: int = 0, horizon: float = 5.0) -> Scene:
    """Cut one scene out of hand-built tracks, starting at sample index
    `start` of the ego track."""
    steps = int(round(horizon / ego.dt))
    if start + steps + 1 > ego.n:
        raise ValueError("ego track too short for the requested scene")
    gt = ego.window(start, start + steps + 1)
    return Scene(scene_id=f"{ego.vehicle_id}-{start:03d}",
                 ego_id=ego.vehicle_id, start_time=gt.t0, horizon=horizon,
                 ego_init=gt.state(0), ego_ground_truth=gt,
                 neighbor_tracks={tr.vehicle_id: tr for tr in neighbors})


def write_ngsim_csv(path, tracks: dict[int, VehicleTrack]) -> None:
    """Render tracks back into the raw recorded format (feet, 10 Hz) so
    the ingest path can be exercised end to end."""
    with open(path, "w") as fh:
        fh.write("Vehicle_ID,Frame_ID,Local_X,Local_Y,v_Length,v_Width,"
                 "Lane_ID\n")
        for vid in sorted(tracks):
            tr = tracks[vid]
            frame0 = int(round(tr.t0 * 10))
            for i in range(tr.n):
                fh.write(f"{vid},{frame0 + i},"
                         f"{tr.y[i] * M_TO_FT:.4f},{tr.x[i] * M_TO_FT:.4f},"
                         f"{tr.length * M_TO_FT:.3f},"
                         f"{tr.width * M_TO_FT:.3f},{tr.lane_ids[i]}\n")


def synthetic_reward(seed: int = 0, scale: float = 2.0) -> np.ndarray:
    """Ground-truth weights for recovery experiments: learnable components
    drawn at a scale well above the trained-from-zero init, collision
    pinned to its safety value."""
    rng = np.random.default_rng(seed)
    theta = rng.normal(0.0, scale, N_FEATURES)
    theta[COLLISION] = COLLISION_WEIGHT
    return theta


def boltzmann_buffer(theta_true: np.ndarray, n_scenes: int = 30,
                     n_candidates: int = 20, seed: int = 0) -> SceneBuffer:
    """Demonstration set sampled from the exponential-family choice model
    under known weights.

    Per scene, candidate features are uniform on [0, 1] (collision forced
    to zero: demonstrations are collision free), the demonstration is one
    candidate drawn with probability proportional to exp(theta . f), and
    the ground-truth endpoint is that candidate's endpoint. Endpoints are
    uniform on a 100 m square so the displacement metric separates good
    and bad rankings.
    """
    theta_true = np.asarray(theta_true, dtype=float)
    if theta_true.shape != (N_FEATURES,):
        raise ValueError(f"expected {N_FEATURES} weights")
    rng = np.random.default_rng(seed)
    entries = []
    for s in range(n_scenes):
        feats = rng.uniform(0.0, 1.0, (n_candidates, N_FEATURES))
        feats[:, COLLISION] = 0.0
        probs = softmax(feats @ theta_true)
        j = int(rng.choice(n_candidates, p=probs))
        endpoints = rng.uniform(0.0, 100.0, (n_candidates, 2))
        entries.append(SceneEntry(
            scene_id=f"synthetic-{s:03d}",
            demo_features=feats[j].copy(),
            candidate_features=feats,
            candidate_endpoints=endpoints,
            gt_endpoint=endpoints[j].copy()))
    return SceneBuffer(entries=entries, env_mode="fixed_replay")
