"""Prediction quality evaluation and classical baselines.

Human likeness of a candidate distribution is the smallest final
displacement from the recorded endpoint among the three most probable
candidates. Per-driver (personalized) and pooled (general) reward models
are scored on held-out scenes against an IDM + MOBIL planner and a
constant-velocity extrapolation, all on identical test scenes. Aggregation
is two-level: scenes average within a vehicle, vehicles average across the
dataset, so drivers with more scenes do not dominate.
"""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, replace

import numpy as np

from .data_ingest import Scene, VehicleTrack, segment_scenes
from .env_sim import ConfigError, MOBILParams, _Agent, _front_of, \
    _idm_toward, baseline_idm, mobil_lane_gain
from .features import NormalizationConstants, apply_normalization
from .irl_core import (SceneBuffer, TrainConfig, softmax,
                       top_k_displacement, train)
from .road import RoadModel
from .sampling import (SamplerConfig, assign_splits, build_buffer,
                       completed_scene_ids, read_buffer, train_constants,
                       write_buffer)
from .trajectory_gen import CandidateTrajectory, solve_lateral

log = logging.getLogger(__name__)

BASELINES = ("idm_mobil", "constant_velocity")


class EvalError(ValueError):
    """Evaluation request or inputs are unusable."""


def human_likeness(probs: np.ndarray, endpoints: np.ndarray,
                   gt_endpoint: np.ndarray, top_k: int = 3) -> float:
    """Minimum final displacement (m) among the top_k most probable
    candidates; probability ties resolve by candidate index. Baselines
    pass their single trajectory as a one-element distribution."""
    if np.size(probs) == 0:
        raise EvalError("cannot score an empty candidate set")
    return top_k_displacement(np.asarray(probs), np.asarray(endpoints),
                              np.asarray(gt_endpoint), k=top_k)


def constant_velocity_predict(scene: Scene) -> CandidateTrajectory:
    """Hold the initial velocity vector for the whole horizon."""
    gt = scene.ego_ground_truth
    n = gt.n
    t = np.linspace(0.0, scene.horizon, n)
    x0, y0, vx0, vy0 = scene.ego_init[:4]
    zeros = np.zeros(n)
    return CandidateTrajectory(
        t=t, x=x0 + vx0 * t, y=y0 + vy0 * t,
        vx=np.full(n, vx0), vy=np.full(n, vy0),
        ax=zeros, ay=zeros.copy(), jx=zeros.copy(),
        source="constant_velocity")


def _replay_agents(scene: Scene, road: RoadModel, k: int) -> list[_Agent]:
    """Neighbors at step k replaying their logs (frozen after they end),
    excluding vehicles beyond the modeled segment."""
    out = []
    dt = scene.ego_ground_truth.dt
    for vid in sorted(scene.neighbor_tracks):
        tr = scene.neighbor_tracks[vid]
        off = int(round((tr.t0 - scene.start_time) / dt))
        i = k - off
        if i < 0:
            continue
        i = min(i, tr.n - 1)
        x = float(tr.x[i])
        if x > road.length:
            continue
        speed = float(math.hypot(tr.vx[i], tr.vy[i]))
        out.append(_Agent(vid=vid, x=x, y=float(tr.y[i]), speed=speed,
                          length=tr.length, v0=speed))
    return out


def idm_mobil_predict(scene: Scene, road: RoadModel,
                      mobil: MOBILParams = MOBILParams(),
                      idm_factory=baseline_idm) -> CandidateTrajectory:
    """Classical planner baseline: IDM longitudinal control toward the
    initial speed, with a single MOBIL lane-change decision at the start
    rendered as a quintic lateral transition over the horizon. Neighbors
    replay their recorded motion."""
    gt = scene.ego_ground_truth
    n, dt = gt.n, gt.dt
    half_width = 0.5 * road.lane_width
    x0, y0, vx0, vy0, _, ay0 = (float(v) for v in scene.ego_init[:6])
    speed0 = math.hypot(vx0, vy0)

    ego0 = _Agent(vid=-1, x=x0, y=y0, speed=speed0,
                  length=scene.ego_length, v0=speed0, is_ego=True)
    agents0 = [ego0] + _replay_agents(scene, road, 0)
    lane = road.lane_at(y0)
    best = None
    for target in (road.left_of(lane), road.right_of(lane)):
        if target is None:
            continue
        safe, gain = mobil_lane_gain(ego0, agents0, road.lane_center(target),
                                     idm_factory, mobil, half_width)
        if safe and gain > mobil.a_threshold and (best is None or gain > best[0]):
            best = (gain, target)

    if best is not None:
        lat = solve_lateral(y0, vy0, ay0, road.lane_center(best[1]), 0.0, 0.0,
                            scene.horizon)
        from numpy.polynomial import polynomial as npoly
        t = np.linspace(0.0, scene.horizon, n)
        y = npoly.polyval(t, lat)
        vy = npoly.polyval(t, npoly.polyder(lat))
        ay = npoly.polyval(t, npoly.polyder(lat, 2))
    else:
        y = np.full(n, y0)
        vy = np.zeros(n)
        ay = np.zeros(n)

    x = np.zeros(n)
    v = np.zeros(n)
    ax = np.zeros(n)
    x[0], v[0] = x0, speed0
    for k in range(n):
        me = _Agent(vid=-1, x=float(x[k]), y=float(y[k]), speed=float(v[k]),
                    length=scene.ego_length, v0=speed0, is_ego=True)
        front = _front_of(me.x, me.y, _replay_agents(scene, road, k),
                          half_width)
        ax[k] = _idm_toward(me, front, idm_factory)
        if k + 1 < n:
            x[k + 1] = x[k] + max(v[k] * dt + 0.5 * ax[k] * dt * dt, 0.0)
            v[k + 1] = max(0.0, v[k] + ax[k] * dt)

    return CandidateTrajectory(
        t=np.linspace(0.0, scene.horizon, n), x=x, y=np.asarray(y, dtype=float),
        vx=v, vy=np.asarray(vy, dtype=float), ax=ax,
        ay=np.asarray(ay, dtype=float), jx=np.gradient(ax, dt),
        source="idm_mobil")


@dataclass(frozen=True)
class EvalConfig:
    mode: str = "personalized"             # personalized | general
    env_mode: str = "reactive_replay"
    ablate_interaction: bool = False
    baselines: tuple = BASELINES
    scene_count: int = 50
    horizon: float = 5.0
    train_fraction: float = 0.7
    seed: int = 0
    vehicles: tuple | None = None          # None selects all eligible
    min_scenes: int = 2
    general_pool: int = 150
    train: TrainConfig = TrainConfig()


@dataclass(frozen=True)
class EvalRow:
    method: str
    vehicle_id: int
    scene_id: str
    split: str
    env_mode: str
    value: float


@dataclass
class EvalReport:
    rows: list[EvalRow]
    per_vehicle: dict[str, dict[int, float]]
    aggregate: dict[str, float]
    train_summary: dict[str, float]
    mode: str
    env_mode: str
    seed: int
    config_hash: str = ""
    theta: dict | None = None

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("vehicle_id,scene_id,split,method,env_mode,"
                     "human_likeness\n")
            for r in self.rows:
                fh.write(f"{r.vehicle_id},{r.scene_id},{r.split},{r.method},"
                         f"{r.env_mode},{r.value!r}\n")

    def write_json(self, path) -> None:
        doc = {
            "mode": self.mode,
            "env_mode": self.env_mode,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "train": self.train_summary,
            "test": self.aggregate,
            "per_vehicle": {m: {str(v): val for v, val in sorted(d.items())}
                            for m, d in sorted(self.per_vehicle.items())},
            "theta": self.theta,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _eligible_vehicles(tracks: dict[int, VehicleTrack], config: EvalConfig
                       ) -> list[int]:
    steps = int(round(config.horizon / 0.1))
    out = []
    for vid in sorted(tracks):
        n = tracks[vid].n
        n_fit = 0 if n < steps + 1 else (n - steps - 1) // steps + 1
        if n_fit >= config.min_scenes:
            out.append(vid)
    return out


def _score_scenes(entries, theta: np.ndarray,
                  constants: NormalizationConstants,
                  prob_sink: list | None = None) -> dict[str, float]:
    """Human likeness per scene under normalized features and weights."""
    out = {}
    for e in entries:
        feats = apply_normalization(e.candidate_features, constants)
        probs = softmax(feats @ theta)
        out[e.scene_id] = top_k_displacement(probs, e.candidate_endpoints,
                                             e.gt_endpoint)
        if prob_sink is not None:
            prob_sink.append((e.scene_id, probs))
    return out


def run_experiment(tracks: dict[int, VehicleTrack], road: RoadModel,
                   config: EvalConfig = EvalConfig(),
                   cache_dir=None, model_doc: dict | None = None,
                   config_hash: str = "", prob_dump_path=None,
                   allow_normalization_mismatch: bool = False) -> EvalReport:
    """Full pipeline over a track store: segmentation, sampling (cached
    when a cache directory is given), training per the configured mode,
    and test scoring against the requested baselines.

    Parameters
    ----------
    model_doc : dict, optional
        A loaded model file (see irl_core.load_model); skips training and
        scores test scenes under its weights and normalization constants.
        Refused when those constants disagree with the ones this run's
        training split would produce, unless allow_normalization_mismatch
        is set.

    Returns
    -------
    EvalReport
    """
    vids = list(config.vehicles) if config.vehicles else \
        _eligible_vehicles(tracks, config)
    if not vids:
        raise ConfigError("no vehicle has enough scenes for the requested "
                          "split")
    sampler = SamplerConfig(env_mode=config.env_mode, horizon=config.horizon)

    scenes: dict[int, list[Scene]] = {}
    buffers: dict[int, SceneBuffer] = {}
    splits: dict[int, dict[str, str]] = {}
    for vid in vids:
        if vid not in tracks:
            raise EvalError(f"vehicle {vid} not present in the track store")
        vscenes = segment_scenes(tracks[vid], tracks, horizon=config.horizon,
                                 count=config.scene_count)
        if len(vscenes) < config.min_scenes:
            raise ConfigError(f"vehicle {vid}: only {len(vscenes)} scenes "
                              f"fit, need {config.min_scenes} for the split")
        scenes[vid] = vscenes
        scene_ids = [s.scene_id for s in vscenes]
        vsplit = assign_splits(scene_ids, config.train_fraction,
                               [config.seed, vid])

        buffer = None
        vdir = None if cache_dir is None else \
            os.path.join(cache_dir, f"vehicle_{vid}")
        if vdir is not None and completed_scene_ids(vdir) >= set(scene_ids):
            try:
                cached, meta = read_buffer(vdir)
                if (meta.get("env_mode") == config.env_mode
                        and meta.get("scene_ids") == scene_ids):
                    buffer = cached
                    vsplit = meta.get("splits", vsplit)
            except (FileNotFoundError, ValueError):
                buffer = None
        if buffer is None:
            buffer = build_buffer(vscenes, road, sampler)
            if vdir is not None:
                write_buffer(vdir, buffer, vsplit, config.seed, config_hash,
                             vehicle_id=vid)
        buffers[vid] = buffer
        splits[vid] = vsplit

    rows: list[EvalRow] = []
    prob_sink = [] if prob_dump_path is not None else None
    train_hl: list[float] = []
    train_ll: list[float] = []
    theta_out = None

    def test_entries(vid):
        return [e for e in buffers[vid].entries
                if splits[vid][e.scene_id] == "test"]

    def train_sub_buffer(vid):
        entries = [e for e in buffers[vid].entries
                   if splits[vid][e.scene_id] == "train"]
        return SceneBuffer(entries=entries, env_mode=config.env_mode)

    tconf = replace(config.train, seed=config.seed,
                    ablate_interaction=config.ablate_interaction)

    if model_doc is not None:
        weights = model_doc["weights"]
        constants = model_doc["constants"]
        if not allow_normalization_mismatch:
            for vid in vids:
                expected = train_constants(buffers[vid], splits[vid])
                if expected.content_hash() != constants.content_hash():
                    raise EvalError(
                        f"model normalization constants (hash "
                        f"{constants.content_hash()}) do not match vehicle "
                        f"{vid}'s training split (hash "
                        f"{expected.content_hash()}); rerun training or "
                        "allow the mismatch explicitly")
        theta_out = weights.to_dict()["theta"]
        for vid in vids:
            scored = _score_scenes(test_entries(vid), weights.theta,
                                   constants, prob_sink)
            rows += [EvalRow("learned", vid, sid, "test", config.env_mode, v)
                     for sid, v in scored.items()]
    elif config.mode == "personalized":
        for vid in vids:
            sub = train_sub_buffer(vid)
            constants = train_constants(buffers[vid], splits[vid])
            weights, report = train(sub.normalized(constants), tconf)
            train_hl.append(float(report.human_likeness[-1]))
            train_ll.append(float(report.log_likelihood[-1]))
            theta_out = weights.to_dict()["theta"]
            scored = _score_scenes(test_entries(vid), weights.theta,
                                   constants, prob_sink)
            rows += [EvalRow("learned", vid, sid, "test", config.env_mode, v)
                     for sid, v in scored.items()]
    elif config.mode == "general":
        if len(vids) < 20:
            log.warning("general mode pooling only %d vehicles; results may "
                        "not transfer", len(vids))
        pool = [(vid, e) for vid in vids
                for e in buffers[vid].entries
                if splits[vid][e.scene_id] == "train"]
        if len(pool) > config.general_pool:
            rng = np.random.default_rng([config.seed, len(pool)])
            keep = sorted(rng.choice(len(pool), config.general_pool,
                                     replace=False).tolist())
            pool = [pool[i] for i in keep]
        pooled = SceneBuffer(entries=[e for _, e in pool],
                             env_mode=config.env_mode)
        constants = train_constants(
            pooled, {e.scene_id: "train" for e in pooled.entries})
        weights, report = train(pooled.normalized(constants), tconf)
        train_hl.append(float(report.human_likeness[-1]))
        train_ll.append(float(report.log_likelihood[-1]))
        theta_out = weights.to_dict()["theta"]
        for vid in vids:
            scored = _score_scenes(test_entries(vid), weights.theta,
                                   constants, prob_sink)
            rows += [EvalRow("learned", vid, sid, "test", config.env_mode, v)
                     for sid, v in scored.items()]
    else:
        raise EvalError(f"unknown evaluation mode {config.mode!r}")

    for baseline in config.baselines:
        if baseline not in BASELINES:
            raise EvalError(f"unknown baseline {baseline!r}")
        predict = (idm_mobil_predict if baseline == "idm_mobil"
                   else lambda scene, road: constant_velocity_predict(scene))
        for vid in vids:
            test_ids = {sid for sid, s in splits[vid].items() if s == "test"}
            for scene in scenes[vid]:
                if scene.scene_id not in test_ids:
                    continue
                traj = predict(scene, road)
                value = human_likeness(np.array([1.0]),
                                       traj.endpoint[None, :],
                                       scene.gt_endpoint)
                rows.append(EvalRow(baseline, vid, scene.scene_id, "test",
                                    config.env_mode, value))

    per_vehicle: dict[str, dict[int, float]] = {}
    for r in rows:
        per_vehicle.setdefault(r.method, {}).setdefault(r.vehicle_id, []) \
            .append(r.value)
    per_vehicle = {m: {vid: float(np.mean(vals)) for vid, vals in d.items()}
                   for m, d in per_vehicle.items()}
    aggregate = {m: float(np.mean(list(d.values())))
                 for m, d in per_vehicle.items()}

    train_summary = {}
    if train_hl:
        train_summary = {"human_likeness": float(np.mean(train_hl)),
                         "log_likelihood": float(np.mean(train_ll))}

    if prob_dump_path is not None:
        with open(prob_dump_path, "w") as fh:
            fh.write("scene_id,candidate_id,probability\n")
            for sid, probs in prob_sink:
                for i, p in enumerate(probs):
                    fh.write(f"{sid},{i},{float(p)!r}\n")

    return EvalReport(rows=rows, per_vehicle=per_vehicle, aggregate=aggregate,
                      train_summary=train_summary, mode=config.mode,
                      env_mode=config.env_mode, seed=config.seed,
                      config_hash=config_hash, theta=theta_out)
