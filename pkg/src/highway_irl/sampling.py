"""Scene-to-buffer orchestration: candidate generation, simulation, feature
accumulation, and the on-disk buffer layout.

A buffer directory holds one vehicle's scenes as a flat CSV (one row per
trajectory: the demonstration row first, then every candidate in grid
order) plus a JSON sidecar with the split assignment, environment mode,
and the normalization constants derived from the training split.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from .data_ingest import Scene, refit_demonstration
from .env_sim import ControllerParams, MOBILParams, rollout
from .features import FEATURE_NAMES, NormalizationConstants, trajectory_features
from .irl_core import SceneBuffer, SceneEntry
from .road import RoadModel
from .trajectory_gen import generate_candidates

log = logging.getLogger(__name__)

BUFFER_SCHEMA_VERSION = 1
BUFFER_FILE = "buffer.csv"
META_FILE = "buffer_meta.json"


@dataclass(frozen=True)
class SamplerConfig:
    env_mode: str = "reactive_replay"
    horizon: float = 5.0
    dt: float = 0.1
    speed_halfspan: float = 5.0
    speed_step: float = 1.0
    track_override_v0: bool = False


def build_scene_entry(scene: Scene, road: RoadModel,
                      config: SamplerConfig = SamplerConfig(),
                      controller: ControllerParams = ControllerParams(),
                      mobil: MOBILParams = MOBILParams()) -> SceneEntry:
    """Generate, simulate, and summarize one scene.

    The demonstration is refit into the candidate family and simulated
    under the same environment mode as the candidates so its relational
    features are computed in the same world model.
    """
    demo = refit_demonstration(scene)
    demo_roll = rollout(scene, demo, road, mode=config.env_mode,
                        controller=controller, mobil=mobil,
                        track_override_v0=config.track_override_v0)
    candidates = generate_candidates(
        scene.ego_init, road, horizon=config.horizon, dt=config.dt,
        speed_halfspan=config.speed_halfspan, speed_step=config.speed_step)

    cand_features = np.zeros((len(candidates), len(FEATURE_NAMES)))
    endpoints = np.zeros((len(candidates), 2))
    for i, cand in enumerate(candidates):
        roll = rollout(scene, cand, road, mode=config.env_mode,
                       controller=controller, mobil=mobil,
                       track_override_v0=config.track_override_v0)
        cand_features[i] = trajectory_features(roll)
        endpoints[i] = roll.ego_endpoint

    return SceneEntry(
        scene_id=scene.scene_id,
        demo_features=trajectory_features(demo_roll),
        candidate_features=cand_features,
        candidate_endpoints=endpoints,
        gt_endpoint=scene.gt_endpoint,
    )


def build_buffer(scenes: list[Scene], road: RoadModel,
                 config: SamplerConfig = SamplerConfig()) -> SceneBuffer:
    """Raw (unnormalized) buffer over a list of scenes."""
    entries = [build_scene_entry(scene, road, config) for scene in scenes]
    return SceneBuffer(entries=entries, env_mode=config.env_mode)


def assign_splits(scene_ids: list[str], train_fraction: float,
                  seed) -> dict[str, str]:
    """Seeded uniform train/test assignment (at least one of each when two
    or more scenes exist)."""
    n = len(scene_ids)
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_train = int(round(train_fraction * n))
    if n >= 2:
        n_train = min(max(n_train, 1), n - 1)
    train_idx = set(order[:n_train].tolist())
    return {sid: ("train" if i in train_idx else "test")
            for i, sid in enumerate(scene_ids)}


def train_constants(buffer: SceneBuffer,
                    splits: dict[str, str]) -> NormalizationConstants:
    """Normalization constants from the training-split rows only."""
    rows = []
    for e in buffer.entries:
        if splits.get(e.scene_id, "train") == "train":
            rows.append(e.demo_features[None, :])
            rows.append(e.candidate_features)
    if not rows:
        raise ValueError("no training scenes in buffer")
    return NormalizationConstants(maxima=np.vstack(rows).max(axis=0))


def write_buffer(out_dir, buffer: SceneBuffer, splits: dict[str, str],
                 seed: int, config_hash: str = "",
                 vehicle_id: int | None = None) -> None:
    """Persist a raw buffer and its sidecar, rewriting both files whole."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, BUFFER_FILE)
    if os.path.exists(path):
        os.remove(path)
    for e in buffer.entries:
        append_scene_rows(out_dir, e)
    write_meta(out_dir, buffer, splits, seed, config_hash, vehicle_id)


def read_buffer(out_dir) -> tuple[SceneBuffer, dict]:
    """Load a persisted buffer directory back into memory."""
    meta_path = os.path.join(out_dir, META_FILE)
    with open(meta_path) as fh:
        meta = json.load(fh)
    if meta.get("schema_version") != BUFFER_SCHEMA_VERSION:
        raise ValueError(f"{meta_path}: unsupported buffer schema "
                         f"{meta.get('schema_version')}")
    if list(meta.get("feature_names", [])) != list(FEATURE_NAMES):
        raise ValueError(f"{meta_path}: feature names do not match this "
                         "library version")

    path = os.path.join(out_dir, BUFFER_FILE)
    by_scene = _read_rows(path)
    entries = []
    for sid in meta["scene_ids"]:
        entry = _entry_from_rows(sid, by_scene.get(sid))
        if entry is None:
            raise ValueError(f"{path}: scene {sid} missing or incomplete")
        entries.append(entry)
    buffer = SceneBuffer(entries=entries, env_mode=meta["env_mode"])
    return buffer, meta


def read_scene_entries(out_dir) -> dict[str, SceneEntry]:
    """Complete per-scene entries currently on disk, with or without a
    finalized sidecar (resume support). Torn or partial scenes are
    silently dropped."""
    path = os.path.join(out_dir, BUFFER_FILE)
    try:
        by_scene = _read_rows(path)
    except (FileNotFoundError, ValueError):
        return {}
    out = {}
    for sid, rec in by_scene.items():
        entry = _entry_from_rows(sid, rec)
        if entry is not None:
            out[sid] = entry
    return out


def completed_scene_ids(out_dir) -> set[str]:
    """Scene ids with a demonstration row and candidates already on disk."""
    return set(read_scene_entries(out_dir))


def _read_rows(path) -> dict[str, dict]:
    by_scene: dict[str, dict] = {}
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        expected = ["scene_id", "candidate_id", "is_demo",
                    *FEATURE_NAMES, "end_x", "end_y"]
        if header != expected:
            raise ValueError(f"{path}: unexpected buffer columns")
        for line in fh:
            parts = line.rstrip("\n").split(",")
            if len(parts) != len(expected):
                continue                        # torn final line, recompute
            sid = parts[0]
            rec = by_scene.setdefault(sid, {"demo": None, "cands": []})
            feats = np.array([float(v) for v in parts[3:3 + len(FEATURE_NAMES)]])
            end = np.array([float(parts[-2]), float(parts[-1])])
            if parts[2] == "1":
                rec["demo"] = (feats, end)
            else:
                rec["cands"].append((int(parts[1]), feats, end))
    return by_scene


def _entry_from_rows(sid: str, rec: dict | None) -> SceneEntry | None:
    if rec is None or rec["demo"] is None or len(rec["cands"]) < 2:
        return None
    cands = sorted(rec["cands"], key=lambda c: c[0])
    if [c[0] for c in cands] != list(range(len(cands))):
        return None                             # candidate rows incomplete
    return SceneEntry(
        scene_id=sid,
        demo_features=rec["demo"][0],
        candidate_features=np.array([c[1] for c in cands]),
        candidate_endpoints=np.array([c[2] for c in cands]),
        gt_endpoint=rec["demo"][1],
    )


def append_scene_rows(out_dir, entry: SceneEntry) -> None:
    """Append one scene's rows, creating the file and header on first use;
    interrupted runs resume by skipping the scene ids already present."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, BUFFER_FILE)
    fresh = not os.path.exists(path)
    with open(path, "a") as fh:
        if fresh:
            fh.write("scene_id,candidate_id,is_demo,"
                     + ",".join(FEATURE_NAMES) + ",end_x,end_y\n")
        _write_row(fh, entry.scene_id, -1, 1, entry.demo_features,
                   entry.gt_endpoint)
        for i in range(entry.n_candidates):
            _write_row(fh, entry.scene_id, i, 0, entry.candidate_features[i],
                       entry.candidate_endpoints[i])


def write_meta(out_dir, buffer: SceneBuffer, splits: dict[str, str],
               seed: int, config_hash: str = "",
               vehicle_id: int | None = None) -> None:
    """Finalize a buffer directory's sidecar (marks it complete)."""
    constants = train_constants(buffer, splits)
    meta = {
        "schema_version": BUFFER_SCHEMA_VERSION,
        "vehicle_id": vehicle_id,
        "env_mode": buffer.env_mode,
        "seed": seed,
        "config_hash": config_hash,
        "feature_names": list(FEATURE_NAMES),
        "scene_ids": [e.scene_id for e in buffer.entries],
        "splits": {sid: splits[sid] for sid in sorted(splits)},
        "normalization": constants.to_dict(),
        "normalization_hash": constants.content_hash(),
        "complete": True,
    }
    with open(os.path.join(out_dir, META_FILE), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_row(fh, scene_id, candidate_id, is_demo, features, endpoint):
    feats = ",".join(repr(float(v)) for v in features)
    fh.write(f"{scene_id},{candidate_id},{is_demo},{feats},"
             f"{float(endpoint[0])!r},{float(endpoint[1])!r}\n")
