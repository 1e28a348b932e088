"""Batch command-line front end.

Four subcommands cover the pipeline: `ingest` turns recorded CSVs into a
canonical track store, `sample` builds the per-vehicle candidate/feature
buffer, `train` fits reward weights on a buffer, and `eval` runs the full
train/test comparison against the classical baselines.

Options resolve as flags > JSON config file > built-in defaults, and every
report embeds the seed plus a hash of the resolved configuration so runs
are reproducible byte for byte. Exit codes: 0 success, 1 usage or
configuration error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys

import numpy as np

from .data_ingest import (DataError, ingest_tracks, parse_ngsim_csv,
                          read_track_store, segment_scenes,
                          write_track_store)
from .env_sim import MODES, ConfigError
from .evaluation import BASELINES, EvalConfig, EvalError, run_experiment
from .irl_core import (NumericError, SceneBuffer, TrainConfig, load_model,
                       save_model, train)
from .road import RoadModel
from .sampling import (BUFFER_FILE, SamplerConfig, append_scene_rows,
                       assign_splits, build_scene_entry, read_buffer,
                       read_scene_entries, train_constants, write_meta)

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

# short flag values -> method names used in reports
_BASELINE_NAMES = {"idm_mobil": "idm_mobil", "const_vel": "constant_velocity"}

_INGEST_DEFAULTS = {
    "input": None, "output": None, "unit": "feet", "report": "",
}
_SAMPLE_DEFAULTS = {
    "store": None, "output_dir": None, "vehicle": None,
    "env_mode": "reactive_replay", "horizon": 5.0, "scene_count": 50,
    "train_fraction": 0.7, "seed": 0, "speed_halfspan": 5.0,
    "speed_step": 1.0, "track_override_v0": False,
}
_TRAIN_DEFAULTS = {
    "buffer_dir": None, "output": None, "report": "", "lam": 0.01,
    "learning_rate": 0.05, "epochs": 200, "seed": 0,
    "include_demo_in_partition": False, "ablate_interaction_feature": False,
}
_EVAL_DEFAULTS = {
    "store": None, "output_dir": None, "mode": "personalized",
    "env_mode": "reactive_replay", "baseline": [], "vehicles": [],
    "scene_count": 50, "horizon": 5.0, "train_fraction": 0.7, "seed": 0,
    "min_scenes": 2, "general_pool": 150, "lam": 0.01,
    "learning_rate": 0.05, "epochs": 200, "model": "",
    "ablate_interaction_feature": False,
    "allow_normalization_mismatch": False, "dump_probabilities": False,
    "cache_buffers": True,
}


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; remap to 1 so the
    data-error code stays unambiguous."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _resolve(args, defaults: dict) -> dict:
    """Merge flag values over config-file values over defaults."""
    cfg = dict(defaults)
    path = getattr(args, "config", None)
    if path:
        with open(path) as fh:
            try:
                file_cfg = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(file_cfg, dict):
            raise ConfigError(f"{path}: expected a JSON object")
        for key, value in file_cfg.items():
            if key not in cfg:
                raise ConfigError(f"{path}: unknown config key {key!r}")
            cfg[key] = value
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _require(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if cfg[k] in (None, "")]
    if missing:
        raise ConfigError("missing required option(s): "
                          + ", ".join(f"--{k.replace('_', '-')}"
                                      for k in missing))


def _check_env_mode(cfg: dict) -> None:
    if cfg["env_mode"] not in MODES:
        raise ConfigError(f"env_mode must be one of {', '.join(MODES)}; "
                          f"got {cfg['env_mode']!r}")


def _write_json(path, doc: dict) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def cmd_ingest(args) -> int:
    cfg = _resolve(args, _INGEST_DEFAULTS)
    _require(cfg, "input", "output")
    if cfg["unit"] not in ("feet", "meters"):
        raise ConfigError(f"unit must be 'feet' or 'meters', "
                          f"got {cfg['unit']!r}")
    raw = parse_ngsim_csv(cfg["input"], unit=cfg["unit"])
    tracks, rejected = ingest_tracks(raw)
    if not tracks:
        raise DataError(f"{cfg['input']}: no track survived ingestion "
                        f"({len(rejected)} rejected)")
    write_track_store(tracks, cfg["output"])
    samples = int(sum(t.n for t in tracks.values()))
    report = {
        "config_hash": _config_hash(cfg),
        "input": str(cfg["input"]),
        "unit": cfg["unit"],
        "vehicles": len(tracks),
        "samples": samples,
        "rejected": {str(k): rejected[k] for k in sorted(rejected)},
    }
    report_path = cfg["report"] or str(cfg["output"]) + ".report.json"
    _write_json(report_path, report)
    print(f"ingested {len(tracks)} vehicles ({samples} samples), rejected "
          f"{len(rejected)}; store written to {cfg['output']}")
    return EXIT_OK


def cmd_sample(args) -> int:
    cfg = _resolve(args, _SAMPLE_DEFAULTS)
    _require(cfg, "store", "output_dir", "vehicle")
    _check_env_mode(cfg)
    chash = _config_hash(cfg)
    tracks = read_track_store(cfg["store"])
    vid = int(cfg["vehicle"])
    if vid not in tracks:
        raise DataError(f"vehicle {vid} is not in the track store "
                        f"({len(tracks)} vehicles available)")
    scenes = segment_scenes(tracks[vid], tracks, horizon=cfg["horizon"],
                            count=int(cfg["scene_count"]))
    if not scenes:
        raise DataError(f"vehicle {vid}: track too short for even one "
                        f"{cfg['horizon']} s scene")
    scene_ids = [s.scene_id for s in scenes]
    out_dir = cfg["output_dir"]
    os.makedirs(out_dir, exist_ok=True)

    try:
        _, meta = read_buffer(out_dir)
        if (meta.get("complete") and meta.get("scene_ids") == scene_ids
                and meta.get("env_mode") == cfg["env_mode"]
                and meta.get("config_hash") == chash):
            print(f"buffer for vehicle {vid} already complete "
                  f"({len(scene_ids)} scenes); nothing to do")
            return EXIT_OK
    except (FileNotFoundError, ValueError):
        pass

    road = RoadModel()
    sampler = SamplerConfig(
        env_mode=cfg["env_mode"], horizon=cfg["horizon"],
        speed_halfspan=cfg["speed_halfspan"], speed_step=cfg["speed_step"],
        track_override_v0=bool(cfg["track_override_v0"]))
    cached = read_scene_entries(out_dir)
    buffer_path = os.path.join(out_dir, BUFFER_FILE)
    if os.path.exists(buffer_path):
        os.remove(buffer_path)

    entries = []
    reused = 0
    for scene in scenes:
        entry = cached.get(scene.scene_id)
        if entry is None:
            log.info("sampling scene %s", scene.scene_id)
            entry = build_scene_entry(scene, road, sampler)
        else:
            reused += 1
        append_scene_rows(out_dir, entry)
        entries.append(entry)

    buffer = SceneBuffer(entries=entries, env_mode=cfg["env_mode"])
    splits = assign_splits(scene_ids, cfg["train_fraction"],
                           [int(cfg["seed"]), vid])
    write_meta(out_dir, buffer, splits, int(cfg["seed"]), chash,
               vehicle_id=vid)
    rows = sum(1 + e.n_candidates for e in entries)
    print(f"sampled {len(scenes)} scenes for vehicle {vid} "
          f"({reused} reused, {rows} buffer rows) under {cfg['env_mode']}; "
          f"buffer in {out_dir}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _resolve(args, _TRAIN_DEFAULTS)
    _require(cfg, "buffer_dir", "output")
    buffer, meta = read_buffer(cfg["buffer_dir"])
    splits = meta.get("splits") or {e.scene_id: "train"
                                    for e in buffer.entries}
    config = TrainConfig(
        lam=cfg["lam"], learning_rate=cfg["learning_rate"],
        epochs=int(cfg["epochs"]), seed=int(cfg["seed"]),
        include_demo_in_partition=bool(cfg["include_demo_in_partition"]),
        ablate_interaction=bool(cfg["ablate_interaction_feature"]))
    entries = [e for e in buffer.entries
               if splits.get(e.scene_id, "train") == "train"]
    if not entries:
        raise DataError(f"{cfg['buffer_dir']}: no training-split scenes")
    constants = train_constants(buffer, splits)
    sub = SceneBuffer(entries=entries, env_mode=buffer.env_mode)
    weights, report = train(sub.normalized(constants), config)
    save_model(cfg["output"], weights, constants, config,
               env_mode=buffer.env_mode, config_hash=_config_hash(cfg))
    if cfg["report"]:
        report.write_csv(cfg["report"])
    print(f"trained {config.epochs} epochs on {len(entries)} scenes; "
          f"objective {report.objective[-1]:.6f}, human likeness "
          f"{report.human_likeness[-1]:.3f} m; model written to "
          f"{cfg['output']}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _resolve(args, _EVAL_DEFAULTS)
    _require(cfg, "store", "output_dir")
    _check_env_mode(cfg)
    if cfg["mode"] not in ("personalized", "general"):
        raise ConfigError(f"mode must be 'personalized' or 'general', "
                          f"got {cfg['mode']!r}")
    for b in cfg["baseline"]:
        if b not in _BASELINE_NAMES:
            raise ConfigError(f"unknown baseline {b!r}; choose from "
                              + ", ".join(sorted(_BASELINE_NAMES)))
    baselines = tuple(dict.fromkeys(_BASELINE_NAMES[b]
                                    for b in cfg["baseline"])) or BASELINES
    try:
        vehicles = tuple(int(v) for v in cfg["vehicles"] if str(v).strip())
    except (TypeError, ValueError):
        raise ConfigError(f"vehicles must be integer ids, "
                          f"got {cfg['vehicles']!r}") from None
    chash = _config_hash(cfg)

    tracks = read_track_store(cfg["store"])
    model_doc = load_model(cfg["model"]) if cfg["model"] else None
    config = EvalConfig(
        mode=cfg["mode"], env_mode=cfg["env_mode"],
        ablate_interaction=bool(cfg["ablate_interaction_feature"]),
        baselines=baselines, scene_count=int(cfg["scene_count"]),
        horizon=cfg["horizon"], train_fraction=cfg["train_fraction"],
        seed=int(cfg["seed"]), vehicles=vehicles or None,
        min_scenes=int(cfg["min_scenes"]),
        general_pool=int(cfg["general_pool"]),
        train=TrainConfig(lam=cfg["lam"],
                          learning_rate=cfg["learning_rate"],
                          epochs=int(cfg["epochs"])))

    out_dir = cfg["output_dir"]
    os.makedirs(out_dir, exist_ok=True)
    cache_dir = os.path.join(out_dir, "buffers") if cfg["cache_buffers"] \
        else None
    prob_path = os.path.join(out_dir, "probabilities.csv") \
        if cfg["dump_probabilities"] else None

    report = run_experiment(
        tracks, RoadModel(), config, cache_dir=cache_dir,
        model_doc=model_doc, config_hash=chash, prob_dump_path=prob_path,
        allow_normalization_mismatch=bool(
            cfg["allow_normalization_mismatch"]))
    report.write_csv(os.path.join(out_dir, "eval_rows.csv"))
    report.write_json(os.path.join(out_dir, "eval_summary.json"))

    n_vehicles = len({r.vehicle_id for r in report.rows})
    print(f"evaluated {n_vehicles} vehicles ({cfg['mode']}, "
          f"{cfg['env_mode']}); mean human likeness on test scenes:")
    for method in sorted(report.aggregate):
        print(f"  {method}: {report.aggregate[method]:.3f} m")
    print(f"reports written to {out_dir}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="highway-irl",
                     description="Recover per-driver reward functions from "
                                 "recorded highway trajectories and compare "
                                 "their predictions with classical planner "
                                 "baselines.")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log per-scene progress")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("ingest", help="convert a recorded CSV into the "
                                      "canonical track store")
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--input", help="recorded trajectory CSV")
    p.add_argument("--output", help="track store CSV to write")
    p.add_argument("--unit", choices=("feet", "meters"),
                   help="source position unit (default feet)")
    p.add_argument("--report", help="ingestion report path "
                                    "(default <output>.report.json)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("sample", help="build the candidate/feature buffer "
                                      "for one vehicle")
    p.add_argument("--config")
    p.add_argument("--store", help="track store from `ingest`")
    p.add_argument("--output-dir", dest="output_dir",
                   help="buffer directory for this vehicle")
    p.add_argument("--vehicle", type=int, help="ego vehicle id")
    p.add_argument("--env-mode", dest="env_mode", choices=MODES)
    p.add_argument("--horizon", type=float)
    p.add_argument("--scene-count", dest="scene_count", type=int,
                   help="max scenes per vehicle (default 50)")
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--track-override-v0", dest="track_override_v0",
                   action="store_true", default=None,
                   help="overridden neighbors chase the ego's live speed "
                        "instead of their frozen one")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("train", help="fit reward weights on a buffer")
    p.add_argument("--config")
    p.add_argument("--buffer-dir", dest="buffer_dir",
                   help="buffer directory from `sample`")
    p.add_argument("--output", help="model JSON to write")
    p.add_argument("--report", help="per-epoch metrics CSV")
    p.add_argument("--lam", type=float, help="L2 coefficient (default 0.01)")
    p.add_argument("--learning-rate", dest="learning_rate", type=float,
                   help="Adam step size (default 0.05)")
    p.add_argument("--epochs", type=int, help="training epochs (default 200)")
    p.add_argument("--seed", type=int)
    p.add_argument("--include-demo-in-partition",
                   dest="include_demo_in_partition", action="store_true",
                   default=None,
                   help="add the demonstration itself to each scene's "
                        "candidate set")
    p.add_argument("--ablate-interaction-feature",
                   dest="ablate_interaction_feature", action="store_true",
                   default=None,
                   help="train with the interaction feature removed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="train/test comparison against the "
                                    "planner baselines")
    p.add_argument("--config")
    p.add_argument("--store", help="track store from `ingest`")
    p.add_argument("--output-dir", dest="output_dir")
    p.add_argument("--mode", choices=("personalized", "general"))
    p.add_argument("--env-mode", dest="env_mode", choices=MODES)
    p.add_argument("--baseline", action="append",
                   choices=tuple(sorted(_BASELINE_NAMES)),
                   help="repeatable; default runs both baselines")
    p.add_argument("--vehicles", type=lambda s: s.split(","), default=None,
                   help="comma-separated vehicle ids (default: all with "
                        "enough scenes)")
    p.add_argument("--scene-count", dest="scene_count", type=int)
    p.add_argument("--horizon", type=float)
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--min-scenes", dest="min_scenes", type=int)
    p.add_argument("--general-pool", dest="general_pool", type=int,
                   help="max pooled training scenes in general mode")
    p.add_argument("--lam", type=float)
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--model", help="reuse a trained model instead of "
                                   "training per vehicle")
    p.add_argument("--ablate-interaction-feature",
                   dest="ablate_interaction_feature", action="store_true",
                   default=None)
    p.add_argument("--allow-normalization-mismatch",
                   dest="allow_normalization_mismatch", action="store_true",
                   default=None,
                   help="score under a reused model even when its "
                        "normalization constants differ from this run's")
    p.add_argument("--dump-probabilities", dest="dump_probabilities",
                   action="store_true", default=None,
                   help="also write per-candidate probabilities")
    p.add_argument("--no-cache-buffers", dest="cache_buffers",
                   action="store_false", default=None,
                   help="rebuild buffers instead of caching them under the "
                        "output directory")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (NumericError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, EvalError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
