"""Per-driver reward recovery from recorded highway trajectories.

The pipeline: `data_ingest` turns recorded CSVs into smoothed tracks and
short scenes, `trajectory_gen` spans each scene with polynomial candidate
trajectories, `env_sim` rolls every candidate out against reacting
neighbors, `features` summarizes each rollout into eight reward features,
`irl_core` fits maximum-entropy reward weights to the demonstrations, and
`evaluation` scores the learned model against classical planner baselines.
`cli` wires it all into the `highway-irl` command.
"""

from .road import RoadModel
from .trajectory_gen import (CandidateTrajectory, PolynomialPair,
                             TargetState, generate_candidates,
                             sample_targets, solve_lateral,
                             solve_longitudinal)
from .data_ingest import (DataError, Scene, SchemaError, TrackTooShortError,
                          VehicleTrack, ingest_tracks, parse_ngsim_csv,
                          read_track_store, refit_demonstration,
                          segment_scenes, smooth_track, write_track_store)
from .env_sim import (MODES, Collision, ConfigError, ControllerParams,
                      IDMParams, MOBILParams, RolloutResult, VehicleState,
                      baseline_idm, collision_check, desired_gap,
                      idm_acceleration, rollout, training_idm)
from .features import (FEATURE_NAMES, NormalizationConstants,
                       apply_normalization, normalize_features,
                       step_features, trajectory_features)
from .irl_core import (COLLISION_WEIGHT, NumericError, RewardWeights,
                       SceneBuffer, SceneEntry, TrainConfig, TrainReport,
                       candidate_distribution, feature_gap, gradient,
                       load_model, objective, save_model, softmax,
                       top_k_displacement, train)
from .sampling import (SamplerConfig, assign_splits, build_buffer,
                       build_scene_entry, read_buffer, train_constants,
                       write_buffer)
from .evaluation import (BASELINES, EvalConfig, EvalError, EvalReport,
                         constant_velocity_predict, human_likeness,
                         idm_mobil_predict, run_experiment)
from . import synthetic

__version__ = "0.1.0"

__all__ = [
    "RoadModel",
    "CandidateTrajectory", "PolynomialPair", "TargetState",
    "generate_candidates", "sample_targets", "solve_lateral",
    "solve_longitudinal",
    "DataError", "Scene", "SchemaError", "TrackTooShortError",
    "VehicleTrack", "ingest_tracks", "parse_ngsim_csv", "read_track_store",
    "refit_demonstration", "segment_scenes", "smooth_track",
    "write_track_store",
    "MODES", "Collision", "ConfigError", "ControllerParams", "IDMParams",
    "MOBILParams", "RolloutResult", "VehicleState", "baseline_idm",
    "collision_check", "desired_gap", "idm_acceleration", "rollout",
    "training_idm",
    "FEATURE_NAMES", "NormalizationConstants", "apply_normalization",
    "normalize_features", "step_features", "trajectory_features",
    "COLLISION_WEIGHT", "NumericError", "RewardWeights", "SceneBuffer",
    "SceneEntry", "TrainConfig", "TrainReport", "candidate_distribution",
    "feature_gap", "gradient", "load_model", "objective", "save_model",
    "softmax", "top_k_displacement", "train",
    "SamplerConfig", "assign_splits", "build_buffer", "build_scene_entry",
    "read_buffer", "train_constants", "write_buffer",
    "BASELINES", "EvalConfig", "EvalError", "EvalReport",
    "constant_velocity_predict", "human_likeness", "idm_mobil_predict",
    "run_experiment",
    "synthetic",
]
