"""Maximum-entropy recovery of linear reward weights from demonstrations.

Each scene contributes one demonstrated trajectory and a set of generated
candidates sharing its initial state. Trajectories are distributed
Boltzmann in their accumulated feature reward, with the partition function
approximated by the candidate set. The resulting log-likelihood is concave
in the weights and is maximized full-batch with Adam under L2
regularization. The collision component never trains: it stays pinned at
-10 so that colliding candidates are strongly down-weighted from the first
epoch regardless of how rarely humans demonstrate collisions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import logsumexp

from .features import (COLLISION, FEATURE_NAMES, INTERACTION, N_FEATURES,
                       NormalizationConstants, apply_normalization,
                       normalize_features)

COLLISION_WEIGHT = -10.0
MODEL_SCHEMA_VERSION = 1


class NumericError(RuntimeError):
    """Training produced a non-finite objective or gradient."""


@dataclass
class SceneEntry:
    """Feature summary of one scene: the demonstration row, the candidate
    matrix, and the endpoint geometry needed to score predictions."""

    scene_id: str
    demo_features: np.ndarray          # (8,)
    candidate_features: np.ndarray     # (M, 8)
    candidate_endpoints: np.ndarray    # (M, 2)
    gt_endpoint: np.ndarray            # (2,)

    @property
    def n_candidates(self) -> int:
        return len(self.candidate_features)


@dataclass
class SceneBuffer:
    """An ordered collection of scene entries plus the scaling applied to
    them (None while the features are still raw)."""

    entries: list[SceneEntry]
    env_mode: str = "reactive_replay"
    normalization: NormalizationConstants | None = None

    def __post_init__(self):
        for e in self.entries:
            if e.n_candidates < 2:
                raise ValueError(f"scene {e.scene_id}: needs at least two "
                                 f"candidates, got {e.n_candidates}")

    def __len__(self) -> int:
        return len(self.entries)

    def feature_matrix(self) -> np.ndarray:
        """All rows, demonstrations first within each scene."""
        rows = []
        for e in self.entries:
            rows.append(e.demo_features[None, :])
            rows.append(e.candidate_features)
        return np.vstack(rows)

    def normalized(self, constants: NormalizationConstants | None = None
                   ) -> "SceneBuffer":
        """Scaled copy. Without explicit constants they are computed from
        this buffer's own rows and recorded on the result."""
        if constants is None:
            _, constants = normalize_features(self.feature_matrix())
        entries = [replace(
            e,
            demo_features=apply_normalization(e.demo_features, constants),
            candidate_features=apply_normalization(e.candidate_features, constants),
        ) for e in self.entries]
        return SceneBuffer(entries=entries, env_mode=self.env_mode,
                           normalization=constants)

    def ablate_feature(self, index: int) -> "SceneBuffer":
        """Copy with one feature column zeroed everywhere (dropping it from
        the reward without renumbering the remaining components)."""
        entries = []
        for e in self.entries:
            demo = e.demo_features.copy()
            cand = e.candidate_features.copy()
            demo[index] = 0.0
            cand[:, index] = 0.0
            entries.append(replace(e, demo_features=demo, candidate_features=cand))
        return SceneBuffer(entries=entries, env_mode=self.env_mode,
                           normalization=self.normalization)


def softmax(scores: np.ndarray) -> np.ndarray:
    """Numerically stable softmax; invariant to constant shifts."""
    z = np.asarray(scores, dtype=float)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def candidate_distribution(theta: np.ndarray, entry: SceneEntry) -> np.ndarray:
    """Boltzmann probabilities of the entry's candidates under weights theta."""
    return softmax(entry.candidate_features @ theta)


def objective(theta: np.ndarray, buffer: SceneBuffer, lam: float = 0.01,
              include_demo: bool = False,
              frozen: np.ndarray | None = None) -> float:
    """Regularized log-likelihood of the demonstrations.

    Sum over scenes of (demo reward - log partition over candidates),
    minus lam * ||theta||^2 taken over the learnable components.
    """
    if frozen is None:
        frozen = _default_frozen()
    total = 0.0
    for e in buffer.entries:
        rewards = e.candidate_features @ theta
        if include_demo:
            rewards = np.append(rewards, e.demo_features @ theta)
        total += float(e.demo_features @ theta) - float(logsumexp(rewards))
    learnable = theta[~frozen]
    return total - lam * float(learnable @ learnable)


def gradient(theta: np.ndarray, buffer: SceneBuffer, lam: float = 0.01,
             include_demo: bool = False,
             frozen: np.ndarray | None = None) -> np.ndarray:
    """Exact gradient of `objective`: per scene, demonstration features
    minus the probability-weighted candidate features, minus 2*lam*theta;
    frozen components are forced to zero. Pass an all-false mask to obtain
    the unconstrained gradient (finite-difference checks use this)."""
    if frozen is None:
        frozen = _default_frozen()
    g = np.zeros_like(np.asarray(theta, dtype=float))
    for e in buffer.entries:
        feats = e.candidate_features
        if include_demo:
            feats = np.vstack([feats, e.demo_features])
        probs = softmax(feats @ theta)
        g += e.demo_features - probs @ feats
    g -= 2.0 * lam * np.where(frozen, 0.0, theta)
    g[frozen] = 0.0
    return g


def feature_gap(theta: np.ndarray, buffer: SceneBuffer,
                include_demo: bool = False) -> np.ndarray:
    """Mean over scenes of (demonstrated - expected) feature vectors."""
    gap = np.zeros(N_FEATURES)
    for e in buffer.entries:
        feats = e.candidate_features
        if include_demo:
            feats = np.vstack([feats, e.demo_features])
        probs = softmax(feats @ theta)
        gap += e.demo_features - probs @ feats
    return gap / max(len(buffer), 1)


def top_k_displacement(probs: np.ndarray, endpoints: np.ndarray,
                       gt_endpoint: np.ndarray, k: int = 3) -> float:
    """Minimum final displacement among the k most probable candidates.

    Ties in probability resolve by candidate index (stable ordering), so
    the value is deterministic for any input.
    """
    probs = np.asarray(probs, dtype=float)
    if probs.size == 0:
        raise ValueError("empty candidate set")
    order = np.argsort(-probs, kind="stable")[:k]
    dists = np.linalg.norm(endpoints[order] - gt_endpoint, axis=1)
    return float(dists.min())


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 0.01
    learning_rate: float = 0.05
    epochs: int = 200
    seed: int = 0
    init_scale: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    include_demo_in_partition: bool = False
    ablate_interaction: bool = False

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam, "learning_rate": self.learning_rate,
            "epochs": self.epochs, "seed": self.seed,
            "init_scale": self.init_scale, "beta1": self.beta1,
            "beta2": self.beta2, "eps": self.eps,
            "include_demo_in_partition": self.include_demo_in_partition,
            "ablate_interaction": self.ablate_interaction,
        }


@dataclass
class RewardWeights:
    """Learned weight vector plus the mask of components that never train."""

    theta: np.ndarray
    frozen: np.ndarray
    feature_names: tuple = FEATURE_NAMES

    def reward(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features) @ self.theta

    def to_dict(self) -> dict:
        return {
            "theta": {n: float(v) for n, v in zip(self.feature_names, self.theta)},
            "frozen": {n: bool(v) for n, v in zip(self.feature_names, self.frozen)},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RewardWeights":
        # serialized dicts may have re-sorted keys; the explicit name list
        # (when present) restores the component order
        names = tuple(d.get("feature_names") or d["theta"])
        return cls(theta=np.array([d["theta"][n] for n in names]),
                   frozen=np.array([d["frozen"][n] for n in names], dtype=bool),
                   feature_names=names)


@dataclass
class TrainReport:
    """Per-epoch training metrics; row 0 is the pre-training state of the
    freshly initialized weights, rows 1..E follow each update."""

    epochs: np.ndarray
    objective: np.ndarray
    log_likelihood: np.ndarray
    feature_gap_norm: np.ndarray
    human_likeness: np.ndarray
    theta_init: np.ndarray = field(default_factory=lambda: np.zeros(N_FEATURES))
    theta_final: np.ndarray = field(default_factory=lambda: np.zeros(N_FEATURES))
    config: TrainConfig = field(default_factory=TrainConfig)

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("epoch,objective,log_likelihood,feature_gap_norm,"
                     "human_likeness\n")
            for i in range(len(self.epochs)):
                fh.write(f"{int(self.epochs[i])},{float(self.objective[i])!r},"
                         f"{float(self.log_likelihood[i])!r},"
                         f"{float(self.feature_gap_norm[i])!r},"
                         f"{float(self.human_likeness[i])!r}\n")


def _default_frozen() -> np.ndarray:
    frozen = np.zeros(N_FEATURES, dtype=bool)
    frozen[COLLISION] = True
    return frozen


def _metrics(theta, buffer, config, frozen):
    n = max(len(buffer), 1)
    j = objective(theta, buffer, config.lam,
                  config.include_demo_in_partition, frozen)
    ll = (j + config.lam * float(theta[~frozen] @ theta[~frozen])) / n
    gap = np.linalg.norm(feature_gap(theta, buffer,
                                     config.include_demo_in_partition))
    hl = float(np.mean([
        top_k_displacement(candidate_distribution(theta, e),
                           e.candidate_endpoints, e.gt_endpoint)
        for e in buffer.entries
    ]))
    return j, ll, gap, hl


def train(buffer: SceneBuffer, config: TrainConfig = TrainConfig()
          ) -> tuple[RewardWeights, TrainReport]:
    """Full-batch Adam ascent on the regularized log-likelihood.

    Weights initialize from N(0, init_scale) under the configured seed;
    the collision weight is pinned at -10 throughout (and the interaction
    weight at 0 when ablated). Raises NumericError if the objective stops
    being finite.

    Returns
    -------
    (RewardWeights, TrainReport)
        The report holds epochs 0..E of objective, mean per-scene
        log-likelihood, feature-gap norm, and training human likeness.
    """
    rng = np.random.default_rng(config.seed)
    theta = rng.normal(0.0, config.init_scale, N_FEATURES)
    theta[COLLISION] = COLLISION_WEIGHT
    frozen = _default_frozen()
    if config.ablate_interaction:
        buffer = buffer.ablate_feature(INTERACTION)
        theta[INTERACTION] = 0.0
        frozen[INTERACTION] = True
    theta_init = theta.copy()

    m = np.zeros(N_FEATURES)
    v = np.zeros(N_FEATURES)
    rows = np.zeros((config.epochs + 1, 4))
    rows[0] = _metrics(theta, buffer, config, frozen)
    if not np.isfinite(rows[0][0]):
        raise NumericError("objective not finite at initialization")

    for epoch in range(1, config.epochs + 1):
        g = gradient(theta, buffer, config.lam,
                     config.include_demo_in_partition, frozen)
        m = config.beta1 * m + (1.0 - config.beta1) * g
        v = config.beta2 * v + (1.0 - config.beta2) * g * g
        m_hat = m / (1.0 - config.beta1 ** epoch)
        v_hat = v / (1.0 - config.beta2 ** epoch)
        theta = theta + config.learning_rate * m_hat / (np.sqrt(v_hat) + config.eps)
        theta[COLLISION] = COLLISION_WEIGHT
        if config.ablate_interaction:
            theta[INTERACTION] = 0.0
        rows[epoch] = _metrics(theta, buffer, config, frozen)
        if not np.isfinite(rows[epoch][0]):
            raise NumericError(f"objective not finite at epoch {epoch}")

    report = TrainReport(
        epochs=np.arange(config.epochs + 1),
        objective=rows[:, 0], log_likelihood=rows[:, 1],
        feature_gap_norm=rows[:, 2], human_likeness=rows[:, 3],
        theta_init=theta_init, theta_final=theta.copy(), config=config)
    return RewardWeights(theta=theta, frozen=frozen), report


def save_model(path, weights: RewardWeights,
               constants: NormalizationConstants, config: TrainConfig,
               env_mode: str, config_hash: str = "") -> None:
    """Write the model file: schema version, named weights and frozen mask,
    normalization constants, hyperparameters, and seed."""
    doc = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "feature_names": list(weights.feature_names),
        **weights.to_dict(),
        "normalization": constants.to_dict(),
        "normalization_hash": constants.content_hash(),
        "hyperparameters": config.to_dict(),
        "seed": config.seed,
        "env_mode": env_mode,
        "config_hash": config_hash,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> dict:
    """Read a model file back; raises ValueError on schema mismatch."""
    with open(path) as fh:
        doc = json.load(fh)
    version = doc.get("schema_version")
    if version != MODEL_SCHEMA_VERSION:
        raise ValueError(f"{path}: model schema version {version} is not "
                         f"supported (expected {MODEL_SCHEMA_VERSION})")
    doc["weights"] = RewardWeights.from_dict(doc)
    doc["constants"] = NormalizationConstants.from_dict(doc["normalization"])
    return doc
