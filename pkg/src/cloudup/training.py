"""Query generation, L1 field loss, curriculum scheduling, and training.

Training teaches the distance network to reproduce the exact
nearest-point distance from random queries to the dense ground-truth
cloud, using only the sparse cloud as input. Samples are bucketed into
easy and hard by their mean curvature score; easy samples fill the first
half of the epochs and hard samples the second half.
"""

import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .curvature import (
    SamplingLadder,
    curvature_sample,
    curvature_skewness,
    curvature_values,
    estimate_normals,
    global_curvature,
)
from .errors import (
    CheckpointVersionError,
    CorruptCheckpointError,
    NonFiniteLossError,
    OutOfRangeError,
)
from .geometry import NeighborIndex, random_rotation
from .model import (
    DistanceNet,
    Gradients,
    Layer,
    init_model,
    parameter_arrays,
    parameter_gradients,
)
from .validation import check_count, check_points, check_rng

CHECKPOINT_FORMAT_VERSION = 1

EASY = "easy"
HARD = "hard"


@dataclass
class TrainConfig:
    """Hyperparameters for dataset handling, the model, and optimization."""

    epochs: int = 100
    difficulty_threshold: float = 0.5
    learning_rate: float = 0.001
    batch_size: int = 256
    queries_per_patch: int = 256
    query_sigma: float = 0.05
    # Per-batch queries are split evenly across these multiples of
    # query_sigma. The broad component keeps targets large enough that the
    # softplus output head never saturates toward zero early in training.
    query_sigma_scales: tuple = (1.0, 4.0)
    seed: int = 0
    feature_dim: int = 32
    hidden: int = 64
    sampling_steps: int = 4
    curvature_k: int = 16
    normals_k: int = 16
    # Projection defaults carried along for downstream evaluation.
    step_size: float = 0.02
    iterations: int = 10
    seed_sigma: float = 0.02

    def __post_init__(self):
        self.query_sigma_scales = tuple(float(s) for s in self.query_sigma_scales)

    def validate(self):
        if not self.query_sigma_scales or any(s <= 0 for s in self.query_sigma_scales):
            raise ValueError("query_sigma_scales must be positive and non-empty")
        for name in ("epochs", "batch_size", "queries_per_patch", "feature_dim", "hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 <= self.difficulty_threshold <= 1.0:
            raise OutOfRangeError(
                f"difficulty_threshold must be in [0, 1], got {self.difficulty_threshold}"
            )
        if self.learning_rate <= 0 or self.step_size <= 0:
            raise ValueError("learning_rate and step_size must be positive")
        if self.query_sigma < 0 or self.seed_sigma < 0:
            raise ValueError("query_sigma and seed_sigma must be nonnegative")
        if self.sampling_steps < 0 or self.iterations < 0:
            raise ValueError("sampling_steps and iterations must be nonnegative")
        if self.curvature_k < 1 or self.normals_k < 3:
            raise ValueError("curvature_k must be >= 1 and normals_k >= 3")
        return self


@dataclass
class TrainSample:
    """A patch prepared for training: ladder, GT index, and difficulty."""

    patch: object                 # PatchPair
    ladder: SamplingLadder
    gt_index: NeighborIndex
    curvature: np.ndarray
    global_curvature: float
    skewness: float               # distribution diagnostic, not used for bucketing
    difficulty: str               # "easy" or "hard"


def classify_difficulty(gcv, threshold=0.5):
    """Bucket a sample by its mean curvature score.

    Returns "hard" when ``gcv >= threshold`` (boundary inclusive),
    otherwise "easy".
    """
    if not 0.0 <= gcv <= 1.0:
        raise OutOfRangeError(f"global curvature must be in [0, 1], got {gcv}")
    if not 0.0 <= threshold <= 1.0:
        raise OutOfRangeError(f"threshold must be in [0, 1], got {threshold}")
    return HARD if gcv >= threshold else EASY


def build_sample(patch, config):
    """Precompute everything ``train`` needs for one patch."""
    sparse = check_points(patch.sparse, "sparse")
    dense = check_points(patch.dense, "dense")
    normals = estimate_normals(sparse, config.normals_k)
    values = curvature_values(sparse, normals, config.curvature_k)
    gcv = global_curvature(values)
    return TrainSample(
        patch=patch,
        ladder=curvature_sample(sparse, values, config.sampling_steps),
        gt_index=NeighborIndex(dense),
        curvature=values,
        global_curvature=gcv,
        skewness=curvature_skewness(values),
        difficulty=classify_difficulty(gcv, config.difficulty_threshold),
    )


def generate_queries(sparse, gt_index, count, sigma, rng):
    """Draw queries around the sparse cloud with exact distance targets.

    Each query is a uniformly chosen sparse point plus isotropic Gaussian
    noise of scale ``sigma``; its target is the exact nearest-point
    distance to the ground-truth cloud behind ``gt_index``.

    Returns:
        (queries (count, 3), targets (count,)).
    """
    sparse = check_points(sparse, "sparse")
    count = check_count(count, "count", minimum=1)
    if sigma < 0:
        raise ValueError(f"sigma must be nonnegative, got {sigma}")
    rng = check_rng(rng)
    anchors = sparse[rng.integers(0, sparse.shape[0], size=count)]
    queries = anchors + rng.normal(0.0, sigma, size=(count, 3))
    return queries, gt_index.nearest_distances(queries)


def curriculum_schedule(samples, epochs, rng):
    """Per-epoch sample indices: easy first, hard in the second half.

    Epochs 1..ceil(E/2) draw only from the easy bucket and the rest only
    from the hard bucket; an empty bucket falls back to all samples so the
    schedule stays total. Within-epoch order is shuffled deterministically.

    Returns:
        (schedule, phases): a list of index arrays and the per-epoch phase
        labels ("easy"/"hard").
    """
    epochs = check_count(epochs, "epochs", minimum=1)
    rng = check_rng(rng)
    everyone = np.arange(len(samples))
    easy = np.array([i for i, s in enumerate(samples) if s.difficulty == EASY], dtype=np.intp)
    hard = np.array([i for i, s in enumerate(samples) if s.difficulty == HARD], dtype=np.intp)
    first_phase = math.ceil(epochs / 2)
    schedule, phases = [], []
    for epoch in range(epochs):
        phase = EASY if epoch < first_phase else HARD
        bucket = easy if phase == EASY else hard
        order = (bucket if bucket.size else everyone).copy()
        rng.shuffle(order)
        schedule.append(order)
        phases.append(phase)
    return schedule, phases


class Adam:
    """Adam optimizer over a fixed list of parameter arrays (in-place)."""

    def __init__(self, params, learning_rate, beta1=0.9, beta2=0.999, eps=1e-8):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.first = [np.zeros_like(p) for p in params]
        self.second = [np.zeros_like(p) for p in params]

    def step(self, params, grads):
        self.step_count += 1
        t = self.step_count
        scale1 = 1.0 - self.beta1**t
        scale2 = 1.0 - self.beta2**t
        for p, g, m, v in zip(params, grads, self.first, self.second):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / scale1) / (np.sqrt(v / scale2) + self.eps)


def _accumulate(total, extra):
    if total is None:
        return extra
    return Gradients(
        encoder=[(tw + ew, tb + eb) for (tw, tb), (ew, eb) in zip(total.encoder, extra.encoder)],
        estimator=[
            (tw + ew, tb + eb) for (tw, tb), (ew, eb) in zip(total.estimator, extra.estimator)
        ],
    )


def train_step(model, batch, learning_rate=0.001, optimizer=None):
    """One optimization step on a batch of (sample, queries, targets).

    The loss is the mean absolute difference between predicted and target
    distances over every query in the batch (subgradient 0 at exact
    zeros). Parameters are updated in place by Adam.

    Returns:
        (model, mean_l1_loss).
    """
    if not batch:
        raise ValueError("batch must be non-empty")
    if optimizer is None:
        optimizer = Adam(parameter_arrays(model), learning_rate)
    total_queries = sum(np.atleast_2d(q).shape[0] for _, q, _ in batch)
    total_grads = None
    loss_sum = 0.0
    for sample, queries, targets in batch:
        queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
        targets = np.asarray(targets, dtype=np.float64).reshape(-1)

        def l1_grads(preds, targets=targets):
            return np.sign(preds - targets) / total_queries

        preds, grads = parameter_gradients(model, queries, sample.ladder, l1_grads)
        loss_sum += np.abs(preds - targets).sum()
        total_grads = _accumulate(total_grads, grads)
    loss = loss_sum / total_queries
    if not np.isfinite(loss):
        raise NonFiniteLossError(f"loss became non-finite ({loss})")
    optimizer.step(parameter_arrays(model), total_grads.arrays())
    return model, float(loss)


def _mixed_scale_queries(sample, config, rng):
    """Queries for one step, split evenly across the sigma scales."""
    scales = tuple(config.query_sigma_scales) or (1.0,)
    per_scale = [config.queries_per_patch // len(scales)] * len(scales)
    per_scale[0] += config.queries_per_patch - sum(per_scale)
    queries, targets = [], []
    for scale, count in zip(scales, per_scale):
        q, t = generate_queries(
            sample.patch.sparse, sample.gt_index, count, scale * config.query_sigma, rng
        )
        queries.append(q)
        targets.append(t)
    return np.vstack(queries), np.concatenate(targets)


def _rotated(sample, rotation):
    """A view of ``sample`` with all clouds rotated; curvature is reused."""
    sparse = sample.patch.sparse @ rotation.T
    dense = sample.patch.dense @ rotation.T
    ladder = SamplingLadder(
        clouds=tuple(sparse[idx] for idx in sample.ladder.indices),
        indices=sample.ladder.indices,
    )
    return replace(
        sample,
        patch=replace(sample.patch, sparse=sparse, dense=dense),
        ladder=ladder,
        gt_index=NeighborIndex(dense),
    )


def train(dataset, config, log=None):
    """Train a distance network on patch pairs under the curriculum.

    Every sample receives a fresh uniformly random rotation each epoch
    (sparse, dense, and ladder rotated together; curvature scores are
    rotation-invariant and reused). Deterministic for a given config.

    Args:
        dataset: list of patch pairs (``PatchPair`` or equivalent).
        config: :class:`TrainConfig`.
        log: optional callable invoked with each epoch trace record.

    Returns:
        (:class:`Checkpoint`, trace) where trace is a list of
        ``{"epoch", "phase", "mean_loss"}`` records.
    """
    if not dataset:
        raise ValueError("dataset must be non-empty")
    config.validate()
    rng = check_rng(config.seed)
    model = init_model(
        feature_dim=config.feature_dim,
        sampling_steps=config.sampling_steps,
        hidden=config.hidden,
        seed=rng,
        curvature_k=config.curvature_k,
    )
    samples = [build_sample(patch, config) for patch in dataset]
    schedule, phases = curriculum_schedule(samples, config.epochs, rng)
    optimizer = Adam(parameter_arrays(model), config.learning_rate)

    trace = []
    steps = 0
    for epoch_ids, phase, epoch in zip(schedule, phases, range(1, config.epochs + 1)):
        losses = []
        for sample_id in epoch_ids:
            sample = _rotated(samples[sample_id], random_rotation(rng))
            queries, targets = _mixed_scale_queries(sample, config, rng)
            for start in range(0, queries.shape[0], config.batch_size):
                chunk = slice(start, start + config.batch_size)
                _, loss = train_step(
                    model,
                    [(sample, queries[chunk], targets[chunk])],
                    config.learning_rate,
                    optimizer,
                )
                losses.append(loss)
                steps += 1
        record = {"epoch": epoch, "phase": phase, "mean_loss": float(np.mean(losses))}
        trace.append(record)
        if log is not None:
            log(record)
    return Checkpoint(model=model, config=config, steps=steps), trace


@dataclass
class Checkpoint:
    """A trained model plus the config and step count that produced it."""

    model: DistanceNet
    config: TrainConfig
    steps: int = 0


def _layer_payload(layer):
    return {
        "activation": layer.activation,
        "bias": layer.bias.tolist(),
        "weights": layer.weights.tolist(),
    }


def _layer_from_payload(payload):
    layer = Layer(
        weights=np.asarray(payload["weights"], dtype=np.float64),
        bias=np.asarray(payload["bias"], dtype=np.float64),
        activation=str(payload["activation"]),
    )
    if layer.activation not in ("softplus", "linear"):
        raise ValueError(f"unknown activation {layer.activation!r}")
    if layer.weights.ndim != 2 or layer.bias.shape != (layer.weights.shape[1],):
        raise ValueError("layer weight/bias shapes are inconsistent")
    if not (np.all(np.isfinite(layer.weights)) and np.all(np.isfinite(layer.bias))):
        raise ValueError("layer parameters contain NaN or infinity")
    return layer


def save_checkpoint(checkpoint, path):
    """Write a checkpoint as versioned JSON.

    Weights are serialized as decimal literals at full float64 round-trip
    precision with a fixed key order, so identical checkpoints produce
    byte-identical files and reload bit-exactly.
    """
    model = checkpoint.model
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "steps": int(checkpoint.steps),
        "config": asdict(checkpoint.config),
        "model": {
            "version": model.version,
            "feature_dim": model.feature_dim,
            "sampling_steps": model.sampling_steps,
            "curvature_k": model.curvature_k,
            "encoder": [_layer_payload(l) for l in model.encoder],
            "estimator": [_layer_payload(l) for l in model.estimator],
        },
    }
    with open(path, "w", encoding="ascii") as handle:
        json.dump(payload, handle, sort_keys=True, separators=(",", ":"))
        handle.write("\n")


def load_checkpoint(path):
    """Read a checkpoint written by :func:`save_checkpoint`.

    Raises:
        CheckpointVersionError: for unknown format versions.
        CorruptCheckpointError: for unparseable or inconsistent content.
        OSError: for unreadable paths.
    """
    with open(path, "r", encoding="ascii") as handle:
        try:
            payload = json.load(handle)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise CorruptCheckpointError(f"cannot parse checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or "format_version" not in payload:
        raise CorruptCheckpointError(f"checkpoint {path} has no format_version")
    if payload["format_version"] != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint {path} has format_version {payload['format_version']}, "
            f"expected {CHECKPOINT_FORMAT_VERSION}"
        )
    try:
        spec = payload["model"]
        model = DistanceNet(
            encoder=[_layer_from_payload(l) for l in spec["encoder"]],
            estimator=[_layer_from_payload(l) for l in spec["estimator"]],
            feature_dim=int(spec["feature_dim"]),
            sampling_steps=int(spec["sampling_steps"]),
            curvature_k=int(spec["curvature_k"]),
            version=str(spec["version"]),
        )
        config = TrainConfig(**payload["config"])
        steps = int(payload["steps"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptCheckpointError(f"checkpoint {path} is inconsistent: {exc}") from exc
    if model.estimator[0].weights.shape[0] != model.estimator_input_dim:
        raise CorruptCheckpointError(
            f"checkpoint {path} estimator width does not match its metadata"
        )
    return Checkpoint(model=model, config=config, steps=steps)
