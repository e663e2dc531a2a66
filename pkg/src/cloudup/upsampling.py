"""Inference: seed queries near a sparse cloud, project them onto the
estimated surface by gradient descent on a distance field, at any rate.

A distance field is anything exposing ``distance_and_gradient``: either a
trained network with its per-cloud features cached once, or an analytic
shape oracle (useful for testing the projection mechanics in isolation).
"""

from dataclasses import dataclass

import numpy as np

from .curvature import curvature_sample, curvature_values, estimate_normals
from .errors import BadRateError, NonFiniteStateError, TooFewPointsError
from .geometry import normalize
from .model import estimator_distances, estimator_query_gradients, ladder_features
from .validation import check_points, check_queries, check_rng


@dataclass(frozen=True)
class ProjectionParams:
    """Gradient-projection settings (all in the cloud's coordinate frame)."""

    step_size: float = 0.02
    iterations: int = 10
    seed_sigma: float = 0.02

    def __post_init__(self):
        if self.step_size < 0:
            raise ValueError(f"step_size must be nonnegative, got {self.step_size}")
        if self.iterations < 0:
            raise ValueError(f"iterations must be nonnegative, got {self.iterations}")
        if self.seed_sigma < 0:
            raise ValueError(f"seed_sigma must be nonnegative, got {self.seed_sigma}")


class ModelField:
    """A trained network bound to one sparse cloud, features cached once.

    Building the field encodes every ladder level a single time; each
    subsequent evaluation only runs the estimator head, so projecting many
    queries over many iterations never re-encodes the cloud.
    """

    def __init__(self, model, sparse, curvature_k=None, normals_k=16):
        sparse = check_points(sparse, "sparse")
        if sparse.shape[0] < 2**model.sampling_steps:
            raise TooFewPointsError(
                f"need at least {2 ** model.sampling_steps} points for "
                f"{model.sampling_steps} sampling steps, got {sparse.shape[0]}"
            )
        k = model.curvature_k if curvature_k is None else curvature_k
        normals = estimate_normals(sparse, normals_k)
        values = curvature_values(sparse, normals, k)
        self.model = model
        self.sparse = sparse
        self.ladder = curvature_sample(sparse, values, model.sampling_steps)
        self.features = ladder_features(model, self.ladder).ravel()

    def distance(self, queries):
        queries, single = check_queries(queries)
        out = estimator_distances(self.model, queries, self.features)
        return float(out[0]) if single else out

    def distance_and_gradient(self, queries):
        queries, _ = check_queries(queries)
        dist = estimator_distances(self.model, queries, self.features)
        grad = estimator_query_gradients(self.model, queries, self.features)
        return dist, grad


class OracleField:
    """An analytic shape as a distance field, optionally in a patch frame.

    With a normalization transform attached, queries are mapped back to
    world coordinates and distances are rescaled into the normalized
    frame. Gradients are zeroed wherever the oracle's gradient is
    undefined (surface and medial axis), which makes projection take a
    zero step there.
    """

    def __init__(self, oracle, transform=None):
        self.oracle = oracle
        self.transform = transform

    def _world(self, queries):
        return queries if self.transform is None else self.transform.invert(queries)

    def distance(self, queries):
        queries, single = check_queries(queries)
        dist = self.oracle.distance(self._world(queries))
        if self.transform is not None:
            dist = dist / self.transform.scale
        return float(dist[0]) if single else dist

    def distance_and_gradient(self, queries):
        queries, _ = check_queries(queries)
        dist, grad, _ = self.oracle.distance_gradient(self._world(queries))
        if self.transform is not None:
            dist = dist / self.transform.scale
        # The frame change is translation + uniform scale, so the unit
        # gradient direction is unchanged.
        return dist, grad


def prepare_field(model, sparse, curvature_k=None, normals_k=16):
    """Bind ``model`` to a sparse cloud with features computed once."""
    return ModelField(model, sparse, curvature_k=curvature_k, normals_k=normals_k)


def seed_queries(sparse, rate, seed_sigma, rng):
    """Generate round(rate * N) seed queries by jittered replication.

    Query i replicates sparse point (i mod N) plus isotropic Gaussian
    noise of scale ``seed_sigma``, so any real rate > 1 yields exactly the
    target count.
    """
    sparse = check_points(sparse, "sparse")
    if not rate > 1:
        raise BadRateError(f"rate must be > 1, got {rate}")
    rng = check_rng(rng)
    n = sparse.shape[0]
    count = int(np.floor(rate * n + 0.5))
    anchors = sparse[np.arange(count) % n]
    return anchors + rng.normal(0.0, seed_sigma, size=(count, 3))


def project(field, queries, params=ProjectionParams()):
    """Iteratively project queries onto the field's zero set.

    Each query moves ``iterations`` times by ``-step_size * gradient``.
    Queries where the gradient is undefined (zeroed by the field) stand
    still for that iteration.
    """
    queries, single = check_queries(queries)
    current = queries.copy()
    for iteration in range(params.iterations):
        _, grad = field.distance_and_gradient(current)
        current -= params.step_size * grad
        finite = np.isfinite(current).all(axis=1)
        if not finite.all():
            raise NonFiniteStateError(
                f"query {int(np.argmin(finite))} became non-finite at iteration {iteration}"
            )
    return current[0] if single else current


def upsample(field, sparse, rate, params=ProjectionParams(), rng=0):
    """Seed round(rate * N) queries around ``sparse`` and project them."""
    seeds = seed_queries(sparse, rate, params.seed_sigma, rng)
    return project(field, seeds, params)


def upsample_with_model(model, points, rate, params=ProjectionParams(), rng=0, normals_k=16):
    """Upsample a raw cloud with a trained model.

    The cloud is normalized into the centered unit frame the model was
    trained in, upsampled there, and mapped back.
    """
    normalized, transform = normalize(points)
    field = prepare_field(model, normalized, normals_k=normals_k)
    result = upsample(field, normalized, rate, params, rng)
    return transform.invert(result)


def duplicate_count(points):
    """Number of points that exactly coincide with an earlier point.

    Projection can collapse nearby seeds onto the same location; callers
    report this diagnostic rather than deduplicating.
    """
    points = check_points(points)
    return int(points.shape[0] - np.unique(points, axis=0).shape[0])
