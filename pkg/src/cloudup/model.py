"""The trainable unsigned-distance network and its exact gradients.

The network predicts the distance from a query point to the surface
underlying a sparse cloud. Each level of a sampling ladder is encoded
into a fixed-size feature by a shared point encoder; the query
coordinates and all level features are concatenated and mapped to a
nonnegative distance by an estimator head. Activations are softplus
throughout, so the predicted field is C^1 in the query — a requirement
for stable gradient-descent projection.

All gradients (with respect to the query and to every parameter) are
computed by hand-rolled reverse mode over numpy arrays.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import LadderMismatchError
from .validation import check_points, check_queries, check_rng

SOFTPLUS = "softplus"
LINEAR = "linear"

_ESTIMATOR_WIDTHS = (128, 64)


def softplus(x):
    return np.logaddexp(0.0, x)


@dataclass
class Layer:
    weights: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray     # (fan_out,)
    activation: str      # "softplus" or "linear"

    def __call__(self, x):
        z = x @ self.weights + self.bias
        return softplus(z) if self.activation == SOFTPLUS else z


@dataclass
class DistanceNet:
    """Parameters and architecture metadata of the distance network.

    ``encoder`` lifts points to ``hidden``, pools, and projects to
    ``feature_dim``; it is shared across all ladder levels. ``estimator``
    maps (query, features) to one nonnegative distance.
    """

    encoder: list
    estimator: list
    feature_dim: int
    sampling_steps: int
    curvature_k: int
    version: str = "1"

    @property
    def hidden(self):
        return self.encoder[0].weights.shape[1]

    @property
    def estimator_input_dim(self):
        return 3 + self.feature_dim * (self.sampling_steps + 1)


def init_model(feature_dim=32, sampling_steps=4, hidden=64, seed=0, curvature_k=16):
    """Create a network with Glorot-uniform weights and zero biases.

    Identical seeds produce byte-identical parameters.
    """
    if feature_dim < 1 or sampling_steps < 0 or hidden < 1:
        raise ValueError("need feature_dim >= 1, sampling_steps >= 0, hidden >= 1")
    rng = check_rng(seed)

    def glorot(fan_in, fan_out, activation):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        return Layer(weights=weights, bias=np.zeros(fan_out), activation=activation)

    encoder = [
        glorot(3, hidden, SOFTPLUS),
        glorot(hidden, hidden, SOFTPLUS),
        glorot(2 * hidden, feature_dim, LINEAR),
    ]
    head_in = 3 + feature_dim * (sampling_steps + 1)
    estimator = [
        glorot(head_in, _ESTIMATOR_WIDTHS[0], SOFTPLUS),
        glorot(_ESTIMATOR_WIDTHS[0], _ESTIMATOR_WIDTHS[1], SOFTPLUS),
        glorot(_ESTIMATOR_WIDTHS[1], 1, SOFTPLUS),
    ]
    return DistanceNet(
        encoder=encoder,
        estimator=estimator,
        feature_dim=feature_dim,
        sampling_steps=sampling_steps,
        curvature_k=curvature_k,
    )


def parameter_arrays(model):
    """All parameter arrays in a fixed, documented order."""
    arrays = []
    for layer in list(model.encoder) + list(model.estimator):
        arrays.append(layer.weights)
        arrays.append(layer.bias)
    return arrays


# ---------------------------------------------------------------------------
# Encoder
# ---------------------------------------------------------------------------

def _encoder_forward(model, points):
    """Forward pass of the shared encoder over one cloud, with cache."""
    l1, l2, l3 = model.encoder
    z1 = points @ l1.weights + l1.bias
    a1 = softplus(z1)
    z2 = a1 @ l2.weights + l2.bias
    h = softplus(z2)
    pooled = h.max(axis=0)
    pool_arg = h.argmax(axis=0)  # ties resolve to the lowest point index
    joint = np.concatenate([h, np.broadcast_to(pooled, h.shape)], axis=1)
    per_point = joint @ l3.weights + l3.bias
    feature = per_point.mean(axis=0)
    cache = (points, z1, a1, z2, h, pool_arg, joint)
    return feature, cache


def encode(model, points):
    """Encode one cloud into a feature vector of size ``feature_dim``.

    The result is invariant to point order (up to float reassociation):
    pooling uses a max and a mean, both evaluated in ascending index order.
    """
    points = check_points(points)
    feature, _ = _encoder_forward(model, points)
    return feature


def _encoder_backward(model, cache, upstream):
    """Gradients of ``upstream . feature`` w.r.t. the encoder parameters."""
    points, z1, a1, z2, h, pool_arg, joint = cache
    l1, l2, l3 = model.encoder
    n, hidden = h.shape

    d_w3 = np.outer(joint.mean(axis=0), upstream)
    d_b3 = upstream.copy()

    d_joint_row = (upstream @ l3.weights.T) / n      # identical for every point
    d_h = np.tile(d_joint_row[:hidden], (n, 1))
    # Max pooling routes each pooled coordinate's gradient to its arg row.
    d_pooled = d_joint_row[hidden:] * n
    d_h[pool_arg, np.arange(hidden)] += d_pooled

    delta2 = d_h * expit(z2)
    d_w2 = a1.T @ delta2
    d_b2 = delta2.sum(axis=0)
    delta1 = (delta2 @ l2.weights.T) * expit(z1)
    d_w1 = points.T @ delta1
    d_b1 = delta1.sum(axis=0)
    return [(d_w1, d_b1), (d_w2, d_b2), (d_w3, d_b3)]


# ---------------------------------------------------------------------------
# Full network
# ---------------------------------------------------------------------------

def ladder_features(model, ladder):
    """Encode every ladder level; returns an (S + 1, feature_dim) array."""
    _check_ladder(model, ladder)
    return np.stack([encode(model, cloud) for cloud in ladder.clouds])


def _check_ladder(model, ladder):
    if ladder.levels != model.sampling_steps + 1:
        raise LadderMismatchError(
            f"model expects {model.sampling_steps + 1} ladder levels, got {ladder.levels}"
        )


def _estimator_forward(model, queries, flat_features):
    x0 = np.concatenate(
        [queries, np.broadcast_to(flat_features, (queries.shape[0], flat_features.size))],
        axis=1,
    )
    activations = [x0]
    pre = []
    x = x0
    for layer in model.estimator:
        z = x @ layer.weights + layer.bias
        pre.append(z)
        x = softplus(z)
        activations.append(x)
    return x[:, 0], pre, activations


def estimator_distances(model, queries, flat_features):
    """Distance head on precomputed features; used by the cached field."""
    out, _, _ = _estimator_forward(model, queries, flat_features)
    return out


def estimator_query_gradients(model, queries, flat_features):
    """d distance / d query on precomputed features, shape (M, 3)."""
    _, pre, _ = _estimator_forward(model, queries, flat_features)
    delta = expit(pre[-1])
    for li in range(len(model.estimator) - 1, 0, -1):
        delta = (delta @ model.estimator[li].weights.T) * expit(pre[li - 1])
    return (delta @ model.estimator[0].weights.T)[:, :3]


def predict_distances(model, queries, ladder):
    """Predicted distances for a query batch; always nonnegative."""
    queries, single = check_queries(queries)
    features = ladder_features(model, ladder).ravel()
    out = estimator_distances(model, queries, features)
    return float(out[0]) if single else out


def predict_distance(model, query, ladder):
    return predict_distances(model, query, ladder)


def query_gradients(model, queries, ladder):
    """Exact gradient of the prediction w.r.t. each query point, (M, 3).

    Level features do not depend on the query, so the derivative flows
    only through the estimator's first three inputs.
    """
    queries, single = check_queries(queries)
    features = ladder_features(model, ladder).ravel()
    grads = estimator_query_gradients(model, queries, features)
    return grads[0] if single else grads


def query_gradient(model, query, ladder):
    return query_gradients(model, query, ladder)


@dataclass
class Gradients:
    """Parameter gradients matching the layout of :class:`DistanceNet`."""

    encoder: list    # [(d_weights, d_bias), ...]
    estimator: list

    def arrays(self):
        out = []
        for d_w, d_b in list(self.encoder) + list(self.estimator):
            out.append(d_w)
            out.append(d_b)
        return out


def parameter_gradients(model, queries, ladder, output_grads):
    """Exact reverse-mode parameter gradients through the whole network.

    Args:
        queries: (M, 3) batch.
        ladder: sampling ladder with S + 1 levels.
        output_grads: upstream derivative of the loss w.r.t. each predicted
            distance — an (M,) array, a broadcastable scalar, or a callable
            mapping the predictions to such an array.

    Returns:
        (predictions (M,), :class:`Gradients`).
    """
    queries, _ = check_queries(queries)
    _check_ladder(model, ladder)
    m = queries.shape[0]

    per_level = [_encoder_forward(model, check_points(c)) for c in ladder.clouds]
    features = np.stack([f for f, _ in per_level])
    predictions, pre, activations = _estimator_forward(model, queries, features.ravel())

    if callable(output_grads):
        output_grads = output_grads(predictions)
    output_grads = np.broadcast_to(np.asarray(output_grads, dtype=np.float64), (m,))

    delta = output_grads[:, None] * expit(pre[-1])
    estimator_grads = []
    for li in range(len(model.estimator) - 1, -1, -1):
        estimator_grads.append((activations[li].T @ delta, delta.sum(axis=0)))
        delta = delta @ model.estimator[li].weights.T
        if li > 0:
            delta = delta * expit(pre[li - 1])
    estimator_grads.reverse()

    # Every query shares the same features, so their gradients sum.
    feature_grads = delta[:, 3:].sum(axis=0).reshape(len(per_level), -1)
    d = model.feature_dim
    encoder_grads = None
    for (_, cache), upstream in zip(per_level, feature_grads):
        level_grads = _encoder_backward(model, cache, upstream)
        if encoder_grads is None:
            encoder_grads = level_grads
        else:
            encoder_grads = [
                (gw + lw, gb + lb)
                for (gw, gb), (lw, lb) in zip(encoder_grads, level_grads)
            ]
    return predictions, Gradients(encoder=encoder_grads, estimator=estimator_grads)
