"""Tests for the distance network: forward pass, invariances, gradients."""

import numpy as np
import pytest
from scipy.special import expit

from cloudup.curvature import SamplingLadder, curvature_sample
from cloudup.errors import LadderMismatchError
from cloudup.model import (
    encode,
    init_model,
    parameter_arrays,
    parameter_gradients,
    predict_distance,
    predict_distances,
    query_gradient,
    query_gradients,
)


def make_ladder(rng, n=48, steps=2):
    points = rng.normal(size=(n, 3))
    values = rng.uniform(0, 1, size=n)
    return curvature_sample(points, values, steps)


def small_model(seed=0, steps=2):
    return init_model(feature_dim=6, sampling_steps=steps, hidden=10, seed=seed)


def reference_encode(model, points):
    """Straight-line reimplementation of the encoder arithmetic."""
    l1, l2, l3 = model.encoder

    def sp(x):
        return np.log1p(np.exp(x))

    h = []
    for p in points:
        a1 = sp(p @ l1.weights + l1.bias)
        h.append(sp(a1 @ l2.weights + l2.bias))
    h = np.asarray(h)
    pooled = h.max(axis=0)
    per_point = [np.concatenate([row, pooled]) @ l3.weights + l3.bias for row in h]
    return np.mean(per_point, axis=0)


class TestInit:
    def test_deterministic(self):
        a, b = init_model(seed=5), init_model(seed=5)
        for pa, pb in zip(parameter_arrays(a), parameter_arrays(b)):
            np.testing.assert_array_equal(pa, pb)

    def test_estimator_width_d32_s4(self):
        model = init_model(feature_dim=32, sampling_steps=4)
        assert model.estimator_input_dim == 163
        assert model.estimator[0].weights.shape == (163, 128)

    def test_estimator_width_s0(self):
        model = init_model(feature_dim=32, sampling_steps=0)
        assert model.estimator_input_dim == 35

    def test_glorot_bounds_and_zero_bias(self):
        model = init_model(seed=1)
        for layer in model.encoder + model.estimator:
            fan_in, fan_out = layer.weights.shape
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            assert np.abs(layer.weights).max() <= bound
            np.testing.assert_array_equal(layer.bias, 0.0)


class TestEncode:
    def test_matches_reference(self, rng):
        model = small_model()
        points = rng.normal(size=(4, 3))
        np.testing.assert_allclose(
            encode(model, points), reference_encode(model, points), atol=1e-12
        )

    def test_permutation_invariant(self, rng):
        model = small_model()
        points = rng.normal(size=(30, 3))
        perm = rng.permutation(30)
        np.testing.assert_allclose(
            encode(model, points), encode(model, points[perm]), atol=1e-12
        )

    def test_single_point(self, rng):
        model = small_model()
        point = rng.normal(size=(1, 3))
        np.testing.assert_allclose(
            encode(model, point), reference_encode(model, point), atol=1e-12
        )

    def test_duplicating_points_preserves_feature(self, rng):
        model = small_model()
        points = rng.normal(size=(12, 3))
        doubled = np.vstack([points, points])
        np.testing.assert_allclose(
            encode(model, points), encode(model, doubled), atol=1e-12
        )


class TestForward:
    def test_zero_parameters_give_log2(self, rng):
        model = small_model()
        for arr in parameter_arrays(model):
            arr[:] = 0.0
        ladder = make_ladder(rng)
        value = predict_distance(model, np.array([0.3, -0.2, 0.1]), ladder)
        assert value == pytest.approx(np.log(2.0), abs=1e-15)

    def test_nonnegative(self, rng):
        model = small_model(seed=3)
        ladder = make_ladder(rng)
        queries = rng.normal(size=(200, 3)) * 3
        assert np.all(predict_distances(model, queries, ladder) >= 0.0)

    def test_ladder_mismatch(self, rng):
        model = small_model(steps=2)
        bad = make_ladder(rng, steps=3)
        with pytest.raises(LadderMismatchError):
            predict_distance(model, np.zeros(3), bad)

    def test_permuting_ladder_points_preserves_output(self, rng):
        model = small_model(seed=4)
        ladder = make_ladder(rng)
        query = rng.normal(size=3)
        shuffled = SamplingLadder(
            clouds=tuple(c[rng.permutation(len(c))] for c in ladder.clouds),
            indices=ladder.indices,
        )
        assert predict_distance(model, query, ladder) == pytest.approx(
            predict_distance(model, query, shuffled), abs=1e-12
        )
        np.testing.assert_allclose(
            query_gradient(model, query, ladder),
            query_gradient(model, query, shuffled),
            atol=1e-12,
        )


class TestQueryGradient:
    def test_matches_finite_differences(self):
        h = 1e-5
        worst = 0.0
        for seed in range(30):
            rng = np.random.default_rng(seed)
            model = small_model(seed=seed)
            ladder = make_ladder(rng)
            query = rng.normal(size=3)
            grad = query_gradient(model, query, ladder)
            fd = np.zeros(3)
            for axis in range(3):
                up, down = query.copy(), query.copy()
                up[axis] += h
                down[axis] -= h
                fd[axis] = (
                    predict_distance(model, up, ladder)
                    - predict_distance(model, down, ladder)
                ) / (2 * h)
            worst = max(worst, np.linalg.norm(fd - grad) / np.linalg.norm(grad))
        assert worst < 1e-6

    def test_zero_first_layer_gives_zero_gradient(self, rng):
        model = small_model(seed=9)
        model.estimator[0].weights[:] = 0.0
        ladder = make_ladder(rng)
        np.testing.assert_array_equal(query_gradient(model, rng.normal(size=3), ladder), 0.0)


class TestParameterGradients:
    def test_match_finite_differences(self):
        h = 1e-5
        for seed in range(10):
            rng = np.random.default_rng(seed)
            model = small_model(seed=seed)
            ladder = make_ladder(rng, n=24)
            queries = rng.normal(size=(4, 3))
            weights = rng.normal(size=4)
            _, grads = parameter_gradients(model, queries, ladder, weights)
            arrays = parameter_arrays(model)
            grad_arrays = grads.arrays()
            analytic, numeric = [], []
            for _ in range(10):
                ai = int(rng.integers(len(arrays)))
                flat = int(rng.integers(arrays[ai].size))
                original = arrays[ai].flat[flat]
                arrays[ai].flat[flat] = original + h
                up = float(weights @ predict_distances(model, queries, ladder))
                arrays[ai].flat[flat] = original - h
                down = float(weights @ predict_distances(model, queries, ladder))
                arrays[ai].flat[flat] = original
                numeric.append((up - down) / (2 * h))
                analytic.append(grad_arrays[ai].flat[flat])
            analytic, numeric = np.asarray(analytic), np.asarray(numeric)
            rel = np.linalg.norm(numeric - analytic) / max(
                np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12
            )
            assert rel < 1e-5

    def test_zero_loss_grad_gives_zero_gradients(self, rng):
        model = small_model(seed=2)
        ladder = make_ladder(rng)
        _, grads = parameter_gradients(model, rng.normal(size=(3, 3)), ladder, 0.0)
        for arr in grads.arrays():
            np.testing.assert_array_equal(arr, 0.0)

    def test_callable_output_grads_sees_predictions(self, rng):
        model = small_model(seed=6)
        ladder = make_ladder(rng)
        queries = rng.normal(size=(5, 3))
        seen = {}

        def capture(preds):
            seen["preds"] = preds.copy()
            return np.ones_like(preds)

        preds, _ = parameter_gradients(model, queries, ladder, capture)
        np.testing.assert_array_equal(seen["preds"], preds)

    def test_max_pool_gradient_routes_to_argmax(self, rng):
        # Nudging a non-argmax point along a pooled coordinate must not change
        # the pooled output's contribution; the analytic gradient agrees with
        # finite differences even through the pooling switch.
        model = small_model(seed=8)
        points = rng.normal(size=(6, 3))
        ladder = curvature_sample(points, rng.uniform(0, 1, 6), 0)
        model2 = init_model(feature_dim=6, sampling_steps=0, hidden=10, seed=8)
        queries = rng.normal(size=(2, 3))
        _, grads = parameter_gradients(model2, queries, ladder, 1.0)
        h = 1e-6
        layer = model2.encoder[0]
        flat = int(rng.integers(layer.weights.size))
        original = layer.weights.flat[flat]
        layer.weights.flat[flat] = original + h
        up = predict_distances(model2, queries, ladder).sum()
        layer.weights.flat[flat] = original - h
        down = predict_distances(model2, queries, ladder).sum()
        layer.weights.flat[flat] = original
        fd = (up - down) / (2 * h)
        assert grads.encoder[0][0].flat[flat] == pytest.approx(fd, rel=1e-4, abs=1e-9)
