"""Tests for seeding, gradient projection, and the cached model field."""

import numpy as np
import pytest

from cloudup.errors import BadRateError, NonFiniteStateError, TooFewPointsError
from cloudup.model import init_model, predict_distances, query_gradients
from cloudup.shapes import Sphere, Torus, make_patch_dataset
from cloudup.upsampling import (
    ModelField,
    OracleField,
    ProjectionParams,
    duplicate_count,
    prepare_field,
    project,
    seed_queries,
    upsample,
)


class TestSeedQueries:
    def test_integer_rate_count(self, rng):
        sparse = rng.normal(size=(256, 3))
        assert seed_queries(sparse, 4, 0.02, 0).shape == (1024, 3)

    def test_fractional_rate_count(self, rng):
        sparse = rng.normal(size=(100, 3))
        assert seed_queries(sparse, 2.5, 0.02, 0).shape == (250, 3)

    def test_zero_sigma_replicates(self, rng):
        sparse = rng.normal(size=(10, 3))
        seeds = seed_queries(sparse, 3, 0.0, 0)
        np.testing.assert_array_equal(seeds, sparse[np.arange(30) % 10])

    def test_bad_rate(self, rng):
        with pytest.raises(BadRateError):
            seed_queries(rng.normal(size=(10, 3)), 1.0, 0.02, 0)


class TestProject:
    def test_sphere_two_step_analytic(self):
        field = OracleField(Sphere(1.0))
        out = project(
            field,
            np.array([[2.0, 0.0, 0.0]]),
            ProjectionParams(step_size=0.5, iterations=2, seed_sigma=0.0),
        )
        np.testing.assert_allclose(out, [[1.0, 0.0, 0.0]], atol=1e-12)

    def test_zero_iterations_identity(self, rng):
        field = OracleField(Sphere(1.0))
        queries = rng.normal(size=(20, 3))
        out = project(field, queries, ProjectionParams(0.1, 0, 0.0))
        np.testing.assert_array_equal(out, queries)

    def test_zero_step_identity(self, rng):
        field = OracleField(Sphere(1.0))
        queries = rng.normal(size=(20, 3))
        out = project(field, queries, ProjectionParams(0.0, 5, 0.0))
        np.testing.assert_array_equal(out, queries)

    def test_medial_axis_point_stays(self):
        field = OracleField(Sphere(1.0))
        out = project(field, np.zeros((1, 3)), ProjectionParams(0.5, 3, 0.0))
        np.testing.assert_array_equal(out, 0.0)

    @pytest.mark.parametrize("oracle", [Sphere(1.0), Torus(1.0, 0.3)], ids=["sphere", "torus"])
    def test_residual_below_step_size(self, oracle):
        rng = np.random.default_rng(3)
        seeds = oracle.sample_surface(10_000, rng) + rng.normal(0, 0.02, size=(10_000, 3))
        out = project(OracleField(oracle), seeds, ProjectionParams(0.02, 10, 0.02))
        residual = oracle.distance(out)
        assert np.mean(residual < 0.02) >= 0.99

    def test_distance_non_increasing_until_convergence(self):
        # Fixed-step descent reduces the distance monotonically until the
        # residual enters the step-sized band around the surface, where it
        # oscillates with overshoot bounded by the step size.
        rng = np.random.default_rng(4)
        oracle = Torus(1.0, 0.3)
        seeds = oracle.sample_surface(2000, rng) + rng.normal(0, 0.02, size=(2000, 3))
        field = OracleField(oracle)
        step = 0.005
        current = seeds.copy()
        previous = oracle.distance(current)
        monotone = np.ones(len(seeds), dtype=bool)
        bounded = np.ones(len(seeds), dtype=bool)
        for _ in range(10):
            current = project(field, current, ProjectionParams(step, 1, 0.0))
            now = oracle.distance(current)
            descending = previous > step
            monotone &= ~descending | (now <= previous + 1e-12)
            bounded &= descending | (now <= step + 1e-12)
            previous = now
        assert monotone.mean() >= 0.99
        assert bounded.mean() >= 0.99

    def test_non_finite_state_raises(self):
        class BadField:
            def distance_and_gradient(self, queries):
                grads = np.full_like(queries, np.nan)
                return np.zeros(len(queries)), grads

        with pytest.raises(NonFiniteStateError):
            project(BadField(), np.zeros((2, 3)), ProjectionParams(0.1, 1, 0.0))


class TestModelField:
    @pytest.fixture(scope="class")
    def setup(self):
        patch = make_patch_dataset([Sphere(1.0)], 1, sparse_n=64, rate=2, rng=8)[0]
        model = init_model(feature_dim=8, sampling_steps=2, hidden=12, seed=2)
        return patch, model

    def test_cached_equals_fresh_forward(self, setup, rng):
        patch, model = setup
        field = prepare_field(model, patch.sparse)
        queries = rng.normal(size=(50, 3))
        np.testing.assert_array_equal(
            field.distance(queries), predict_distances(model, queries, field.ladder)
        )
        np.testing.assert_array_equal(
            field.distance_and_gradient(queries)[1],
            query_gradients(model, queries, field.ladder),
        )

    def test_repeated_evaluations_identical(self, setup, rng):
        patch, model = setup
        field = prepare_field(model, patch.sparse)
        queries = rng.normal(size=(10, 3))
        np.testing.assert_array_equal(field.distance(queries), field.distance(queries))

    def test_too_few_points(self, setup):
        _, model = setup
        with pytest.raises(TooFewPointsError):
            ModelField(model, np.eye(3))


class TestUpsample:
    def test_count_contract(self, rng):
        field = OracleField(Sphere(1.0))
        sparse = Sphere(1.0).sample_surface(256, 1)
        for rate in (4, 2.5, 16, 1.7):
            out = upsample(field, sparse, rate, ProjectionParams(), rng=2)
            assert out.shape == (int(np.floor(rate * 256 + 0.5)), 3)

    def test_deterministic(self):
        field = OracleField(Sphere(1.0))
        sparse = Sphere(1.0).sample_surface(128, 1)
        a = upsample(field, sparse, 4, ProjectionParams(), rng=7)
        b = upsample(field, sparse, 4, ProjectionParams(), rng=7)
        np.testing.assert_array_equal(a, b)

    def test_sphere_residual_bound(self):
        params = ProjectionParams(step_size=0.02, iterations=10, seed_sigma=0.02)
        sphere = Sphere(1.0)
        sparse = sphere.sample_surface(256, 1)
        out = upsample(OracleField(sphere), sparse, 4, params, rng=3)
        assert out.shape == (1024, 3)
        residual = np.abs(np.linalg.norm(out, axis=1) - 1.0)
        assert residual.mean() < 2 * params.step_size

    def test_direct_16x_single_pass(self):
        field = OracleField(Sphere(1.0))
        sparse = Sphere(1.0).sample_surface(256, 1)
        out = upsample(field, sparse, 16, ProjectionParams(), rng=4)
        assert out.shape == (4096, 3)


def test_duplicate_count(rng):
    points = rng.normal(size=(10, 3))
    assert duplicate_count(points) == 0
    stacked = np.vstack([points, points[:3]])
    assert duplicate_count(stacked) == 3
