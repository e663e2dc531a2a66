"""Tests for query generation, curriculum, optimization, and checkpoints."""

from dataclasses import replace

import numpy as np
import pytest

from cloudup.errors import (
    CheckpointVersionError,
    CorruptCheckpointError,
    OutOfRangeError,
)
from cloudup.geometry import NeighborIndex
from cloudup.model import parameter_arrays, predict_distances
from cloudup.shapes import Sphere, Torus, make_patch_dataset
from cloudup.training import (
    Adam,
    TrainConfig,
    build_sample,
    classify_difficulty,
    curriculum_schedule,
    generate_queries,
    load_checkpoint,
    save_checkpoint,
    train,
    train_step,
)


def tiny_config(**overrides):
    base = dict(
        epochs=2,
        batch_size=64,
        queries_per_patch=64,
        feature_dim=8,
        hidden=12,
        sampling_steps=2,
        curvature_k=8,
        normals_k=8,
        seed=0,
    )
    base.update(overrides)
    return TrainConfig(**base)


@pytest.fixture(scope="module")
def tiny_patches():
    return make_patch_dataset([Sphere(1.0), Torus(1.0, 0.3)], 2, sparse_n=32, rate=2, rng=5)


class TestGenerateQueries:
    def test_zero_sigma_hits_sparse_points(self, rng, tiny_patches):
        patch = tiny_patches[0]
        index = NeighborIndex(patch.dense)
        queries, targets = generate_queries(patch.sparse, index, 50, 0.0, rng)
        sparse_rows = {tuple(row) for row in patch.sparse}
        assert all(tuple(q) in sparse_rows for q in queries)
        np.testing.assert_allclose(targets, index.nearest_distances(queries))

    def test_count(self, rng, tiny_patches):
        patch = tiny_patches[0]
        queries, targets = generate_queries(
            patch.sparse, NeighborIndex(patch.dense), 512, 0.05, rng
        )
        assert queries.shape == (512, 3) and targets.shape == (512,)

    def test_targets_match_bruteforce(self, rng, tiny_patches):
        patch = tiny_patches[0]
        queries, targets = generate_queries(
            patch.sparse, NeighborIndex(patch.dense), 100, 0.1, rng
        )
        brute = np.min(
            np.linalg.norm(queries[:, None, :] - patch.dense[None, :, :], axis=2), axis=1
        )
        np.testing.assert_allclose(targets, brute, atol=1e-9)


class TestClassifyDifficulty:
    def test_above_threshold_is_hard(self):
        assert classify_difficulty(0.6, 0.5) == "hard"

    def test_boundary_is_hard(self):
        assert classify_difficulty(0.5, 0.5) == "hard"

    def test_below_is_easy(self):
        assert classify_difficulty(0.49, 0.5) == "easy"

    def test_out_of_range(self):
        with pytest.raises(OutOfRangeError):
            classify_difficulty(1.2, 0.5)
        with pytest.raises(OutOfRangeError):
            classify_difficulty(0.5, -0.1)

    def test_plane_dominant_patch_is_easy(self, tiny_patches):
        # Smooth dense patches carry tiny mean curvature scores.
        sample = build_sample(tiny_patches[0], tiny_config())
        assert sample.global_curvature < 0.5
        assert sample.difficulty == "easy"


class _Stub:
    def __init__(self, difficulty):
        self.difficulty = difficulty


class TestCurriculumSchedule:
    def test_even_split(self):
        samples = [_Stub("easy")] * 3 + [_Stub("hard")] * 2
        schedule, phases = curriculum_schedule(samples, 100, 0)
        assert phases == ["easy"] * 50 + ["hard"] * 50
        for epoch_ids, phase in zip(schedule, phases):
            expected = {0, 1, 2} if phase == "easy" else {3, 4}
            assert set(epoch_ids.tolist()) == expected

    def test_odd_epochs_ceiling_split(self):
        samples = [_Stub("easy"), _Stub("hard")]
        _, phases = curriculum_schedule(samples, 7, 0)
        assert phases == ["easy"] * 4 + ["hard"] * 3

    def test_empty_bucket_falls_back_to_everyone(self):
        samples = [_Stub("easy")] * 4
        schedule, phases = curriculum_schedule(samples, 7, 0)
        for epoch_ids in schedule[4:]:
            assert set(epoch_ids.tolist()) == {0, 1, 2, 3}

    def test_deterministic_shuffle(self):
        samples = [_Stub("easy")] * 6
        a, _ = curriculum_schedule(samples, 4, 3)
        b, _ = curriculum_schedule(samples, 4, 3)
        for ea, eb in zip(a, b):
            np.testing.assert_array_equal(ea, eb)

    def test_partition_is_total(self):
        samples = [_Stub("easy"), _Stub("hard"), _Stub("easy")]
        schedule, phases = curriculum_schedule(samples, 10, 1)
        seen_easy = set().union(*(set(e.tolist()) for e, p in zip(schedule, phases) if p == "easy"))
        seen_hard = set().union(*(set(e.tolist()) for e, p in zip(schedule, phases) if p == "hard"))
        assert seen_easy == {0, 2} and seen_hard == {1}


class TestTrainStep:
    def test_loss_zero_at_exact_fit(self, tiny_patches):
        config = tiny_config()
        sample = build_sample(tiny_patches[0], config)
        rng = np.random.default_rng(0)
        queries, _ = generate_queries(sample.patch.sparse, sample.gt_index, 8, 0.05, rng)
        model_cfg = dict(
            feature_dim=config.feature_dim,
            sampling_steps=config.sampling_steps,
            hidden=config.hidden,
        )
        from cloudup.model import init_model

        model = init_model(seed=1, **model_cfg)
        targets = predict_distances(model, queries, sample.ladder)
        before = [arr.copy() for arr in parameter_arrays(model)]
        _, loss = train_step(model, [(sample, queries, targets)], 0.01)
        assert loss == 0.0
        for prev, now in zip(before, parameter_arrays(model)):
            np.testing.assert_array_equal(prev, now)

    def test_loss_nonnegative_and_decreases(self, tiny_patches):
        config = tiny_config()
        sample = build_sample(tiny_patches[0], config)
        rng = np.random.default_rng(0)
        queries, targets = generate_queries(sample.patch.sparse, sample.gt_index, 64, 0.05, rng)
        from cloudup.model import init_model

        model = init_model(
            feature_dim=config.feature_dim,
            sampling_steps=config.sampling_steps,
            hidden=config.hidden,
            seed=1,
        )
        optimizer = Adam(parameter_arrays(model), 0.005)
        losses = []
        for _ in range(60):
            _, loss = train_step(model, [(sample, queries, targets)], optimizer=optimizer)
            assert loss >= 0.0
            losses.append(loss)
        assert losses[-1] < losses[0]


class TestTrain:
    def test_deterministic_checkpoints(self, tiny_patches, tmp_path):
        config = tiny_config()
        ckpt_a, trace_a = train(tiny_patches, config)
        ckpt_b, trace_b = train(tiny_patches, tiny_config())
        save_checkpoint(ckpt_a, tmp_path / "a.json")
        save_checkpoint(ckpt_b, tmp_path / "b.json")
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
        assert trace_a == trace_b

    def test_smoke_run_trace(self, tiny_patches):
        checkpoint, trace = train(tiny_patches[:2], tiny_config())
        assert checkpoint.steps == 2 * 2
        assert [r["epoch"] for r in trace] == [1, 2]
        assert all(np.isfinite(r["mean_loss"]) for r in trace)

    def test_loss_improves_on_single_patch(self, tiny_patches):
        config = tiny_config(epochs=40, queries_per_patch=128, batch_size=128)
        _, trace = train(tiny_patches[:1], config)
        start = np.mean([r["mean_loss"] for r in trace[:3]])
        end = np.mean([r["mean_loss"] for r in trace[-3:]])
        assert end < start


class TestCheckpointIO:
    def test_round_trip_bit_exact(self, tiny_patches, tmp_path, rng):
        checkpoint, _ = train(tiny_patches[:1], tiny_config(epochs=1))
        path = tmp_path / "model.json"
        save_checkpoint(checkpoint, path)
        loaded = load_checkpoint(path)
        sample = build_sample(tiny_patches[0], checkpoint.config)
        queries = rng.normal(size=(100, 3))
        np.testing.assert_array_equal(
            predict_distances(checkpoint.model, queries, sample.ladder),
            predict_distances(loaded.model, queries, sample.ladder),
        )
        assert loaded.config == checkpoint.config
        assert loaded.steps == checkpoint.steps

    def test_truncated_file_is_corrupt(self, tiny_patches, tmp_path):
        checkpoint, _ = train(tiny_patches[:1], tiny_config(epochs=1))
        path = tmp_path / "model.json"
        save_checkpoint(checkpoint, path)
        path.write_bytes(path.read_bytes()[:200])
        with pytest.raises(CorruptCheckpointError):
            load_checkpoint(path)

    def test_unknown_version_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"format_version": 999}')
        with pytest.raises(CheckpointVersionError):
            load_checkpoint(path)

    def test_missing_file_is_os_error(self, tmp_path):
        with pytest.raises(OSError):
            load_checkpoint(tmp_path / "missing.json")


def test_config_validation():
    with pytest.raises(OutOfRangeError):
        TrainConfig(difficulty_threshold=1.5).validate()
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=0.0).validate()
    with pytest.raises(ValueError):
        TrainConfig(query_sigma_scales=()).validate()
    assert TrainConfig().validate() is not None
