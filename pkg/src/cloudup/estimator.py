"""Scikit-learn style front door for the upsampling pipeline.

``CloudUpsampler`` is fit on sparse/dense patch pairs and then upsamples
raw (N, 3) clouds via ``transform``/``predict``; ``CurvatureScorer`` is a
stateless transformer exposing the per-point curvature scores. Both
inherit ``get_params``/``set_params`` so they compose with pipelines and
parameter searches.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .curvature import curvature_values, estimate_normals
from .geometry import normalize
from .shapes import PatchPair
from .training import TrainConfig, train
from .upsampling import ProjectionParams, upsample_with_model
from .validation import check_points


class CloudUpsampler(BaseEstimator):
    """Arbitrary-scale point cloud upsampler.

    ``fit`` trains an unsigned-distance network on patch pairs;
    ``transform`` seeds round(rate * N) jittered queries around a cloud
    and projects them onto the learned surface.

    Parameters mirror :class:`cloudup.training.TrainConfig` plus the
    projection settings and the output ``rate``.

    Examples
    --------
    >>> from cloudup import CloudUpsampler, Sphere, make_patch_dataset
    >>> patches = make_patch_dataset([Sphere(1.0)], 4, sparse_n=64, rate=2, rng=0)
    >>> up = CloudUpsampler(rate=2, epochs=2, queries_per_patch=32, random_state=0)
    >>> dense = up.fit(patches).transform(patches[0].sparse)
    >>> dense.shape
    (128, 3)
    """

    def __init__(
        self,
        rate=4.0,
        epochs=100,
        difficulty_threshold=0.5,
        learning_rate=0.001,
        batch_size=256,
        queries_per_patch=256,
        query_sigma=0.05,
        feature_dim=32,
        hidden=64,
        sampling_steps=4,
        curvature_k=16,
        normals_k=16,
        step_size=0.02,
        iterations=10,
        seed_sigma=0.02,
        random_state=0,
    ):
        self.rate = rate
        self.epochs = epochs
        self.difficulty_threshold = difficulty_threshold
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.queries_per_patch = queries_per_patch
        self.query_sigma = query_sigma
        self.feature_dim = feature_dim
        self.hidden = hidden
        self.sampling_steps = sampling_steps
        self.curvature_k = curvature_k
        self.normals_k = normals_k
        self.step_size = step_size
        self.iterations = iterations
        self.seed_sigma = seed_sigma
        self.random_state = random_state

    def _train_config(self):
        return TrainConfig(
            epochs=self.epochs,
            difficulty_threshold=self.difficulty_threshold,
            learning_rate=self.learning_rate,
            batch_size=self.batch_size,
            queries_per_patch=self.queries_per_patch,
            query_sigma=self.query_sigma,
            seed=self.random_state,
            feature_dim=self.feature_dim,
            hidden=self.hidden,
            sampling_steps=self.sampling_steps,
            curvature_k=self.curvature_k,
            normals_k=self.normals_k,
            step_size=self.step_size,
            iterations=self.iterations,
            seed_sigma=self.seed_sigma,
        ).validate()

    def fit(self, X, y=None):
        """Train on patch pairs.

        Args:
            X: sequence of :class:`cloudup.shapes.PatchPair` or of
                ``(sparse, dense)`` array pairs. Raw pairs are normalized
                jointly into the dense cloud's unit frame.
            y: ignored; present for scikit-learn compatibility.
        """
        patches = [self._as_patch(item) for item in X]
        checkpoint, trace = train(patches, self._train_config())
        self.model_ = checkpoint.model
        self.checkpoint_ = checkpoint
        self.history_ = trace
        return self

    @staticmethod
    def _as_patch(item):
        if isinstance(item, PatchPair):
            return item
        if hasattr(item, "sparse") and hasattr(item, "dense"):
            return item
        sparse, dense = item
        dense_norm, transform = normalize(check_points(dense, "dense"))
        return PatchPair(
            sparse=transform.apply(check_points(sparse, "sparse")),
            dense=dense_norm,
            transform=transform,
        )

    def transform(self, X):
        """Upsample one cloud of shape (N, 3) to round(rate * N) points."""
        if not hasattr(self, "model_"):
            raise NotFittedError("CloudUpsampler must be fit before transform")
        points = check_points(X, "X")
        params = ProjectionParams(
            step_size=self.step_size,
            iterations=self.iterations,
            seed_sigma=self.seed_sigma,
        )
        return upsample_with_model(
            self.model_,
            points,
            self.rate,
            params,
            rng=np.random.default_rng(self.random_state),
            normals_k=self.normals_k,
        )

    def predict(self, X):
        return self.transform(X)


class CurvatureScorer(TransformerMixin, BaseEstimator):
    """Stateless transformer returning per-point curvature scores in [0, 1]."""

    def __init__(self, k=16, normals_k=16):
        self.k = k
        self.normals_k = normals_k

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        points = check_points(X, "X")
        normals = estimate_normals(points, self.normals_k)
        return curvature_values(points, normals, self.k)
