"""Point-cloud containers, exact neighbor queries, and rigid/scale frames.

Clouds are plain float64 arrays of shape (N, 3); row order is the stable
point identity used everywhere else. Neighbor queries are exact: results
always agree with an exhaustive scan, with distance ties broken by
ascending point index.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateCloudError, KTooLargeError
from .validation import check_point, check_points, check_queries, check_rng

# Relative/absolute slack used only to decide when a k-th neighbor tie needs
# the exhaustive rescue path; generous against float noise, tiny against data.
_TIE_RTOL = 1e-9
_TIE_ATOL = 1e-12


class NeighborIndex:
    """Exact k-nearest-neighbor index over an immutable cloud.

    Backed by a balanced k-d tree; every query is post-ranked by
    (distance, index) so results are deterministic and identical to a
    brute-force scan even under distance ties. Safe for concurrent reads.
    """

    def __init__(self, points):
        self.points = check_points(points, "points")
        self.points.setflags(write=False)
        self._tree = cKDTree(self.points)

    @property
    def count(self):
        return self.points.shape[0]

    def knn(self, query, k):
        """Return the k nearest points to ``query`` as (indices, distances).

        Results are sorted ascending by Euclidean distance, ties broken by
        ascending point index.
        """
        query = check_point(query, "query")
        k = self._check_k(k)
        indices = self._candidate_indices(query, k)
        dists = np.linalg.norm(self.points[indices] - query, axis=1)
        order = np.lexsort((indices, dists))[:k]
        return indices[order], dists[order]

    def knn_batch(self, queries, k):
        """Vectorized :meth:`knn` over an (M, 3) query batch.

        Returns (indices (M, k), distances (M, k)).
        """
        queries, _ = check_queries(queries)
        k = self._check_k(k)
        n = self.count
        # Query one extra neighbor to detect ties straddling the k-th rank.
        kq = min(k + 1, n)
        tree_d, tree_i = self._tree.query(queries, k=kq)
        if kq == 1:  # scipy squeezes the neighbor axis when k == 1
            tree_d = tree_d[:, None]
            tree_i = tree_i[:, None]
        cand_i = tree_i[:, :k]
        recomputed = np.linalg.norm(self.points[cand_i] - queries[:, None, :], axis=2)
        order = np.lexsort((cand_i, recomputed), axis=1)
        rows = np.arange(queries.shape[0])[:, None]
        out_i = cand_i[rows, order]
        out_d = recomputed[rows, order]
        if kq > k:
            boundary_gap = tree_d[:, k] - tree_d[:, k - 1]
            risky = boundary_gap <= _TIE_RTOL * tree_d[:, k] + _TIE_ATOL
            for row in np.nonzero(risky)[0]:
                idx, dist = self.knn(queries[row], k)
                out_i[row] = idx
                out_d[row] = dist
        return out_i, out_d

    def nearest_distance(self, query):
        """Distance from ``query`` to its closest cloud point (0 on a hit)."""
        _, dists = self.knn(query, 1)
        return float(dists[0])

    def nearest_distances(self, queries):
        """Vectorized nearest distances for an (M, 3) query batch."""
        queries, single = check_queries(queries)
        _, idx = self._tree.query(queries, k=1)
        dists = np.linalg.norm(self.points[idx] - queries, axis=1)
        return dists[0] if single else dists

    def _check_k(self, k):
        k = int(k)
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        if k > self.count:
            raise KTooLargeError(f"k={k} exceeds cloud size {self.count}")
        return k

    def _candidate_indices(self, query, k):
        """Indices guaranteed to contain the true top-k under (dist, index)."""
        n = self.count
        if k == n:
            return np.arange(n)
        dists, _ = self._tree.query(query, k=k)
        kth = float(np.atleast_1d(dists)[-1])
        radius = kth * (1.0 + _TIE_RTOL) + _TIE_ATOL
        ball = self._tree.query_ball_point(query, radius)
        return np.asarray(sorted(ball), dtype=np.intp)


def build_index(points):
    """Build an exact neighbor index over ``points``."""
    return NeighborIndex(points)


@dataclass(frozen=True)
class NormalizationTransform:
    """Maps world coordinates into the centered unit frame and back."""

    centroid: np.ndarray  # (3,)
    scale: float          # max distance from centroid, > 0

    def apply(self, points):
        return (np.asarray(points, dtype=np.float64) - self.centroid) / self.scale

    def invert(self, points):
        return np.asarray(points, dtype=np.float64) * self.scale + self.centroid


def identity_transform():
    return NormalizationTransform(centroid=np.zeros(3), scale=1.0)


def normalize(points):
    """Center a cloud at the origin and scale its max norm to 1.

    Returns (normalized_points, transform); ``transform.invert`` restores
    the original coordinates.

    Raises:
        DegenerateCloudError: if all points coincide.
    """
    points = check_points(points, "points", min_points=2)
    centroid = points.mean(axis=0)
    radii = np.linalg.norm(points - centroid, axis=1)
    scale = float(radii.max())
    if scale <= 0.0:
        raise DegenerateCloudError("all points are identical; no scale exists")
    transform = NormalizationTransform(centroid=centroid, scale=scale)
    return transform.apply(points), transform


def random_rotation(rng):
    """Draw a rotation matrix uniformly over SO(3) via a random unit quaternion."""
    rng = check_rng(rng)
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
