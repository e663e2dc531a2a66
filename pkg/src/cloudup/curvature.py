"""Normal estimation, per-point curvature scores, and cloud subsampling.

The curvature score of a point is the mean absolute dot product between
its unit surface normal and the unit vectors toward its K nearest
neighbors. Flat neighborhoods score near 0, sharp ones approach 1, and
the score is invariant to rigid motions and to normal orientation.
"""

from dataclasses import dataclass

import numpy as np

from .errors import BadCountError, TooFewPointsError, TooManyStepsError
from .geometry import NeighborIndex
from .validation import check_count, check_points


def estimate_normals(points, k_normals=16):
    """Estimate unit surface normals by local PCA.

    Each normal is the eigenvector of the neighborhood covariance (the
    ``k_normals`` nearest points, the point itself included) associated
    with the smallest eigenvalue. Orientation is unspecified; the sign is
    canonicalized so each normal's largest-magnitude component is positive.

    Args:
        points: cloud of shape (N, 3).
        k_normals: neighborhood size, at least 3.

    Returns:
        Array of unit normals, shape (N, 3).
    """
    points = check_points(points)
    k_normals = check_count(k_normals, "k_normals", minimum=3)
    if points.shape[0] < k_normals:
        raise TooFewPointsError(
            f"need at least {k_normals} points for normal estimation, got {points.shape[0]}"
        )
    index = NeighborIndex(points)
    neighbor_idx, _ = index.knn_batch(points, k_normals)
    neighborhoods = points[neighbor_idx]                     # (N, k, 3)
    centered = neighborhoods - neighborhoods.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered)
    _, eigvecs = np.linalg.eigh(cov)                         # ascending eigenvalues
    normals = eigvecs[:, :, 0]
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    lead = np.take_along_axis(
        normals, np.argmax(np.abs(normals), axis=1)[:, None], axis=1
    )[:, 0]
    normals[lead < 0] *= -1.0
    return normals


def curvature_values(points, normals, k=16):
    """Per-point curvature scores in [0, 1].

    For each point p with unit normal n, the score is the mean of
    |unit(p_i - p) . n| over p's ``k`` nearest neighbors, the point itself
    excluded. A neighbor coincident with p contributes 0.

    Args:
        points: cloud of shape (N, 3).
        normals: unit normals of shape (N, 3), computed on the same cloud.
        k: number of neighbors, with N > k >= 1.

    Returns:
        Array of scores, shape (N,).
    """
    points = check_points(points)
    normals = np.asarray(normals, dtype=np.float64)
    if normals.shape != points.shape:
        raise ValueError(f"normals shape {normals.shape} != points shape {points.shape}")
    k = check_count(k, "k", minimum=1)
    n = points.shape[0]
    if n <= k:
        raise TooFewPointsError(f"need more than {k} points for k={k} neighbors, got {n}")
    index = NeighborIndex(points)
    neighbor_idx, _ = index.knn_batch(points, k + 1)
    # Drop each point's own entry; if duplicates pushed it out of the top
    # k+1, drop the farthest entry instead so exactly k neighbors remain.
    is_self = neighbor_idx == np.arange(n)[:, None]
    drop_col = np.where(is_self.any(axis=1), is_self.argmax(axis=1), k)
    keep = np.ones((n, k + 1), dtype=bool)
    keep[np.arange(n), drop_col] = False
    neighbors = points[neighbor_idx[keep].reshape(n, k)]     # (N, k, 3)
    chords = neighbors - points[:, None, :]
    lengths = np.linalg.norm(chords, axis=2)
    dots = (chords * normals[:, None, :]).sum(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        aligned = np.where(lengths > 0.0, np.abs(dots) / lengths, 0.0)
    return aligned.mean(axis=1)


def global_curvature(values):
    """Mean curvature score of a cloud; summarizes structural complexity."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("curvature values are empty")
    return float(values.mean())


def curvature_skewness(values):
    """Moment skewness of the curvature distribution (diagnostic only)."""
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("curvature values are empty")
    centered = values - values.mean()
    m2 = np.mean(centered**2)
    if m2 == 0.0:
        return 0.0
    return float(np.mean(centered**3) / m2**1.5)


@dataclass(frozen=True)
class SamplingLadder:
    """Progressively halved subsets of a cloud, highest curvature first.

    ``clouds[0]`` is the full input; ``clouds[s]`` holds the floor(N / 2^s)
    points with the highest curvature scores. ``indices[s]`` are the
    corresponding row indices into the input cloud, in descending-score
    order (ties by ascending index), so each level is a prefix of the next
    coarser one's ordering and the levels nest.
    """

    clouds: tuple
    indices: tuple

    @property
    def levels(self):
        return len(self.clouds)

    @property
    def steps(self):
        return len(self.clouds) - 1

    def sizes(self):
        return [c.shape[0] for c in self.clouds]


def curvature_sample(points, values, steps):
    """Build a sampling ladder by repeatedly keeping the top half by score.

    Args:
        points: cloud of shape (N, 3).
        values: curvature scores of shape (N,).
        steps: number of halvings; floor(N / 2^steps) must be >= 1.

    Returns:
        A :class:`SamplingLadder` with ``steps + 1`` levels.
    """
    points = check_points(points)
    values = np.asarray(values, dtype=np.float64)
    n = points.shape[0]
    if values.shape != (n,):
        raise ValueError(f"expected {n} curvature values, got shape {values.shape}")
    steps = check_count(steps, "steps", minimum=0)
    if n // 2**steps < 1:
        raise TooManyStepsError(f"{steps} halvings would empty a {n}-point cloud")
    order = np.lexsort((np.arange(n), -values))
    indices = [np.arange(n)]
    clouds = [points]
    for s in range(1, steps + 1):
        prefix = order[: n // 2**s].copy()
        indices.append(prefix)
        clouds.append(points[prefix])
    return SamplingLadder(clouds=tuple(clouds), indices=tuple(indices))


def fps(points, m, start_index=0):
    """Farthest point sampling: the spatially uniform baseline.

    Greedily selects ``m`` points, starting from ``start_index`` and always
    adding the point farthest from the selected set (ties by ascending
    index).

    Returns:
        (selected_points (m, 3), selected_indices (m,)).
    """
    points = check_points(points)
    n = points.shape[0]
    m = int(m)
    if not 1 <= m <= n:
        raise BadCountError(f"m must be in [1, {n}], got {m}")
    start_index = int(start_index)
    if not 0 <= start_index < n:
        raise BadCountError(f"start_index must be in [0, {n}), got {start_index}")
    selected = np.empty(m, dtype=np.intp)
    selected[0] = start_index
    dists = np.linalg.norm(points - points[start_index], axis=1)
    for i in range(1, m):
        nxt = int(np.argmax(dists))  # argmax returns the lowest tied index
        selected[i] = nxt
        np.minimum(dists, np.linalg.norm(points - points[nxt], axis=1), out=dists)
    return points[selected], selected
