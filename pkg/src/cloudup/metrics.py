"""Upsampling quality metrics and the Gaussian-noise harness.

Chamfer and Hausdorff distances compare point sets; point-to-surface
distance measures a prediction against the true surface, given either a
triangle mesh or an analytic shape oracle. Raw values are stored
unscaled; the conventional x1000 factor is applied only when reporting.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyMeshError
from .geometry import NeighborIndex
from .validation import check_points, check_rng

REPORT_SCALE = 1e3


def chamfer(a, b):
    """Symmetric Chamfer distance (first-power Euclidean, halved mean).

    CD = 1/2 * (mean_a min_b ||p - q|| + mean_b min_a ||p - q||).
    """
    a = check_points(a, "a")
    b = check_points(b, "b")
    a_to_b = NeighborIndex(b).nearest_distances(a)
    b_to_a = NeighborIndex(a).nearest_distances(b)
    return 0.5 * (float(np.mean(a_to_b)) + float(np.mean(b_to_a)))


def hausdorff(a, b):
    """Symmetric Hausdorff distance: the worst nearest-point distance."""
    a = check_points(a, "a")
    b = check_points(b, "b")
    a_to_b = NeighborIndex(b).nearest_distances(a)
    b_to_a = NeighborIndex(a).nearest_distances(b)
    return max(float(np.max(a_to_b)), float(np.max(b_to_a)))


@dataclass(frozen=True)
class TriangleMesh:
    """An indexed triangle soup used as a point-to-surface reference."""

    vertices: np.ndarray   # (V, 3)
    triangles: np.ndarray  # (F, 3) integer indices

    def __post_init__(self):
        vertices = check_points(self.vertices, "vertices")
        triangles = np.asarray(self.triangles, dtype=np.intp)
        if triangles.ndim != 2 or triangles.shape[1] != 3 or triangles.shape[0] == 0:
            raise EmptyMeshError("mesh needs at least one triangle of three indices")
        if triangles.min() < 0 or triangles.max() >= vertices.shape[0]:
            raise ValueError("triangle indices out of vertex range")
        a, b, c = (vertices[triangles[:, i]] for i in range(3))
        areas = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
        if np.any(areas <= 1e-12):
            raise ValueError(f"triangle {int(np.argmax(areas <= 1e-12))} is degenerate")
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "triangles", triangles)

    def corners(self):
        return tuple(self.vertices[self.triangles[:, i]] for i in range(3))


def point_triangle_distances(points, a, b, c):
    """Exact distances from each point to each triangle, shape (M, F).

    Closest points are resolved by the standard seven-region case
    analysis (vertices, edges, face) on the barycentric plane.
    """
    p = np.asarray(points, dtype=np.float64)[:, None, :]   # (M, 1, 3)
    a = np.asarray(a, dtype=np.float64)[None, :, :]        # (1, F, 3)
    b = np.asarray(b, dtype=np.float64)[None, :, :]
    c = np.asarray(c, dtype=np.float64)[None, :, :]

    ab = b - a
    ac = c - a
    ap = p - a
    d1 = (ab * ap).sum(axis=2)
    d2 = (ac * ap).sum(axis=2)
    bp = p - b
    d3 = (ab * bp).sum(axis=2)
    d4 = (ac * bp).sum(axis=2)
    cp = p - c
    d5 = (ab * cp).sum(axis=2)
    d6 = (ac * cp).sum(axis=2)

    shape = d1.shape
    closest = np.empty(shape + (3,))
    done = np.zeros(shape, dtype=bool)

    def settle(mask, value):
        take = mask & ~done
        closest[take] = np.broadcast_to(value, shape + (3,))[take]
        done[take] = True

    settle((d1 <= 0) & (d2 <= 0), a)                                   # vertex a
    settle((d3 >= 0) & (d4 <= d3), b)                                  # vertex b
    settle((d6 >= 0) & (d5 <= d6), c)                                  # vertex c

    vc = d1 * d4 - d3 * d2
    with np.errstate(invalid="ignore", divide="ignore"):
        v_ab = d1 / (d1 - d3)
    settle((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + v_ab[..., None] * ab)  # edge ab

    vb = d5 * d2 - d1 * d6
    with np.errstate(invalid="ignore", divide="ignore"):
        w_ac = d2 / (d2 - d6)
    settle((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + w_ac[..., None] * ac)  # edge ac

    va = d3 * d6 - d5 * d4
    with np.errstate(invalid="ignore", divide="ignore"):
        w_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
    settle(
        (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0),
        b + w_bc[..., None] * (c - b),
    )                                                                   # edge bc

    denom = va + vb + vc
    with np.errstate(invalid="ignore", divide="ignore"):
        v = vb / denom
        w = vc / denom
    settle(np.ones(shape, dtype=bool), a + v[..., None] * ab + w[..., None] * ac)

    return np.linalg.norm(p - closest, axis=2)


def p2f(pred, surface):
    """Mean exact point-to-surface distance of a predicted cloud.

    ``surface`` is a :class:`TriangleMesh` or any object exposing a
    ``distance(points)`` method (an analytic shape oracle or field).
    """
    pred = check_points(pred, "pred")
    if isinstance(surface, TriangleMesh):
        a, b, c = surface.corners()
        return float(point_triangle_distances(pred, a, b, c).min(axis=1).mean())
    if hasattr(surface, "distance"):
        return float(np.mean(surface.distance(pred)))
    raise TypeError(f"unsupported surface reference: {type(surface).__name__}")


def add_noise(points, tau, rng):
    """Perturb every coordinate with independent Gaussian noise of std tau."""
    points = check_points(points)
    if tau < 0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    rng = check_rng(rng)
    return points + rng.normal(0.0, tau, size=points.shape)


@dataclass(frozen=True)
class MetricReport:
    """CD/HD(/P2F) values; raw numbers, with x1000 applied only on display."""

    cd: float
    hd: float
    p2f: float = None

    def rows(self):
        rows = [("cd", self.cd), ("hd", self.hd)]
        if self.p2f is not None:
            rows.append(("p2f", self.p2f))
        return [(name, value, value * REPORT_SCALE) for name, value in rows]


def evaluate(pred, gt, surface=None):
    """Compute the standard metric set for a prediction."""
    return MetricReport(
        cd=chamfer(pred, gt),
        hd=hausdorff(pred, gt),
        p2f=None if surface is None else p2f(pred, surface),
    )
