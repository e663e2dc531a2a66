"""Analytic surfaces with exact unsigned distance, and patch datasets.

Each shape knows its exact Euclidean distance-to-surface everywhere, the
gradient of that distance wherever it is defined (away from the surface
itself and the medial axis), and how to draw area-uniform surface
samples. These act as verifiable ground truth for the learned field.
"""

import math
from dataclasses import dataclass

import numpy as np

from .curvature import fps
from .geometry import NeighborIndex, normalize
from .validation import check_count, check_queries, check_rng

_IDENTITY = np.eye(3)
_ZERO = np.zeros(3)


class ShapeOracle:
    """Base class: pose handling plus the distance/gradient/sample API.

    Subclasses implement the local-frame geometry; the base maps world
    queries through the rigid pose (rotation + translation).
    """

    def __init__(self, rotation=None, translation=None):
        rotation = _IDENTITY if rotation is None else np.asarray(rotation, dtype=np.float64)
        translation = _ZERO if translation is None else np.asarray(translation, dtype=np.float64)
        if rotation.shape != (3, 3) or translation.shape != (3,):
            raise ValueError("pose must be a (3, 3) rotation and a (3,) translation")
        if not np.allclose(rotation.T @ rotation, _IDENTITY, atol=1e-12):
            raise ValueError("pose rotation must be orthonormal")
        if np.linalg.det(rotation) <= 0:
            raise ValueError("pose rotation must be proper (det > 0)")
        self.rotation = rotation
        self.translation = translation

    def distance(self, queries):
        """Exact unsigned distance from each query to the surface."""
        queries, single = check_queries(queries)
        dist, _, _ = self._local_distance_gradient(self._to_local(queries))
        return float(dist[0]) if single else dist

    def distance_gradient(self, queries):
        """Distance, gradient, and a gradient-defined flag per query.

        The gradient is the unit direction of steepest distance increase.
        It is undefined (flag False, gradient zeroed) on the surface and on
        the medial axis, where the nearest surface point is not unique.
        """
        queries, single = check_queries(queries)
        dist, grad, defined = self._local_distance_gradient(self._to_local(queries))
        grad = grad @ self.rotation.T
        if single:
            return float(dist[0]), grad[0], bool(defined[0])
        return dist, grad, defined

    def sample_surface(self, n, rng):
        """Draw ``n`` area-uniform surface points, deterministic per seed."""
        n = check_count(n, "n", minimum=1)
        rng = check_rng(rng)
        return self._sample_local(n, rng) @ self.rotation.T + self.translation

    def _to_local(self, queries):
        return (queries - self.translation) @ self.rotation

    def _local_distance_gradient(self, local):
        raise NotImplementedError

    def _sample_local(self, n, rng):
        raise NotImplementedError


class Sphere(ShapeOracle):
    def __init__(self, radius=1.0, **pose):
        super().__init__(**pose)
        if radius <= 0:
            raise ValueError(f"radius must be positive, got {radius}")
        self.radius = float(radius)

    def __repr__(self):
        return f"Sphere(radius={self.radius})"

    def _local_distance_gradient(self, p):
        norms = np.linalg.norm(p, axis=1)
        signed = norms - self.radius
        dist = np.abs(signed)
        defined = (norms > 0.0) & (dist > 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            grad = np.where(defined[:, None], np.sign(signed)[:, None] * p / norms[:, None], 0.0)
        return dist, grad, defined

    def _sample_local(self, n, rng):
        directions = rng.normal(size=(n, 3))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        return self.radius * directions


class Box(ShapeOracle):
    def __init__(self, half_extents=(1.0, 1.0, 1.0), **pose):
        super().__init__(**pose)
        self.half_extents = np.asarray(half_extents, dtype=np.float64)
        if self.half_extents.shape != (3,) or np.any(self.half_extents <= 0):
            raise ValueError("half_extents must be three positive reals")

    def __repr__(self):
        return f"Box(half_extents={tuple(self.half_extents)})"

    def _local_distance_gradient(self, p):
        q = np.abs(p) - self.half_extents
        outside = np.maximum(q, 0.0)
        out_dist = np.linalg.norm(outside, axis=1)
        inner = np.minimum(q.max(axis=1), 0.0)          # negative inside, 0 on/after surface
        dist = np.where(out_dist > 0.0, out_dist, -inner)

        grad = np.zeros_like(p)
        is_out = out_dist > 0.0
        with np.errstate(invalid="ignore", divide="ignore"):
            grad_out = outside * np.sign(p) / np.where(is_out, out_dist, 1.0)[:, None]
        grad[is_out] = grad_out[is_out]

        # Inside: steepest increase points away from the nearest face.
        axis = q.argmax(axis=1)
        rows = np.arange(p.shape[0])
        unique_face = (q == q[rows, axis][:, None]).sum(axis=1) == 1
        off_center = p[rows, axis] != 0.0
        is_in = ~is_out & (dist > 0.0) & unique_face & off_center
        grad[is_in, axis[is_in]] = -np.sign(p[is_in, axis[is_in]])

        defined = (is_out & (dist > 0.0)) | is_in
        grad[~defined] = 0.0
        return dist, grad, defined

    def _sample_local(self, n, rng):
        h = self.half_extents
        face_areas = np.repeat([h[1] * h[2], h[0] * h[2], h[0] * h[1]], 2)
        faces = rng.choice(6, size=n, p=face_areas / face_areas.sum())
        uv = rng.uniform(-1.0, 1.0, size=(n, 2))
        points = np.empty((n, 3))
        for f in range(6):
            mask = faces == f
            axis, side = divmod(f, 2)
            others = [a for a in range(3) if a != axis]
            points[mask, axis] = h[axis] * (1.0 if side == 0 else -1.0)
            points[np.ix_(mask, others)] = uv[mask] * h[others]
        return points


class Torus(ShapeOracle):
    """Torus around the local z-axis with major radius R and tube radius r."""

    def __init__(self, major_radius=1.0, minor_radius=0.25, **pose):
        super().__init__(**pose)
        if not 0 < minor_radius < major_radius:
            raise ValueError("need 0 < minor_radius < major_radius")
        self.major_radius = float(major_radius)
        self.minor_radius = float(minor_radius)

    def __repr__(self):
        return f"Torus(major_radius={self.major_radius}, minor_radius={self.minor_radius})"

    def _local_distance_gradient(self, p):
        rho = np.linalg.norm(p[:, :2], axis=1)
        u = rho - self.major_radius
        ring = np.hypot(u, p[:, 2])                     # distance to the tube's center circle
        signed = ring - self.minor_radius
        dist = np.abs(signed)
        defined = (rho > 0.0) & (ring > 0.0) & (dist > 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            radial = p[:, :2] / rho[:, None]
            grad = np.column_stack(
                [
                    (u / ring)[:, None] * radial,
                    p[:, 2] / ring,
                ]
            )
            grad = np.where(defined[:, None], np.sign(signed)[:, None] * grad, 0.0)
        return dist, grad, defined

    def _sample_local(self, n, rng):
        big_r, small_r = self.major_radius, self.minor_radius
        tube = np.empty(0)
        # Rejection sampling in the tube angle makes the area density uniform.
        while tube.size < n:
            cand = rng.uniform(0.0, 2.0 * math.pi, size=2 * (n - tube.size) + 16)
            accept = rng.uniform(0.0, 1.0, size=cand.size) <= (
                (big_r + small_r * np.cos(cand)) / (big_r + small_r)
            )
            tube = np.concatenate([tube, cand[accept]])
        tube = tube[:n]
        ring = rng.uniform(0.0, 2.0 * math.pi, size=n)
        radial = big_r + small_r * np.cos(tube)
        return np.column_stack(
            [radial * np.cos(ring), radial * np.sin(ring), small_r * np.sin(tube)]
        )


class Plane(ShapeOracle):
    """Plane {p : n.p = offset}; samples are drawn from a square patch."""

    def __init__(self, normal=(0.0, 0.0, 1.0), offset=0.0, extent=1.0, **pose):
        super().__init__(**pose)
        normal = np.asarray(normal, dtype=np.float64)
        norm = np.linalg.norm(normal)
        if normal.shape != (3,) or norm == 0.0:
            raise ValueError("normal must be a nonzero 3-vector")
        if extent <= 0:
            raise ValueError(f"extent must be positive, got {extent}")
        self.normal = normal / norm
        self.offset = float(offset) / norm
        self.extent = float(extent)

    def __repr__(self):
        return f"Plane(normal={tuple(self.normal)}, offset={self.offset})"

    def _local_distance_gradient(self, p):
        signed = p @ self.normal - self.offset
        dist = np.abs(signed)
        defined = dist > 0.0
        grad = np.sign(signed)[:, None] * self.normal
        grad[~defined] = 0.0
        return dist, grad, defined

    def _sample_local(self, n, rng):
        t1, t2 = _plane_basis(self.normal)
        uv = rng.uniform(-self.extent, self.extent, size=(n, 2))
        return self.offset * self.normal + uv[:, :1] * t1 + uv[:, 1:] * t2


def _plane_basis(normal):
    helper = np.zeros(3)
    helper[np.argmin(np.abs(normal))] = 1.0
    t1 = np.cross(normal, helper)
    t1 /= np.linalg.norm(t1)
    return t1, np.cross(normal, t1)


def analytic_udf(oracle, queries):
    """Distance, gradient, and defined flag of ``oracle`` at ``queries``."""
    return oracle.distance_gradient(queries)


def sample_surface(oracle, n, rng):
    """Sample ``n`` area-uniform surface points from ``oracle``."""
    return oracle.sample_surface(n, rng)


_SHAPE_KINDS = {"sphere": Sphere, "box": Box, "torus": Torus, "plane": Plane}


def parse_shape_spec(spec):
    """Parse a shape spec like ``sphere:r=1`` or ``torus:R=2,r=0.5``.

    Grammar: ``kind[:key=value,...]`` with kinds sphere (r), box
    (hx, hy, hz), torus (R, r), and plane (nx, ny, nz, off, ext). Omitted
    keys use each shape's defaults.
    """
    kind, _, rest = spec.strip().partition(":")
    kind = kind.strip().lower()
    if kind not in _SHAPE_KINDS:
        raise ValueError(f"unknown shape kind {kind!r} in spec {spec!r}")
    params = {}
    if rest:
        for item in rest.split(","):
            key, eq, value = item.partition("=")
            key = key.strip()
            if not eq or not key:
                raise ValueError(f"bad shape parameter {item!r} in spec {spec!r}")
            try:
                params[key] = float(value)
            except ValueError:
                raise ValueError(f"bad numeric value {value!r} for {key!r} in spec {spec!r}") from None

    cls = _SHAPE_KINDS[kind]
    if kind == "sphere":
        kwargs = {"radius": params.pop("r", 1.0)}
    elif kind == "torus":
        kwargs = {
            "major_radius": params.pop("R", 1.0),
            "minor_radius": params.pop("r", 0.25),
        }
    elif kind == "box":
        extents = [params.pop(k, 1.0) for k in ("hx", "hy", "hz")]
        kwargs = {"half_extents": extents}
    else:
        normal = [params.pop("nx", 0.0), params.pop("ny", 0.0), params.pop("nz", 0.0)]
        if normal == [0.0, 0.0, 0.0]:
            normal = [0.0, 0.0, 1.0]
        kwargs = {
            "normal": normal,
            "offset": params.pop("off", 0.0),
            "extent": params.pop("ext", 1.0),
        }
    if params:
        raise ValueError(f"unknown parameter(s) {sorted(params)} for shape {kind!r}")
    return cls(**kwargs)


@dataclass(frozen=True)
class PatchPair:
    """A sparse/dense training pair in a shared normalized frame.

    ``dense`` holds rate x sparse_n ground-truth surface samples; ``sparse``
    is its farthest-point subset. ``transform`` maps original (world)
    coordinates into the normalized frame; ``oracle`` is the source surface
    when the pair was generated synthetically.
    """

    sparse: np.ndarray
    dense: np.ndarray
    transform: object
    oracle: object = None

    def oracle_distance(self, queries):
        """Exact surface distance evaluated in the normalized frame."""
        if self.oracle is None:
            raise ValueError("patch has no source oracle")
        world = self.transform.invert(np.atleast_2d(queries))
        return self.oracle.distance(world) / self.transform.scale


def make_patch_dataset(oracles, patches_per_shape, sparse_n, rate, rng, pool_size=None):
    """Build sparse/dense patch pairs from analytic surfaces.

    Each patch picks a random seed point on the surface, takes the
    rate * sparse_n nearest points of a dense surface pool as ground truth,
    subsamples the sparse side by farthest point sampling, and normalizes
    both into the dense cloud's unit frame.

    Args:
        oracles: shape oracles to draw from.
        patches_per_shape: patches generated per oracle.
        sparse_n: sparse patch size (>= 32).
        rate: dense/sparse ratio (integer >= 2).
        rng: int seed or numpy Generator.
        pool_size: surface pool per shape; defaults to max(8 * rate * sparse_n, 8192).

    Returns:
        List of :class:`PatchPair`.
    """
    rate = check_count(rate, "rate", minimum=2)
    sparse_n = check_count(sparse_n, "sparse_n", minimum=32)
    patches_per_shape = check_count(patches_per_shape, "patches_per_shape", minimum=1)
    rng = check_rng(rng)
    pool_n = pool_size or max(8 * rate * sparse_n, 8192)

    pairs = []
    for oracle in oracles:
        pool = oracle.sample_surface(pool_n, rng)
        index = NeighborIndex(pool)
        seeds = oracle.sample_surface(patches_per_shape, rng)
        for seed_point in np.atleast_2d(seeds):
            idx, _ = index.knn(seed_point, rate * sparse_n)
            dense = pool[idx]
            sparse_pts, _ = fps(dense, sparse_n, start_index=0)
            dense_norm, transform = normalize(dense)
            pairs.append(
                PatchPair(
                    sparse=transform.apply(sparse_pts),
                    dense=dense_norm,
                    transform=transform,
                    oracle=oracle,
                )
            )
    return pairs
