import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def brute_knn(points, query, k):
    """Exhaustive reference: sort by (distance, index), take the first k."""
    dists = np.linalg.norm(points - query, axis=1)
    order = sorted(range(len(points)), key=lambda i: (dists[i], i))[:k]
    return np.asarray(order), dists[list(order)]


def random_rigid_motion(rng):
    """A rotation matrix and translation for invariance tests."""
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    rotation = np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
    return rotation, rng.normal(size=3)
