import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def brute_nn_ids(points, queries):
    """Exact nearest-neighbor index per query (ties to lower index)."""
    out = np.empty(len(queries), np.int64)
    p64 = points.astype(np.float64)
    for i, q in enumerate(queries):
        d = np.sum((p64 - q.astype(np.float64)) ** 2, axis=1)
        out[i] = int(np.argmin(d))
    return out
