"""Distance kernels and the brute-force nearest-neighbor oracle.

All comparisons use squared Euclidean distance; argmin is invariant under the
square root and clustering scores are defined as sums of squared distances.
Default accumulation is float32 (matching the search kernels); a float64
accumulator is available behind a flag for verification work.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .errors import ContractViolation


class DistanceCounter:
    """Process-wide tally of squared-distance evaluations, for instrumentation."""

    def __init__(self):
        self.count = 0

    def add(self, n):
        self.count += int(n)

    def reset(self):
        self.count = 0


counter = DistanceCounter()


def _as32(v):
    return np.ascontiguousarray(v, dtype=np.float32)


def sq_l2(a, b, *, float64_accumulate=False):
    """Squared Euclidean distance between two vectors."""
    a = _as32(a)
    b = _as32(b)
    if a.shape != b.shape:
        raise ContractViolation(f"dimension mismatch: {a.shape} vs {b.shape}")
    counter.add(1)
    if float64_accumulate:
        return float(_kernels.sqdist64(a, b))
    return float(_kernels.sqdist32(a, b))


def dists_to_all(q, C):
    """Squared distances from q to every row of C (float32 accumulation)."""
    q = _as32(q)
    C = _as32(C)
    counter.add(C.shape[0])
    return _kernels.dists_all(C, q)


def nearest_brute(q, C, m=1):
    """The exact m nearest rows of C to q, ascending, ties to the lower index.

    Returns a list of (index, squared_distance) pairs. This is the ground
    truth oracle for every recall and equivalence test in the suite.
    """
    C = np.asarray(C)
    if C.ndim != 2 or C.shape[0] == 0:
        raise ContractViolation("C must be a non-empty 2-D array of vectors")
    if m > C.shape[0]:
        raise ContractViolation(f"m={m} exceeds |C|={C.shape[0]}")
    d = dists_to_all(q, C)
    order = np.argsort(d, kind="stable")[:m]
    return [(int(i), float(d[i])) for i in order]
