"""Numpy implementations of the hot kernels.

These are the reference semantics; the compiled extension in _core.pyx must
produce bit-identical results. Only +, * and comparisons on float64 are used,
with squared components accumulated strictly left-to-right, so IEEE-754
guarantees exact agreement between backends.

Position kernels are 3-d; detector/antigen kernels are 6-d (the behavior
feature space).
"""

import numpy as np

BACKEND = "numpy"


def _sq6(d):
    # left-to-right accumulation, matching the C loop order
    s = d[..., 0] * d[..., 0]
    s = s + d[..., 1] * d[..., 1]
    s = s + d[..., 2] * d[..., 2]
    s = s + d[..., 3] * d[..., 3]
    s = s + d[..., 4] * d[..., 4]
    s = s + d[..., 5] * d[..., 5]
    return s


def in_range_mask(positions, x, y, z, r2):
    """Boolean mask of rows of (n, 3) `positions` within sqrt(r2) of (x, y, z)."""
    dx = positions[:, 0] - x
    dy = positions[:, 1] - y
    dz = positions[:, 2] - z
    s = dx * dx
    s = s + dy * dy
    s = s + dz * dz
    return s <= r2


def any_match(centers, r2, point):
    """True if any of the (m, 6) centers lies within sqrt(r2) of the 6-d point."""
    if centers.shape[0] == 0:
        return False
    return bool(np.any(_sq6(centers - point) <= r2))


def match_mask(points, centers, r2):
    """For each (k, 6) point, whether any of the (m, 6) centers covers it."""
    n = points.shape[0]
    if centers.shape[0] == 0:
        return np.zeros(n, dtype=bool)
    out = np.empty(n, dtype=bool)
    for i in range(n):
        out[i] = bool(np.any(_sq6(centers - points[i]) <= r2))
    return out


def nonself_mask(candidates, self_set, r2):
    """For each candidate detector center, True if it matches NO self point."""
    n = candidates.shape[0]
    if self_set.shape[0] == 0:
        return np.ones(n, dtype=bool)
    out = np.empty(n, dtype=bool)
    for i in range(n):
        out[i] = not bool(np.any(_sq6(self_set - candidates[i]) <= r2))
    return out
