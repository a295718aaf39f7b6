"""Reference numpy implementations of the array kernels.

These are the semantics contract for the compiled lane: for identical inputs
the compiled kernels must return bitwise-identical outputs.  Keep any change
here in lockstep with ``_speedups.pyx``.
"""

import numpy as np


def knn_from_sq_dists(d2, k):
    """Indices of the k nearest neighbours per row of a squared-distance matrix.

    The diagonal (self-distance) is excluded.  Rows are sorted ascending by
    distance; equal distances break toward the lower column index.
    """
    d = np.array(d2, dtype=np.float64, copy=True)
    np.fill_diagonal(d, np.inf)
    order = np.argsort(d, axis=1, kind="stable")
    return np.ascontiguousarray(order[:, :k].astype(np.int64))


def farthest_point_indices(points, m, start):
    """Greedy farthest-point subsample of m indices, seeded at ``start``.

    Each step picks the point with the largest squared distance to the
    selected set (first occurrence on ties).  Selected points are masked out
    with a negative sentinel so duplicates in the input cannot be re-picked.
    """
    pts = np.asarray(points, dtype=np.float64)
    out = np.empty(m, dtype=np.int64)
    out[0] = start
    diff = pts - pts[start]
    best = np.einsum("ij,ij->i", diff, diff)
    best[start] = -1.0
    for i in range(1, m):
        nxt = int(np.argmax(best))
        out[i] = nxt
        diff = pts - pts[nxt]
        np.minimum(best, np.einsum("ij,ij->i", diff, diff), out=best)
        best[nxt] = -1.0
    return out


def scatter_add_rows(out, idx, rows):
    """Accumulate ``rows[i]`` into ``out[idx[i]]``, repeats allowed, in order."""
    np.add.at(out, idx, rows)
