"""Array kernels with a compiled fast path and a pure-numpy fallback.

The compiled extension is used when it imported successfully; setting the
environment variable ``ORTHOSCREEN_PURE=1`` forces the numpy reference lane
(useful for benchmarking one lane against the other). Both lanes are written
to produce bitwise-identical outputs, so nothing downstream depends on which
one is active. ``BACKEND`` reports the choice.
"""

import os

from . import _reference

BACKEND = "reference"
_impl = _reference

if os.environ.get("ORTHOSCREEN_PURE", "") in ("", "0"):
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        pass

knn_from_sq_dists = _impl.knn_from_sq_dists
farthest_point_indices = _impl.farthest_point_indices
scatter_add_rows = _impl.scatter_add_rows

__all__ = [
    "BACKEND",
    "knn_from_sq_dists",
    "farthest_point_indices",
    "scatter_add_rows",
]
