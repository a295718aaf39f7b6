"""Both kernel lanes against brute-force oracles and against each other."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orthoscreen import kernels
from orthoscreen.geometry import pairwise_sq_dists
from orthoscreen.kernels import _reference

from .oracles.brute import brute_fps, brute_knn

try:
    from orthoscreen.kernels import _speedups
except ImportError:
    _speedups = None

LANES = [_reference] + ([_speedups] if _speedups else [])


def test_compiled_lane_is_active():
    assert _speedups is not None, "compiled extension failed to build"
    assert kernels.BACKEND == "compiled"


@pytest.mark.parametrize("lane", LANES, ids=lambda m: m.__name__.rsplit("_", 1)[-1])
def test_knn_matches_brute_oracle(lane):
    rng = np.random.default_rng(7)
    for trial in range(60):
        n = int(rng.integers(5, 120))
        k = int(rng.integers(1, min(8, n - 1) + 1))
        pts = rng.normal(size=(n, 3)) * 10.0
        got = lane.knn_from_sq_dists(pairwise_sq_dists(pts), k)
        want = brute_knn(pts.tolist(), k)
        assert got.shape == (n, k)
        assert got.tolist() == want


@pytest.mark.parametrize("lane", LANES, ids=lambda m: m.__name__.rsplit("_", 1)[-1])
@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=4, max_size=24),
       st.integers(1, 3))
def test_knn_grid_ties_break_to_lower_index(lane, grid_pts, k):
    pts = np.asarray(grid_pts, dtype=np.float64)
    pts = np.column_stack([pts, np.zeros(len(pts))])
    if len(pts) <= k:
        return
    got = lane.knn_from_sq_dists(pairwise_sq_dists(pts), k)
    assert got.tolist() == brute_knn(pts.tolist(), k)


@pytest.mark.parametrize("lane", LANES, ids=lambda m: m.__name__.rsplit("_", 1)[-1])
def test_fps_matches_brute_oracle(lane):
    rng = np.random.default_rng(11)
    for trial in range(40):
        n = int(rng.integers(2, 90))
        m = int(rng.integers(1, n + 1))
        start = int(rng.integers(0, n))
        pts = rng.normal(size=(n, 3)) * 5.0
        got = lane.farthest_point_indices(np.ascontiguousarray(pts), m, start)
        assert got.tolist() == brute_fps(pts.tolist(), m, start)


@pytest.mark.parametrize("lane", LANES, ids=lambda m: m.__name__.rsplit("_", 1)[-1])
def test_scatter_add_matches_numpy(lane):
    rng = np.random.default_rng(13)
    for trial in range(30):
        n, r, c = int(rng.integers(2, 40)), int(rng.integers(1, 200)), int(rng.integers(1, 8))
        out = np.zeros((n, c))
        rows = rng.normal(size=(r, c))
        idx = rng.integers(0, n, size=r)
        want = np.zeros((n, c))
        np.add.at(want, idx, rows)
        lane.scatter_add_rows(out, np.ascontiguousarray(idx, dtype=np.int64),
                              np.ascontiguousarray(rows))
        np.testing.assert_array_equal(out, want)


@pytest.mark.skipif(_speedups is None, reason="compiled extension unavailable")
def test_lanes_bitwise_identical():
    rng = np.random.default_rng(17)
    for trial in range(25):
        n = int(rng.integers(5, 150))
        k = int(rng.integers(1, min(10, n - 1) + 1))
        pts = rng.normal(size=(n, 3))
        d2 = pairwise_sq_dists(pts)
        np.testing.assert_array_equal(
            _reference.knn_from_sq_dists(d2, k), _speedups.knn_from_sq_dists(d2, k))
        m = int(rng.integers(1, n + 1))
        np.testing.assert_array_equal(
            _reference.farthest_point_indices(pts, m, 0),
            _speedups.farthest_point_indices(pts, m, 0))
