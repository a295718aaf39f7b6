"""Frames, neighbour queries, PCA axes."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orthoscreen.geometry import (DegenerateCloud, DegenerateLandmarks, TooFewPoints,
                                  build_tooth_frame, farthest_point_sample, knn_indices,
                                  pairwise_sq_dists, principal_axes, rotation_about_z)

from .oracles.brute import brute_knn

finite = st.floats(-50.0, 50.0, allow_nan=False, allow_infinity=False)
vec3 = st.tuples(finite, finite, finite)


def _assert_orthonormal_right_handed(axes):
    np.testing.assert_allclose(axes @ axes.T, np.eye(3), atol=1e-9)
    assert np.linalg.det(axes) > 0.0


@settings(max_examples=60, deadline=None)
@given(vec3, vec3, vec3, vec3)
def test_tooth_frame_orthonormal_right_handed(mesial, distal, buccal, lingual):
    try:
        frame = build_tooth_frame(mesial, distal, buccal, lingual)
    except DegenerateLandmarks:
        return
    _assert_orthonormal_right_handed(frame.axes)
    d = np.asarray(distal, dtype=np.float64) - np.asarray(mesial, dtype=np.float64)
    np.testing.assert_allclose(frame.e1, d / np.linalg.norm(d), atol=1e-9)
    assert abs(frame.e1 @ frame.e2) < 1e-9


def test_tooth_frame_degenerate_landmarks():
    p = (1.0, 2.0, 3.0)
    with pytest.raises(DegenerateLandmarks):
        build_tooth_frame(p, p, (0, 1, 0), (0, -1, 0))
    with pytest.raises(DegenerateLandmarks):
        build_tooth_frame((0, 0, 0), (1, 0, 0), (2, 0, 0), (3, 0, 0))


def test_frame_round_trip():
    frame = build_tooth_frame((0, 0, 0), (2, 0, 0), (1, 1, 0), (1, -1, 0))
    pts = np.random.default_rng(0).normal(size=(10, 3))
    np.testing.assert_allclose(frame.to_world(frame.to_local(pts)), pts, atol=1e-12)


def test_pairwise_sq_dists_nonnegative_zero_diag():
    pts = np.random.default_rng(1).normal(size=(40, 3))
    d2 = pairwise_sq_dists(pts)
    assert d2.min() >= 0.0
    np.testing.assert_allclose(np.diag(d2), 0.0, atol=1e-12)
    i, j = 3, 17
    np.testing.assert_allclose(d2[i, j], np.sum((pts[i] - pts[j]) ** 2), atol=1e-9)


def test_knn_excludes_self_and_matches_brute():
    rng = np.random.default_rng(2)
    pts = rng.normal(size=(50, 3))
    idx = knn_indices(pts, 4)
    assert idx.shape == (50, 4)
    for i in range(50):
        assert i not in idx[i]
    assert idx.tolist() == brute_knn(pts.tolist(), 4)


def test_knn_requires_enough_points():
    pts = np.zeros((3, 3))
    with pytest.raises(TooFewPoints):
        knn_indices(pts, 3)
    with pytest.raises(ValueError):
        knn_indices(np.zeros((5, 3)), 0)


def test_fps_no_repeats_and_spread():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(200, 3))
    idx = farthest_point_sample(pts, 50)
    assert len(set(idx.tolist())) == 50
    # the default start is the point farthest from the centroid
    offsets = pts - pts.mean(axis=0)
    assert idx[0] == int(np.argmax(np.einsum("ij,ij->i", offsets, offsets)))
    with pytest.raises(TooFewPoints):
        farthest_point_sample(pts, 201)


def test_principal_axes_recovers_ellipsoid_directions():
    rng = np.random.default_rng(4)
    local = rng.normal(size=(4000, 3)) * np.array([5.0, 2.0, 0.5])
    rot = rotation_about_z(0.7)
    pts = local @ rot.T + np.array([10.0, -3.0, 2.0])
    frame, eigvals = principal_axes(pts)
    _assert_orthonormal_right_handed(frame.axes)
    assert eigvals[0] >= eigvals[1] >= eigvals[2] >= 0.0
    np.testing.assert_allclose(frame.origin, pts.mean(axis=0), atol=1e-12)
    want = [rot @ np.array([1.0, 0, 0]), rot @ np.array([0, 1.0, 0]), np.array([0, 0, 1.0])]
    for got, expect in zip(frame.axes, want):
        assert abs(got @ expect) > 0.999


def test_principal_axes_ref_dirs_fix_signs():
    rng = np.random.default_rng(5)
    pts = rng.normal(size=(500, 3)) * np.array([4.0, 1.5, 0.3])
    refs = (np.array([1.0, 0, 0]), np.array([0, 1.0, 0]), np.array([0, 0, 1.0]))
    frame, _ = principal_axes(pts, ref_dirs=refs)
    for axis, ref in zip(frame.axes, refs):
        assert axis @ ref >= 0.0


def test_principal_axes_degenerate():
    with pytest.raises(DegenerateCloud):
        principal_axes(np.zeros((1, 3)))
    with pytest.raises(DegenerateCloud):
        principal_axes(np.ones((20, 3)) * 3.0)


def test_rotation_about_z_properties():
    r = rotation_about_z(np.pi / 3)
    _assert_orthonormal_right_handed(r)
    np.testing.assert_allclose(r @ np.array([0, 0, 1.0]), [0, 0, 1.0], atol=1e-15)
