"""Rigid frames, neighbour queries and principal-axis fitting.

Everything here works on plain float64 arrays in millimetres. The orthonormal
tooth frame convention is: e1 mesiodistal (mesial -> distal), e2 buccolingual
(lingual -> buccal, orthogonalized), e3 = e1 x e2. Frames are right-handed.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError

_TOL = 1e-6


class DegenerateLandmarks(DomainError):
    """Landmarks too close or collinear to span a frame."""


class TooFewPoints(DomainError):
    """Not enough points for the requested neighbour count or sample size."""


class DegenerateCloud(DomainError):
    """Point set has no spatial extent to fit axes to."""


@dataclass(eq=False)
class Frame3:
    """Orthonormal right-handed frame: ``axes`` rows are e1, e2, e3."""

    axes: np.ndarray
    origin: np.ndarray

    @property
    def e1(self):
        return self.axes[0]

    @property
    def e2(self):
        return self.axes[1]

    @property
    def e3(self):
        return self.axes[2]

    def to_local(self, points):
        """World coordinates -> frame coordinates."""
        return (np.asarray(points, dtype=np.float64) - self.origin) @ self.axes.T

    def to_world(self, local):
        """Frame coordinates -> world coordinates."""
        return np.asarray(local, dtype=np.float64) @ self.axes + self.origin


def _unit(v, what):
    n = float(np.linalg.norm(v))
    if n < _TOL:
        raise DegenerateLandmarks(f"{what} has near-zero length ({n:.3g} mm)")
    return v / n


def build_tooth_frame(mesial, distal, buccal, lingual):
    """Frame from four crown landmarks; origin is their centroid.

    e1 runs mesial -> distal, e2 is the lingual -> buccal direction made
    orthogonal to e1 (Gram-Schmidt), e3 completes the right-handed triad.
    """
    mesial, distal, buccal, lingual = (
        np.asarray(p, dtype=np.float64) for p in (mesial, distal, buccal, lingual)
    )
    e1 = _unit(distal - mesial, "mesiodistal span")
    raw = buccal - lingual
    if np.linalg.norm(raw) < _TOL:
        raise DegenerateLandmarks("buccolingual span has near-zero length")
    residual = raw - (raw @ e1) * e1
    if np.linalg.norm(residual) < _TOL:
        raise DegenerateLandmarks("buccolingual span is parallel to the mesiodistal axis")
    e2 = residual / np.linalg.norm(residual)
    e3 = _unit(np.cross(e1, e2), "frame normal")
    origin = np.mean(np.stack([mesial, distal, buccal, lingual]), axis=0)
    return Frame3(axes=np.stack([e1, e2, e3]), origin=origin)


def pairwise_sq_dists(points):
    """Dense (N, N) squared euclidean distances via the gram identity."""
    pts = np.ascontiguousarray(points, dtype=np.float64)
    sq = np.einsum("ij,ij->i", pts, pts)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (pts @ pts.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def knn_indices(points, k):
    """Per-point indices of the k nearest other points, ascending by distance.

    Ties break toward the lower index. Requires N > k so every point has k
    distinct neighbours.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    n = pts.shape[0]
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if n <= k:
        raise TooFewPoints(f"need more than k={k} points, got {n}")
    return kernels.knn_from_sq_dists(pairwise_sq_dists(pts), k)


def knn_from_sq_dists(d2, k):
    """k-selection on a precomputed squared-distance matrix (see knn_indices)."""
    d2 = np.ascontiguousarray(d2, dtype=np.float64)
    n = d2.shape[0]
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if n <= k:
        raise TooFewPoints(f"need more than k={k} points, got {n}")
    return kernels.knn_from_sq_dists(d2, k)


def farthest_point_sample(points, m, start=None):
    """Greedy farthest-point subsample of m indices.

    ``start`` defaults to the point farthest from the centroid. Deterministic:
    ties take the first occurrence, duplicates cannot be picked twice while
    distinct points remain.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    n = pts.shape[0]
    if m < 1:
        raise ValueError(f"sample size must be positive, got {m}")
    if m > n:
        raise TooFewPoints(f"cannot sample {m} of {n} points")
    if start is None:
        offsets = pts - pts.mean(axis=0)
        start = int(np.argmax(np.einsum("ij,ij->i", offsets, offsets)))
    elif not 0 <= start < n:
        raise ValueError(f"start index {start} out of range for {n} points")
    return kernels.farthest_point_indices(pts, m, int(start))


def principal_axes(points, ref_dirs=None):
    """Centroid-centred PCA frame plus descending eigenvalues.

    Eigenvectors are ordered by decreasing eigenvalue. Each axis is sign-fixed
    to a nonnegative dot with the matching row of ``ref_dirs`` when given
    (largest-magnitude component made positive otherwise), then right-handedness
    is enforced by flipping e3 if needed.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (N, 3) points, got {pts.shape}")
    if pts.shape[0] < 2:
        raise DegenerateCloud(f"need at least 2 points, got {pts.shape[0]}")
    centroid = pts.mean(axis=0)
    centred = pts - centroid
    cov = centred.T @ centred / pts.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    eigvals = np.clip(eigvals[::-1], 0.0, None)
    axes = eigvecs[:, ::-1].T.copy()
    if eigvals[0] <= _TOL * _TOL:
        raise DegenerateCloud("points are coincident; covariance has no rank")
    for i in range(3):
        d = float(axes[i] @ ref_dirs[i]) if ref_dirs is not None else 0.0
        if d < 0.0:
            axes[i] = -axes[i]
        elif d == 0.0 and axes[i][np.argmax(np.abs(axes[i]))] < 0.0:
            axes[i] = -axes[i]
    if np.linalg.det(axes) < 0.0:
        axes[2] = -axes[2]
    return Frame3(axes=axes, origin=centroid), eigvals


def rotation_about_z(theta):
    """3x3 rotation matrix about the +z axis by ``theta`` radians."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
