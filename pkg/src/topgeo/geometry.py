"""Deterministic point-cloud primitives.

Clouds are plain ``(n, 3)`` float64 arrays. Neighbor selection and farthest
point sampling break ties canonically, by distance, then coordinates, then
index, so their results as coordinate sets do not depend on row order.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from . import tensor as T
from .errors import CardinalityError, DegenerateInputError, NumericError, ShapeError

IDW_EPS = 1e-8


@dataclass(frozen=True)
class NormalizationRecord:
    centroid: np.ndarray
    furthest_distance: float


@dataclass(frozen=True)
class NeighborIndex:
    indices: np.ndarray
    distances: np.ndarray

    @property
    def k(self):
        return self.indices.shape[1]


def as_cloud(points, min_points=1):
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ShapeError(f"expected an (n, 3) cloud, got shape {pts.shape}")
    if len(pts) < min_points:
        raise CardinalityError(f"need at least {min_points} points, got {len(pts)}")
    if not np.all(np.isfinite(pts)):
        raise NumericError("cloud contains non-finite coordinates")
    return pts


def exact_centroid(points):
    # correctly rounded sums make the centroid independent of row order
    return np.array([math.fsum(points[:, c]) / len(points) for c in range(3)])


def normalize_unit_sphere(points):
    pts = as_cloud(points, min_points=2)
    centroid = exact_centroid(pts)
    centered = pts - centroid
    fd = float(np.sqrt((centered * centered).sum(axis=1)).max())
    if fd == 0.0:
        raise DegenerateInputError("all points coincide; cannot normalize")
    return centered / fd, NormalizationRecord(centroid, fd)


def denormalize(points, rec):
    if not rec.furthest_distance > 0:
        raise DegenerateInputError("furthest_distance must be positive")
    return as_cloud(points) * rec.furthest_distance + rec.centroid


def fps(points, m):
    """Greedy farthest point sampling, returning ``m`` indices in selection order.

    The seed is the point farthest from the centroid.
    """
    pts = as_cloud(points)
    if not 1 <= m <= len(pts):
        raise CardinalityError(f"fps needs 1 <= m <= n, got m={m}, n={len(pts)}")
    return kernels.fps(pts, int(m), exact_centroid(pts))


def knn(query, source, k, exclude=None):
    """k nearest neighbors of every query row among ``source``.

    ``exclude`` gives, per query row, a source index to skip (its own
    identity), or -1. Passing ``exclude="self"`` means query is source.
    """
    q = as_cloud(query)
    s = as_cloud(source)
    if exclude is None:
        excl = np.full(len(q), -1, dtype=np.int64)
    elif isinstance(exclude, str) and exclude == "self":
        if len(q) != len(s):
            raise ShapeError("self-exclusion requires query to be the source")
        excl = np.arange(len(q), dtype=np.int64)
    else:
        excl = np.ascontiguousarray(exclude, dtype=np.int64)
        if excl.shape != (len(q),):
            raise ShapeError(f"exclude must have one entry per query, got {excl.shape}")
    available = len(s) - (1 if np.any(excl >= 0) else 0)
    if k < 1 or k > available:
        raise CardinalityError(f"knn needs 1 <= k <= {available} candidates, got k={k}")
    idx, sqd = kernels.knn(q, s, int(k), excl)
    return NeighborIndex(idx, np.sqrt(sqd))


def group_subtract(centroids, source, nbr):
    """Relative vectors ``p_i - p_j`` for every neighbor j of centroid i.

    Accepts arrays or Tensors; the result is a Tensor of shape (n, k, 3).
    """
    centroids, source = T.as_tensor(centroids), T.as_tensor(source)
    if nbr.indices.shape[0] != centroids.shape[0]:
        raise ShapeError("neighbor rows do not match centroid count")
    if nbr.indices.size and (nbr.indices.min() < 0 or nbr.indices.max() >= source.shape[0]):
        raise IndexError("neighbor index out of range")
    return T.expand_dims(centroids, 1) - T.gather_rows(source, nbr.indices)


def inverse_distance_interpolate(points, features, nbr3):
    """Inverse-distance weighted mix of each point's three neighbor features.

    Weights are ``1 / (|p_i - p_j| + 1e-8)``, normalized to sum to one.
    Differentiable in both the points and the features.
    """
    if nbr3.k != 3:
        raise CardinalityError(f"interpolation uses exactly 3 neighbors, got {nbr3.k}")
    points, features = T.as_tensor(points), T.as_tensor(features)
    dist = T.norm(group_subtract(points, points, nbr3), axis=-1)
    w = 1.0 / (dist + IDW_EPS)
    w = w / T.tsum(w, axis=1, keepdims=True)
    gathered = T.gather_rows(features, nbr3.indices)
    return T.tsum(T.expand_dims(w, 2) * gathered, axis=1)
