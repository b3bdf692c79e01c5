"""Locations, distances, exact nearest-neighbour queries and maxmin ordering.

Locations are plain ``(n, 2)`` float arrays throughout the package.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from . import _kernels


def as_locations(points) -> np.ndarray:
    """Validate and return ``points`` as a float ``(n, 2)`` array."""
    S = np.asarray(points, dtype=float)
    if S.ndim == 1 and S.shape[0] == 2:
        S = S[None, :]
    if S.ndim != 2 or S.shape[1] != 2:
        raise ValueError(f"locations must have shape (n, 2), got {S.shape}")
    if not np.all(np.isfinite(S)):
        raise ValueError("locations contain non-finite coordinates")
    return S


def has_duplicates(points) -> bool:
    """True if any two rows of ``points`` share identical coordinates."""
    S = as_locations(points)
    return len(np.unique(S, axis=0)) < len(S)


def euclidean_distance(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("coordinates must be finite")
    return float(np.hypot(a[0] - b[0], a[1] - b[1]))


def pairwise_distances(A, B=None) -> np.ndarray:
    """Dense Euclidean distance matrix between the rows of ``A`` and ``B``."""
    A = np.asarray(A, dtype=float)
    B = A if B is None else np.asarray(B, dtype=float)
    dx = A[:, None, 0] - B[None, :, 0]
    dy = A[:, None, 1] - B[None, :, 1]
    return np.hypot(dx, dy)


def _ordered_by_distance(dist, idx, k):
    order = np.lexsort((idx, dist))[:k]
    return dist[order], idx[order]


class SpatialIndex:
    """Exact k-nearest-neighbour and radius queries over a fixed point set.

    Backed by a kd-tree. Results are sorted by distance with ties broken by
    the lowest point index, so every query is reproducible.
    """

    def __init__(self, points):
        S = as_locations(points)
        if len(S) == 0:
            raise ValueError("empty location set")
        self.points = S
        self.count = len(S)
        self._tree = cKDTree(S)

    def knn(self, q, k: int):
        """Return ``(distances, indices)`` of the ``min(k, count)`` nearest points to ``q``."""
        q = np.asarray(q, dtype=float).reshape(2)
        k = min(int(k), self.count)
        if k < 1:
            raise ValueError("k must be at least 1")
        kq = min(k + 1, self.count)
        dist, idx = self._tree.query(q, k=kq)
        dist = np.atleast_1d(dist)
        idx = np.atleast_1d(idx)
        if kq > k and dist[k] > dist[k - 1]:
            return _ordered_by_distance(dist, idx, k)
        if kq == self.count:
            return _ordered_by_distance(dist, idx, k)
        # a tie straddles the k-th position; collect every point at that radius
        cand = np.asarray(self._tree.query_ball_point(q, dist[k - 1] * (1 + 1e-12) + 1e-300), dtype=int)
        d = np.hypot(self.points[cand, 0] - q[0], self.points[cand, 1] - q[1])
        return _ordered_by_distance(d, cand, k)

    def knn_many(self, Q, k: int):
        """Vectorised :meth:`knn` over the rows of ``Q``; returns ``(n_q, k)`` arrays."""
        Q = as_locations(Q)
        k = min(int(k), self.count)
        kq = min(k + 1, self.count)
        dist, idx = self._tree.query(Q, k=kq)
        dist = dist.reshape(len(Q), kq)
        idx = idx.reshape(len(Q), kq)
        order = np.lexsort((idx, dist), axis=1)
        dist = np.take_along_axis(dist, order, axis=1)
        idx = np.take_along_axis(idx, order, axis=1)
        out_d, out_i = dist[:, :k].copy(), idx[:, :k].copy()
        if kq > k:
            risky = np.flatnonzero(dist[:, k] <= dist[:, k - 1])
            for r in risky:
                out_d[r], out_i[r] = self.knn(Q[r], k)
        return out_d, out_i

    def within(self, q, radius: float) -> np.ndarray:
        """Indices of points within ``radius`` of ``q``, sorted by distance then index."""
        q = np.asarray(q, dtype=float).reshape(2)
        cand = np.asarray(self._tree.query_ball_point(q, radius), dtype=int)
        d = np.hypot(self.points[cand, 0] - q[0], self.points[cand, 1] - q[1])
        return cand[np.lexsort((cand, d))]


def build_index(points) -> SpatialIndex:
    return SpatialIndex(points)


def maxmin_order(points) -> np.ndarray:
    """Maximum-minimum-distance ordering of ``points``.

    The first point is the one nearest the coordinate-wise centroid. Each
    subsequent point maximises its minimum distance to those already chosen.
    Ties go to the lowest original index.
    """
    S = as_locations(points)
    n = len(S)
    if n == 0:
        raise ValueError("empty location set")
    centroid = S.mean(axis=0)
    first = int(np.argmin(np.hypot(S[:, 0] - centroid[0], S[:, 1] - centroid[1])))
    order = np.empty(n, dtype=np.int64)
    _kernels.maxmin_fill(np.ascontiguousarray(S), first, order)
    return order.astype(np.intp)
