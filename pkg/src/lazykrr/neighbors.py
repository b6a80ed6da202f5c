"""Exact M-nearest-neighbor queries and canonical cell keys.

Ties are broken by ascending training index, so a query's neighbor tuple is a
deterministic function of the query point.
"""

import warnings

import numpy as np
from scipy.spatial import cKDTree

from . import _accel
from .errors import InputError
from .kernels import METRICS, _canonical, as_points

# kd-trees stop paying off in high dimension
KDTREE_MAX_DIM = 24


def clamp_bandwidth(M, N, warn=True):
    M = int(M)
    if M < 1:
        raise InputError(f"bandwidth M must be >= 1, got {M}")
    if M > N:
        if warn:
            warnings.warn(f"bandwidth M={M} exceeds N={N}; using M={N}", RuntimeWarning, stacklevel=3)
        return N
    return M


class NeighborIndex:
    """Exact nearest-neighbor search over a fixed point set.

    ``method`` is ``"kdtree"``, ``"brute"`` or ``"auto"`` (kd-tree up to
    ``KDTREE_MAX_DIM`` dimensions). The kd-tree only proposes candidates;
    final distances come from the same routine as the brute-force scan and
    queries whose M-th neighbor is (nearly) tied fall back to the scan.
    """

    def __init__(self, X, metric="euclidean", method="auto"):
        X = as_points(X)
        if X.shape[0] == 0:
            raise InputError("cannot build a neighbor index on an empty point set")
        self.X = np.ascontiguousarray(X)
        self.metric = _canonical(metric, METRICS, "metric")
        self._code = _accel.METRICS[self.metric]
        if method == "auto":
            method = "kdtree" if X.shape[1] <= KDTREE_MAX_DIM else "brute"
        if method not in ("kdtree", "brute"):
            raise InputError(f"unknown index method {method!r}")
        self.method = method
        self._tree = cKDTree(self.X) if method == "kdtree" else None

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def dim(self):
        return self.X.shape[1]

    def query(self, Z, M, warn=True):
        """Batch query: ``(idx, dist)`` arrays of shape (P, min(M, N))."""
        Z = as_points(Z, "Z")
        if Z.shape[1] != self.dim:
            raise InputError(f"dimension mismatch: index has D={self.dim}, query has {Z.shape[1]}")
        M = clamp_bandwidth(M, self.n, warn=warn)
        if Z.shape[0] == 0:
            return np.empty((0, M), dtype=np.int64), np.empty((0, M))
        if self._tree is None:
            return _accel.brute_knn(self.X, Z, M, self._code)
        return self._tree_query(Z, M)

    def _tree_query(self, Z, M):
        k = min(self.n, M + 1)
        p = 2 if self._code == 0 else 1
        _, cand = self._tree.query(Z, k=k, p=p, workers=-1)
        cand = np.asarray(cand, dtype=np.int64).reshape(Z.shape[0], k)
        dist = _accel.row_distances(Z, self.X, cand, self._code)
        # sort by (distance, index)
        o = np.argsort(cand, axis=1, kind="stable")
        cand = np.take_along_axis(cand, o, axis=1)
        dist = np.take_along_axis(dist, o, axis=1)
        o = np.argsort(dist, axis=1, kind="stable")
        cand = np.take_along_axis(cand, o, axis=1)
        dist = np.take_along_axis(dist, o, axis=1)
        if k > M:
            gap = dist[:, M] - dist[:, M - 1]
            tied = np.flatnonzero(gap <= 1e-12 * (1.0 + dist[:, M]))
            if tied.size:
                bi, bd = _accel.brute_knn(self.X, Z[tied], M, self._code)
                cand[tied, :M] = bi
                dist[tied, :M] = bd
        return np.ascontiguousarray(cand[:, :M]), np.ascontiguousarray(dist[:, :M])

    def query_one(self, z, M, warn=True):
        z = np.asarray(z, dtype=np.float64).ravel()
        idx, dist = self.query(z[None, :], M, warn=warn)
        return tuple(int(i) for i in idx[0]), dist[0]


def build_index(X, metric="euclidean", method="auto"):
    return NeighborIndex(X, metric=metric, method=method)


def query_knn(index, z, M):
    """Ordered neighbor indices and distances of a single query ``z``."""
    return index.query_one(z, M)


def cell_key(sigma):
    """Sorted tuple form of a neighbor tuple; identifies the local model."""
    key = tuple(sorted(int(s) for s in sigma))
    if any(a == b for a, b in zip(key, key[1:])):
        raise ValueError(f"internal error: duplicate indices in neighbor tuple {tuple(sigma)}")
    return key


def brute_force_knn(X, Z, M, metric="euclidean"):
    """Reference scan: full sort of all distances, stable on ties."""
    return NeighborIndex(X, metric=metric, method="brute").query(Z, M)
