"""Greedy farthest-point selection and optimal-transport losses."""

from dataclasses import dataclass

import numpy as np

from . import _accel
from .errors import InputError
from .kernels import METRICS, _canonical, as_points


@dataclass(frozen=True, eq=False)
class Selection:
    """Selected indices in pick order and the coverage radius at each pick.

    ``radii[n]`` is the distance from the n-th pick to the points picked
    before it (``inf`` for the first pick).
    """

    indices: np.ndarray
    radii: np.ndarray

    def __len__(self):
        return len(self.indices)


def greedy_select(X, count, metric="euclidean", start_index=0, candidates="unselected"):
    """Gonzalez farthest-point traversal.

    Every step adds the point farthest from the current selection, lowest
    index first on ties. ``candidates="prefix"`` restricts step ``n`` to
    points with index >= n, the literal reading of the textbook recursion;
    the default searches every unselected point.
    """
    X = as_points(X)
    N = X.shape[0]
    count = int(count)
    if not 1 <= count <= N:
        raise InputError(f"count must be in [1, {N}], got {count}")
    if not 0 <= start_index < N:
        raise InputError(f"start_index must be in [0, {N}), got {start_index}")
    if candidates not in ("unselected", "prefix"):
        raise InputError(f"unknown candidate rule {candidates!r}")
    code = _accel.METRICS[_canonical(metric, METRICS, "metric")]
    order, radii = _accel.greedy(X, count, start_index, code, candidates == "prefix")
    if len(order) < count:
        raise InputError(f"candidate pool exhausted after {len(order)} picks (prefix rule)")
    return Selection(indices=np.asarray(order, dtype=np.int64), radii=np.asarray(radii))


def fill_distance(X, subset, metric="euclidean"):
    """Largest distance from a point of ``X`` to its nearest point in ``subset``."""
    X = as_points(X)
    subset = np.asarray(subset, dtype=np.int64).ravel()
    if subset.size == 0:
        raise InputError("subset must be non-empty")
    code = _accel.METRICS[_canonical(metric, METRICS, "metric")]
    D = _accel.distances(X, X[subset], code)
    return float(D.min(axis=1).max())


@dataclass(frozen=True, eq=False)
class Assignment:
    """``perm[n]`` is the target index matched to source ``n``."""

    perm: np.ndarray
    cost: float


def _lsap(C):
    """Exact min-cost perfect matching by shortest augmenting paths with potentials."""
    n = C.shape[0]
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    p = np.zeros(n + 1, dtype=np.int64)  # p[j]: row matched to column j (1-based, 0 = free)
    way = np.zeros(n + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used
            free[0] = False
            cur = C[i0 - 1] - u[i0] - v[1:]
            better = free[1:] & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            masked = np.where(free, minv, np.inf)
            j1 = int(np.argmin(masked))
            delta = masked[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    perm = np.empty(n, dtype=np.int64)
    perm[p[1:] - 1] = np.arange(n)
    return perm


def transport_cost_matrix(X, Y, cost="sqeuclidean"):
    X = as_points(X, "X")
    Y = as_points(Y, "Y")
    if X.shape != Y.shape:
        raise InputError(f"X and Y must have equal shapes, got {X.shape} and {Y.shape}")
    D = _accel.distances(X, Y, 0)
    if cost in ("sqeuclidean", "squared_l2"):
        return D * D
    if cost in ("euclidean", "l2"):
        return D
    raise InputError(f"unknown transport cost {cost!r}")


def monge_assign(X, Y, cost="sqeuclidean"):
    """Optimal bijection between equal-size point sets (exact LSAP)."""
    C = transport_cost_matrix(X, Y, cost)
    if C.shape[0] == 0:
        return Assignment(perm=np.empty(0, dtype=np.int64), cost=0.0)
    perm = _lsap(C)
    return Assignment(perm=perm, cost=float(C[np.arange(len(perm)), perm].sum()))


def _pairwise_pullback(P, D, R):
    # d/dP of sum_ij R_ij * D_ij with D = pairwise l2 distances of P, R symmetric
    G = np.divide(R, D, out=np.zeros_like(R), where=D > 0)
    return 2.0 * (G.sum(axis=1)[:, None] * P - G @ P)


def gromov_monge(X, Y):
    """``sum_ij (|x_i - x_j| - |y_i - y_j|)^2`` and its gradients in X and Y."""
    X = as_points(X, "X")
    Y = as_points(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise InputError(f"X and Y must have the same number of points, got {X.shape[0]} and {Y.shape[0]}")
    if X.shape[0] < 2:
        return 0.0, np.zeros_like(X), np.zeros_like(Y)
    Dx = _accel.distances(X, X, 0)
    Dy = _accel.distances(Y, Y, 0)
    R = Dx - Dy
    value = float(np.sum(R * R))
    grad_X = _pairwise_pullback(X, Dx, 2.0 * R)
    grad_Y = _pairwise_pullback(Y, Dy, -2.0 * R)
    return value, grad_X, grad_Y
