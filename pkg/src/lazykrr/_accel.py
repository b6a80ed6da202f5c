"""Hot numeric kernels: a numba path and a pure-numpy fallback.

The backend is picked at import time from the ``LAZYKRR_BACKEND`` environment
variable (``numba`` or ``numpy``; default ``numba`` when it is importable) and
can be switched later with :func:`set_backend`. Both paths compute the same
quantities; they may differ in the last bits because of summation order.

Metric and activation codes are small integers so that they can be passed
into jitted code: see ``METRICS`` and ``ACTIVATIONS``.
"""

import os

import numpy as np

try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # the system TBB is too old for numba; OpenMP is safe for calls from several threads
        numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

METRICS = {"euclidean": 0, "manhattan": 1}
ACTIVATIONS = {"exponential": 0, "gaussian": 1}

# elements of the largest temporary the numpy path allocates at once
_BUDGET = 1 << 22


def _chunks(n, per_row):
    step = max(1, _BUDGET // max(1, per_row))
    for start in range(0, n, step):
        yield slice(start, min(n, start + step))


# ---------------------------------------------------------------- numpy path


def _np_phi(r, act):
    if act == 0:
        return np.exp(-r)
    return np.exp(-r * r)


def _np_dphi(r, act):
    if act == 0:
        return -np.exp(-r)
    return -2.0 * r * np.exp(-r * r)


def _np_distances(U, V, metric):
    out = np.empty((U.shape[0], V.shape[0]))
    for sl in _chunks(U.shape[0], V.shape[0] * U.shape[1]):
        diff = U[sl, None, :] - V[None, :, :]
        if metric == 0:
            out[sl] = np.sqrt(np.einsum("pnd,pnd->pn", diff, diff))
        else:
            out[sl] = np.abs(diff).sum(axis=2)
    return out


def _np_gram(U, V, metric, act):
    return _np_phi(_np_distances(U, V, metric), act)


def _np_kernel_vjp(U, V, W, metric, act):
    R = _np_distances(U, V, metric)
    C = W * _np_dphi(R, act)
    if metric == 0:
        G = np.divide(C, R, out=np.zeros_like(C), where=R > 0)
        gU = G.sum(axis=1)[:, None] * U - G @ V
        gV = G.sum(axis=0)[:, None] * V - G.T @ U
        return gU, gV
    gU = np.zeros_like(U)
    gV = np.zeros_like(V)
    for sl in _chunks(U.shape[0], V.shape[0] * U.shape[1]):
        S = np.sign(U[sl, None, :] - V[None, :, :])
        gU[sl] = np.einsum("pn,pnd->pd", C[sl], S)
        gV -= np.einsum("pn,pnd->nd", C[sl], S)
    return gU, gV


def _np_local_grams(Xn, keys, metric, act):
    C, M = keys.shape
    out = np.empty((C, M, M))
    for sl in _chunks(C, M * M * Xn.shape[1]):
        pts = Xn[keys[sl]]
        diff = pts[:, :, None, :] - pts[:, None, :, :]
        if metric == 0:
            R = np.sqrt(np.einsum("cijd,cijd->cij", diff, diff))
        else:
            R = np.abs(diff).sum(axis=3)
        out[sl] = _np_phi(R, act)
    return out


def _np_row_distances(Z, Xn, idx, metric):
    P, M = idx.shape
    out = np.empty((P, M))
    for sl in _chunks(P, M * Xn.shape[1]):
        diff = Z[sl, None, :] - Xn[idx[sl]]
        if metric == 0:
            out[sl] = np.sqrt(np.einsum("pmd,pmd->pm", diff, diff))
        else:
            out[sl] = np.abs(diff).sum(axis=2)
    return out


def _np_row_kernels(Z, Xn, idx, metric, act):
    return _np_phi(_np_row_distances(Z, Xn, idx, metric), act)


def _np_greedy(X, count, start, metric, prefix):
    N = X.shape[0]
    selected = np.zeros(N, dtype=bool)
    order = np.empty(count, dtype=np.int64)
    radii = np.empty(count)
    order[0] = start
    radii[0] = np.inf
    selected[start] = True
    mind = _np_distances(X[start : start + 1], X, metric)[0]
    for n in range(1, count):
        cand = np.where(selected, -np.inf, mind)
        if prefix:
            cand[:n] = -np.inf
        j = int(np.argmax(cand))
        if not np.isfinite(cand[j]):
            return order[:n], radii[:n]
        order[n] = j
        radii[n] = mind[j]
        selected[j] = True
        np.minimum(mind, _np_distances(X[j : j + 1], X, metric)[0], out=mind)
    return order, radii


def _np_brute_knn(Xn, Z, M, metric):
    P = Z.shape[0]
    idx = np.empty((P, M), dtype=np.int64)
    dist = np.empty((P, M))
    for sl in _chunks(P, Xn.shape[0] * Xn.shape[1]):
        D = _np_distances(Z[sl], Xn, metric)
        order = np.argsort(D, axis=1, kind="stable")[:, :M]
        idx[sl] = order
        dist[sl] = np.take_along_axis(D, order, axis=1)
    return idx, dist


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @njit(cache=True, inline="always")
    def _nb_dist(a, b, metric):
        s = 0.0
        if metric == 0:
            for d in range(a.shape[0]):
                t = a[d] - b[d]
                s += t * t
            return np.sqrt(s)
        for d in range(a.shape[0]):
            s += abs(a[d] - b[d])
        return s

    @njit(cache=True, inline="always")
    def _nb_phi(r, act):
        if act == 0:
            return np.exp(-r)
        return np.exp(-r * r)

    @njit(cache=True, inline="always")
    def _nb_dphi(r, act):
        if act == 0:
            return -np.exp(-r)
        return -2.0 * r * np.exp(-r * r)

    @njit(cache=True, parallel=True)
    def _nb_distances(U, V, metric):
        P, N = U.shape[0], V.shape[0]
        out = np.empty((P, N))
        for p in prange(P):
            for n in range(N):
                out[p, n] = _nb_dist(U[p], V[n], metric)
        return out

    @njit(cache=True, parallel=True)
    def _nb_gram(U, V, metric, act):
        P, N = U.shape[0], V.shape[0]
        out = np.empty((P, N))
        for p in prange(P):
            for n in range(N):
                out[p, n] = _nb_phi(_nb_dist(U[p], V[n], metric), act)
        return out

    @njit(cache=True, inline="always")
    def _nb_dr(a, b, r, metric, d):
        # partial derivative of d(a, b) with respect to a[d]; 0 at r == 0
        t = a[d] - b[d]
        if metric == 0:
            if r > 0.0:
                return t / r
            return 0.0
        if t > 0.0:
            return 1.0
        if t < 0.0:
            return -1.0
        return 0.0

    @njit(cache=True, parallel=True)
    def _nb_kernel_vjp(U, V, W, metric, act):
        P, N, D = U.shape[0], V.shape[0], U.shape[1]
        gU = np.zeros((P, D))
        gV = np.zeros((N, D))
        for p in prange(P):
            for n in range(N):
                r = _nb_dist(U[p], V[n], metric)
                c = W[p, n] * _nb_dphi(r, act)
                if c != 0.0:
                    for d in range(D):
                        gU[p, d] += c * _nb_dr(U[p], V[n], r, metric, d)
        for n in prange(N):
            for p in range(P):
                r = _nb_dist(U[p], V[n], metric)
                c = W[p, n] * _nb_dphi(r, act)
                if c != 0.0:
                    for d in range(D):
                        gV[n, d] += c * _nb_dr(V[n], U[p], r, metric, d)
        return gU, gV

    @njit(cache=True, parallel=True)
    def _nb_local_grams(Xn, keys, metric, act):
        C, M = keys.shape
        out = np.empty((C, M, M))
        for c in prange(C):
            for i in range(M):
                out[c, i, i] = _nb_phi(0.0, act)
                for j in range(i + 1, M):
                    v = _nb_phi(_nb_dist(Xn[keys[c, i]], Xn[keys[c, j]], metric), act)
                    out[c, i, j] = v
                    out[c, j, i] = v
        return out

    @njit(cache=True, parallel=True)
    def _nb_row_distances(Z, Xn, idx, metric):
        P, M = idx.shape
        out = np.empty((P, M))
        for p in prange(P):
            for m in range(M):
                out[p, m] = _nb_dist(Z[p], Xn[idx[p, m]], metric)
        return out

    @njit(cache=True, parallel=True)
    def _nb_row_kernels(Z, Xn, idx, metric, act):
        P, M = idx.shape
        out = np.empty((P, M))
        for p in prange(P):
            for m in range(M):
                out[p, m] = _nb_phi(_nb_dist(Z[p], Xn[idx[p, m]], metric), act)
        return out

    @njit(cache=True)
    def _nb_greedy(X, count, start, metric, prefix):
        N = X.shape[0]
        selected = np.zeros(N, dtype=np.bool_)
        order = np.empty(count, dtype=np.int64)
        radii = np.empty(count)
        mind = np.empty(N)
        order[0] = start
        radii[0] = np.inf
        selected[start] = True
        for i in range(N):
            mind[i] = _nb_dist(X[i], X[start], metric)
        for n in range(1, count):
            best = -1
            bestd = -1.0
            lo = n if prefix else 0
            for i in range(lo, N):
                if not selected[i] and mind[i] > bestd:
                    best = i
                    bestd = mind[i]
            if best < 0:
                return order[:n], radii[:n]
            order[n] = best
            radii[n] = bestd
            selected[best] = True
            for i in range(N):
                d = _nb_dist(X[i], X[best], metric)
                if d < mind[i]:
                    mind[i] = d
        return order, radii

    @njit(cache=True, parallel=True)
    def _nb_brute_knn(Xn, Z, M, metric):
        P, N = Z.shape[0], Xn.shape[0]
        idx = np.empty((P, M), dtype=np.int64)
        dist = np.empty((P, M))
        for p in prange(P):
            row = np.empty(N)
            for n in range(N):
                row[n] = _nb_dist(Z[p], Xn[n], metric)
            order = np.argsort(row, kind="mergesort")
            for m in range(M):
                idx[p, m] = order[m]
                dist[p, m] = row[order[m]]
        return idx, dist


# ---------------------------------------------------------------- dispatch

_NUMPY = {
    "distances": _np_distances,
    "gram": _np_gram,
    "kernel_vjp": _np_kernel_vjp,
    "local_grams": _np_local_grams,
    "row_distances": _np_row_distances,
    "row_kernels": _np_row_kernels,
    "greedy": _np_greedy,
    "brute_knn": _np_brute_knn,
}

if HAVE_NUMBA:
    _NUMBA = {
        "distances": _nb_distances,
        "gram": _nb_gram,
        "kernel_vjp": _nb_kernel_vjp,
        "local_grams": _nb_local_grams,
        "row_distances": _nb_row_distances,
        "row_kernels": _nb_row_kernels,
        "greedy": _nb_greedy,
        "brute_knn": _nb_brute_knn,
    }

_active = {}
_backend = None


def set_backend(name):
    """Select ``"numba"`` or ``"numpy"`` for all hot kernels; returns the previous name."""
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise ValueError("numba backend requested but numba is not installed")
    previous = _backend
    _active.clear()
    _active.update(_NUMBA if name == "numba" else _NUMPY)
    _backend = name
    return previous


def get_backend():
    return _backend


def _init():
    requested = os.environ.get("LAZYKRR_BACKEND", "").strip().lower()
    if not requested:
        requested = "numba" if HAVE_NUMBA else "numpy"
    set_backend(requested)
    threads = os.environ.get("LAZYKRR_NUM_THREADS")
    if threads and HAVE_NUMBA:
        numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))


_init()


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def distances(U, V, metric):
    return _active["distances"](_f64(U), _f64(V), metric)


def gram(U, V, metric, act):
    return _active["gram"](_f64(U), _f64(V), metric, act)


def kernel_vjp(U, V, W, metric, act):
    """Cotangents of ``W`` pulled back through ``phi(d(U, V))`` onto ``U`` and ``V``."""
    return _active["kernel_vjp"](_f64(U), _f64(V), _f64(W), metric, act)


def local_grams(Xn, keys, metric, act):
    return _active["local_grams"](_f64(Xn), np.ascontiguousarray(keys, dtype=np.int64), metric, act)


def row_distances(Z, Xn, idx, metric):
    return _active["row_distances"](
        _f64(Z), _f64(Xn), np.ascontiguousarray(idx, dtype=np.int64), metric
    )


def row_kernels(Z, Xn, idx, metric, act):
    return _active["row_kernels"](
        _f64(Z), _f64(Xn), np.ascontiguousarray(idx, dtype=np.int64), metric, act
    )


def greedy(X, count, start, metric, prefix):
    return _active["greedy"](_f64(X), int(count), int(start), metric, bool(prefix))


def brute_knn(Xn, Z, M, metric):
    return _active["brute_knn"](_f64(Xn), _f64(Z), int(M), metric)
