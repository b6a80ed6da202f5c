"""Lazy localized kernel ridge regression on M-nearest-neighbor cells.

Nothing is solved at build time. A query ``z`` is answered with the
``min(M, N)`` training points nearest to it: the local system
``k(x_s, x_s) + lam I`` is factored (or fetched from an LRU cache keyed by the
sorted neighbor set) and ``k(z, x_s) coef_s`` is returned.
"""

import threading
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _accel
from .dense import DEFAULT_LAMBDA, jitter_schedule
from .errors import InputError, NumericalError
from .kernels import KernelSpec, as_points
from .neighbors import NeighborIndex, clamp_bandwidth

DEFAULT_CACHE_SIZE = 10_000

# local systems assembled per chunk
_CELL_CHUNK = 256
_QUERY_CHUNK = 1024


@dataclass
class BatchStats:
    queries: int = 0
    cells: int = 0
    cache_hits: int = 0
    solves: int = 0


class CellCache:
    """Bounded LRU map ``cell bytes -> (L, coef)``, safe under concurrent use."""

    def __init__(self, maxsize=DEFAULT_CACHE_SIZE):
        self.maxsize = int(maxsize)
        self._data = OrderedDict()
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._data)

    def get(self, key):
        with self._lock:
            item = self._data.get(key)
            if item is not None:
                self._data.move_to_end(key)
            return item

    def put(self, key, value):
        if self.maxsize <= 0:
            return
        with self._lock:
            self._data[key] = value
            self._data.move_to_end(key)
            while len(self._data) > self.maxsize:
                self._data.popitem(last=False)

    def clear(self):
        with self._lock:
            self._data.clear()


def _factor_cells(G, lam):
    """Cholesky factors of a stack of local systems, escalating jitter per cell."""
    C, M, _ = G.shape
    eye = np.eye(M)
    lam_used = np.full(C, float(lam))
    try:
        return np.linalg.cholesky(G + lam * eye), lam_used
    except np.linalg.LinAlgError:
        pass
    L = np.empty_like(G)
    for c in range(C):
        for jit in jitter_schedule(lam):
            try:
                L[c] = np.linalg.cholesky(G[c] + jit * eye)
            except np.linalg.LinAlgError:
                continue
            lam_used[c] = jit
            break
        else:
            raise NumericalError(
                f"local {M}x{M} factorization failed (final jitter {jit:g})", jitter=jit
            )
    return L, lam_used


class SparseModel:
    def __init__(self, spec, X, Y, M, lam=DEFAULT_LAMBDA, cache_size=DEFAULT_CACHE_SIZE, index_method="auto"):
        X = as_points(X, "X")
        Y = as_points(Y, "Y")
        if X.shape[0] != Y.shape[0]:
            raise InputError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
        if not lam >= 0:
            raise InputError(f"lambda must be >= 0, got {lam}")
        self.spec = spec
        self.X = X
        self.Y = Y
        self.lam = float(lam)
        self.Xn = np.ascontiguousarray(spec.transform(X))
        self.index = NeighborIndex(self.Xn, metric=spec.metric, method=index_method)
        self.M = clamp_bandwidth(M, X.shape[0])
        self.cache = CellCache(cache_size)

    @property
    def n(self):
        return self.X.shape[0]

    def clear_cache(self):
        self.cache.clear()

    def _normalized(self, Z):
        Z = as_points(Z, "Z")
        if Z.shape[1] != self.X.shape[1]:
            raise InputError(f"dimension mismatch: model has D_x={self.X.shape[1]}, Z has {Z.shape[1]}")
        return np.ascontiguousarray(self.spec.transform(Z))

    def neighbors(self, Z):
        """Ordered neighbor indices (P, M) of raw queries."""
        return self.index.query(self._normalized(Z), self.M, warn=False)[0]

    def cells_of(self, Zn):
        idx, _ = self.index.query(Zn, self.M, warn=False)
        return np.sort(idx, axis=1)

    # -- local systems ---------------------------------------------------

    def _solve_missing(self, keys):
        spec = self.spec
        G = _accel.local_grams(self.Xn, keys, spec.metric_code, spec.activation_code)
        L, lam_used = _factor_cells(G, self.lam)
        eye = np.eye(keys.shape[1])
        out = []
        for c in range(keys.shape[0]):
            coef = np.linalg.solve(G[c] + lam_used[c] * eye, self.Y[keys[c]])
            out.append((L[c], coef))
        return out

    def _local_systems(self, keys, stats, workers=1):
        """(L, coef) for each row of the unique-cell array ``keys``."""
        systems = [None] * keys.shape[0]
        missing = []
        for c in range(keys.shape[0]):
            item = self.cache.get(keys[c].tobytes())
            if item is None:
                missing.append(c)
            else:
                systems[c] = item
                stats.cache_hits += 1
        chunks = [missing[s : s + _CELL_CHUNK] for s in range(0, len(missing), _CELL_CHUNK)]

        def work(chunk):
            return chunk, self._solve_missing(keys[chunk])

        if workers > 1 and len(chunks) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(work, chunks))
        else:
            results = [work(ch) for ch in chunks]
        for chunk, solved in results:
            for c, item in zip(chunk, solved):
                systems[c] = item
                self.cache.put(keys[c].tobytes(), item)
        stats.solves += len(missing)
        return systems

    def _evaluate(self, Zn, qkeys, with_error=False, stats=None, workers=1):
        """Predict each query row with the local model of the matching ``qkeys`` row."""
        stats = BatchStats() if stats is None else stats
        P = Zn.shape[0]
        Dy = self.Y.shape[1]
        pred = np.empty((P, Dy))
        err = np.empty(P) if with_error else None
        stats.queries += P
        if P == 0:
            return pred, err, stats
        ukeys, inverse = np.unique(qkeys, axis=0, return_inverse=True)
        inverse = inverse.ravel()
        stats.cells += ukeys.shape[0]
        # queries that share a cell with an earlier query in this batch reuse it
        stats.cache_hits += P - ukeys.shape[0]
        systems = self._local_systems(ukeys, stats, workers=workers)
        coefs = np.stack([s[1] for s in systems])
        spec = self.spec
        for s in range(0, P, _QUERY_CHUNK):
            sl = slice(s, min(P, s + _QUERY_CHUNK))
            kz = _accel.row_kernels(Zn[sl], self.Xn, qkeys[sl], spec.metric_code, spec.activation_code)
            inv = inverse[sl]
            pred[sl] = np.matmul(kz[:, None, :], coefs[inv])[:, 0, :]
            if with_error:
                Ls = np.stack([systems[u][0] for u in inv])
                w = np.linalg.solve(Ls, kz[:, :, None])[:, :, 0]
                err[sl] = np.sqrt(np.maximum(0.0, 1.0 - np.sum(w * w, axis=1)))
        return pred, err, stats

    # -- public API ------------------------------------------------------

    def predict(self, Z):
        Zn = self._normalized(Z)
        return self._evaluate(Zn, self.cells_of(Zn))[0]

    def local_error(self, Z):
        Zn = self._normalized(Z)
        return self._evaluate(Zn, self.cells_of(Zn), with_error=True)[1]

    def predict_with_error(self, Z):
        Zn = self._normalized(Z)
        pred, err, _ = self._evaluate(Zn, self.cells_of(Zn), with_error=True)
        return pred, err

    def predict_batch(self, Z, workers=1):
        """Predictions plus :class:`BatchStats`; ``workers > 1`` solves cells on a thread pool."""
        Zn = self._normalized(Z)
        pred, _, stats = self._evaluate(Zn, self.cells_of(Zn), workers=workers)
        return pred, stats


def build_sparse(spec, X, Y, M, lam=DEFAULT_LAMBDA, **kwargs):
    return SparseModel(spec, X, Y, M, lam, **kwargs)


def predict_sparse(model, Z):
    return model.predict(Z)


def local_error(model, Z):
    return model.local_error(Z)


def predict_sparse_batch(model, Z, workers=1):
    return model.predict_batch(Z, workers=workers)
