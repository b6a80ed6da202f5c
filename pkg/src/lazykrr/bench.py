"""Benchmarks: readout comparison, lazy per-query scaling, numba vs numpy kernels."""

import time

import numpy as np

from . import _accel, datasets
from .continuous import BlendedModel, fit_hierarchical
from .dense import DEFAULT_LAMBDA
from .kernels import KernelSpec
from .learn import one_hot
from .sparse import SparseModel


def linear_readout(X, labels, Z):
    """Closed-form least squares on one-hot labels (with intercept); returns predicted classes."""
    A = np.column_stack([X, np.ones(len(X))])
    W, *_ = np.linalg.lstsq(A, one_hot(labels), rcond=None)
    return np.argmax(np.column_stack([Z, np.ones(len(Z))]) @ W, axis=1)


def readout_comparison(sizes, seed=0, n_test=2000, M=100, N0=1000, J=4, lam=DEFAULT_LAMBDA, methods=None):
    """Test accuracy and wall-clock of four readouts on the nonlinear two-class set.

    Returns rows ``{"size", "method", "accuracy", "seconds"}``; the test set is
    the same for every size.
    """
    methods = methods or ("linear", "sparse-SK", "blended", "hierarchical")
    Xte, yte = datasets.nonlinear(n_test, seed=seed + 1)
    rows = []
    for size in sizes:
        Xtr, ytr = datasets.nonlinear(int(size), seed=seed)
        spec = KernelSpec("euclidean", "exponential").fitted(Xtr)
        Y = one_hot(ytr, 2)
        for method in methods:
            t0 = time.perf_counter()
            if method == "linear":
                pred = linear_readout(Xtr, ytr, Xte)
            elif method == "sparse-SK":
                pred = np.argmax(SparseModel(spec, Xtr, Y, M, lam).predict(Xte), axis=1)
            elif method == "blended":
                model = BlendedModel(SparseModel(spec, Xtr, Y, M, lam), J=min(J, len(Xtr)))
                pred = np.argmax(model.predict(Xte), axis=1)
            elif method == "hierarchical":
                model = fit_hierarchical(spec, Xtr, Y, M, min(N0, len(Xtr)), lam)
                pred = np.argmax(model.predict(Xte), axis=1)
            else:
                raise ValueError(f"unknown method {method!r}")
            seconds = time.perf_counter() - t0
            rows.append({"size": int(size), "method": method, "accuracy": float(np.mean(pred == yte)), "seconds": seconds})
    return rows


def lazy_scaling(sizes=(5000, 50000), M=100, queries=1000, dim=4, seed=0, repeats=3):
    """Per-query wall-clock of sparse prediction with a cold cache, per training size.

    Returns rows ``{"size", "build_seconds", "per_query_seconds"}`` (best of ``repeats``).
    """
    rng = np.random.default_rng(seed + 7)
    Z = rng.uniform(size=(queries, dim))
    rows = []
    for size in sizes:
        X, y = datasets.uniform(int(size), dim=dim, seed=seed)
        spec = KernelSpec()
        t0 = time.perf_counter()
        model = SparseModel(spec, X, y, M)
        build = time.perf_counter() - t0
        model.predict(Z[:2])
        best = np.inf
        for _ in range(repeats):
            model.clear_cache()
            t0 = time.perf_counter()
            model.predict(Z)
            best = min(best, time.perf_counter() - t0)
        rows.append({"size": int(size), "build_seconds": build, "per_query_seconds": best / queries})
    return rows


def _time(fn, repeats):
    fn()  # warm-up, includes JIT compilation on the numba path
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def backend_comparison(n=2000, dim=8, M=64, queries=500, seed=0, repeats=3):
    """Time each hot kernel under both backends.

    Returns rows ``{"kernel", "backend", "seconds", "max_abs_diff"}`` where the
    difference is measured against the numpy result.
    """
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, dim))
    Z = rng.normal(size=(queries, dim))
    y = rng.normal(size=(n, 1))
    W = rng.normal(size=(queries, n))
    keys = np.sort(rng.choice(n, size=(queries, M)), axis=1)
    spec = KernelSpec()
    cases = {
        "gram": lambda: _accel.gram(X, X, 0, 0),
        "kernel_vjp": lambda: _accel.kernel_vjp(Z, X, W, 0, 0)[0],
        "local_grams": lambda: _accel.local_grams(X, keys[:100], 0, 0),
        "greedy": lambda: _accel.greedy(X, 200, 0, 0, False)[0].astype(float),
        "brute_knn": lambda: _accel.brute_knn(X, Z, M, 0)[0].astype(float),
        "sparse_predict": lambda: SparseModel(spec, X, y, M).predict(Z),
    }
    backends = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])
    previous = _accel.get_backend()
    rows = []
    try:
        for name, fn in cases.items():
            _accel.set_backend("numpy")
            ref = fn()
            for backend in backends:
                _accel.set_backend(backend)
                seconds = _time(fn, repeats)
                diff = float(np.max(np.abs(fn() - ref)))
                rows.append({"kernel": name, "backend": backend, "seconds": seconds, "max_abs_diff": diff})
    finally:
        _accel.set_backend(previous)
    return rows
