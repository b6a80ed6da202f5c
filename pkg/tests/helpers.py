"""Independent reference implementations used as test oracles.

Everything here is written with plain loops and textbook formulas so that it
shares no code path with the package.
"""

import itertools
import math

import numpy as np


def ref_distance(u, v, metric="euclidean"):
    if metric == "euclidean":
        return math.sqrt(sum((a - b) ** 2 for a, b in zip(u, v)))
    return sum(abs(a - b) for a, b in zip(u, v))


def ref_phi(r, activation="exponential"):
    return math.exp(-r) if activation == "exponential" else math.exp(-r * r)


def ref_gram(Z, X, metric="euclidean", activation="exponential", shift=None, scale=None):
    Z = np.atleast_2d(Z).astype(float)
    X = np.atleast_2d(X).astype(float)
    if shift is not None:
        Z = (Z - shift) / scale
        X = (X - shift) / scale
    K = np.empty((len(Z), len(X)))
    for p in range(len(Z)):
        for n in range(len(X)):
            K[p, n] = ref_phi(ref_distance(Z[p], X[n], metric), activation)
    return K


def ref_krr(X, Y, Z, lam, **kw):
    """Prediction by an explicit linear solve (no factorization reuse)."""
    K = ref_gram(X, X, **kw) + lam * np.eye(len(X))
    return ref_gram(Z, X, **kw) @ np.linalg.solve(K, Y)


def ref_power(X, Z, lam, **kw):
    K = ref_gram(X, X, **kw) + lam * np.eye(len(X))
    kz = ref_gram(Z, X, **kw)
    q = np.einsum("pn,pn->p", kz, np.linalg.solve(K, kz.T).T)
    return np.sqrt(np.maximum(0.0, 1.0 - q))


def ref_knn(X, z, M, metric="euclidean"):
    order = sorted(range(len(X)), key=lambda n: (ref_distance(z, X[n], metric), n))
    return order[:M]


def brute_lsap(C):
    n = C.shape[0]
    return min(sum(C[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n)))


def brute_kcenter(X, k):
    """Optimal k-center radius by exhaustive search over all k-subsets."""
    D = np.array([[ref_distance(a, b) for b in X] for a in X])
    best = np.inf
    for sub in itertools.combinations(range(len(X)), k):
        best = min(best, D[:, list(sub)].min(axis=1).max())
    return best


def ref_gm(X, Y):
    n = len(X)
    return sum(
        (ref_distance(X[i], X[j]) - ref_distance(Y[i], Y[j])) ** 2 for i in range(n) for j in range(n)
    )


def fd_grad(f, x, h=1e-5):
    """Central finite-difference gradient of the scalar function ``f`` at array ``x``."""
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        old = x[i]
        x[i] = old + h
        fp = f(x)
        x[i] = old - h
        fm = f(x)
        x[i] = old
        g[i] = (fp - fm) / (2 * h)
    return g


def rel_err(a, b):
    """Norm-wise relative error with a small absolute floor."""
    return float(np.linalg.norm(np.ravel(a) - np.ravel(b)) / (np.linalg.norm(b) + 1e-8))


def distinct_points(rng, n, d, min_sep=1e-3):
    """Standard-normal points, redrawing any point closer than ``min_sep`` to an earlier one."""
    pts = []
    while len(pts) < n:
        x = rng.normal(size=d) * max(1.0, 4 * min_sep * n ** (1.0 / d))
        if all(np.linalg.norm(x - q) > min_sep for q in pts):
            pts.append(x)
    return np.array(pts).reshape(n, d)
