"""Radial kernels ``k(u, v) = phi(d(S(u), S(v)))`` and Gram-matrix assembly."""

import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import _accel
from .errors import InputError

METRICS = tuple(_accel.METRICS)
ACTIVATIONS = tuple(_accel.ACTIVATIONS)

_ALIASES = {
    "l2": "euclidean",
    "euclid": "euclidean",
    "l1": "manhattan",
    "cityblock": "manhattan",
    "exp": "exponential",
    "laplace": "exponential",
    "gauss": "gaussian",
    "rbf": "gaussian",
}

DUPLICATE_TOL = 1e-12


def as_points(X, name="X"):
    """Return ``X`` as a float64 (N, D) array; a 1-D input is one column."""
    A = np.asarray(X, dtype=np.float64)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise InputError(f"{name} must be a 2-D point set, got shape {A.shape}")
    return A


def _canonical(name, allowed, what):
    key = _ALIASES.get(str(name).lower(), str(name).lower())
    if key not in allowed:
        raise InputError(f"unknown {what} {name!r}; expected one of {allowed}")
    return key


def distance(u, v, metric="euclidean"):
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise InputError(f"dimension mismatch: {u.shape[0]} vs {v.shape[0]}")
    if u.size == 0:
        raise InputError("points must have dimension >= 1")
    metric = _canonical(metric, METRICS, "metric")
    if metric == "euclidean":
        return float(np.sqrt(np.sum((u - v) ** 2)))
    return float(np.sum(np.abs(u - v)))


@dataclass(frozen=True, eq=False)
class Normalizer:
    """Per-dimension affine map ``(x - shift) / scale``."""

    shift: np.ndarray
    scale: np.ndarray

    @property
    def dim(self):
        return self.shift.shape[0]

    def __call__(self, X):
        X = as_points(X)
        if X.shape[1] != self.dim:
            raise InputError(f"normalizer expects dimension {self.dim}, got {X.shape[1]}")
        return (X - self.shift) / self.scale


def fit_normalizer(X):
    """Column means and population standard deviations of ``X``.

    Constant columns get scale 1 so they pass through unscaled.
    """
    X = as_points(X)
    if X.shape[0] < 2:
        raise InputError("fit_normalizer needs at least 2 points")
    shift = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return Normalizer(shift=shift, scale=scale)


@dataclass(frozen=True, eq=False)
class KernelSpec:
    metric: str = "euclidean"
    activation: str = "exponential"
    normalizer: Normalizer | None = None

    def __post_init__(self):
        object.__setattr__(self, "metric", _canonical(self.metric, METRICS, "metric"))
        object.__setattr__(
            self, "activation", _canonical(self.activation, ACTIVATIONS, "activation")
        )

    @property
    def metric_code(self):
        return _accel.METRICS[self.metric]

    @property
    def activation_code(self):
        return _accel.ACTIVATIONS[self.activation]

    def fitted(self, X):
        """Copy of this spec with a normalizer fitted on ``X``."""
        return replace(self, normalizer=fit_normalizer(X))

    def transform(self, X):
        X = as_points(X)
        return X if self.normalizer is None else self.normalizer(X)

    def phi(self, r):
        r = np.asarray(r, dtype=np.float64)
        return np.exp(-r) if self.activation == "exponential" else np.exp(-r * r)

    def dphi(self, r):
        r = np.asarray(r, dtype=np.float64)
        if self.activation == "exponential":
            return -np.exp(-r)
        return -2.0 * r * np.exp(-r * r)

    def __call__(self, u, v):
        return float(self.gram(np.atleast_2d(u), np.atleast_2d(v))[0, 0])

    def gram(self, Z, X):
        return gram(self, Z, X)

    def to_dict(self):
        d = {"metric": self.metric, "activation": self.activation}
        if self.normalizer is not None:
            d["shift"] = self.normalizer.shift.tolist()
            d["scale"] = self.normalizer.scale.tolist()
        return d


def _check_dims(Z, X):
    if Z.shape[1] != X.shape[1]:
        raise InputError(f"dimension mismatch: {Z.shape[1]} vs {X.shape[1]}")


def gram(spec, Z, X):
    """Kernel matrix ``k(Z, X)`` of shape (P, N)."""
    Z = as_points(Z, "Z")
    X = as_points(X, "X")
    _check_dims(Z, X)
    if Z is X:
        return gram_self(spec, X)
    return _accel.gram(spec.transform(Z), spec.transform(X), spec.metric_code, spec.activation_code)


def gram_self(spec, X, warn=True):
    """Symmetric ``k(X, X)``; warns about duplicate points."""
    X = as_points(X)
    Xn = spec.transform(X)
    K = _accel.gram(Xn, Xn, spec.metric_code, spec.activation_code)
    # row-wise and column-wise evaluation can disagree by an ulp; symmetrize
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, 1.0)
    if warn and K.shape[0] > 1:
        near = spec.phi(DUPLICATE_TOL)
        off = K - np.eye(K.shape[0])
        if np.any(off >= near):
            n = int(np.count_nonzero(np.triu(off >= near, 1)))
            warnings.warn(f"{n} duplicate point pair(s) in kernel centers", RuntimeWarning, stacklevel=3)
    return K
