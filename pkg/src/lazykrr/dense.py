"""Dense kernel ridge regression in the interpolation regime."""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular

from . import _accel
from .errors import InputError, NumericalError
from .kernels import KernelSpec, as_points, gram_self

DEFAULT_LAMBDA = 1e-9
MAX_JITTER = 1e-6

_CHUNK = 1 << 22


def jitter_schedule(lam):
    """Yield ``lam`` and then ``max(lam, 1e-12) * 10**k`` while it stays <= 1e-6."""
    yield lam
    tried = max(lam, 1e-12) * 10.0
    while tried <= MAX_JITTER * (1.0 + 1e-9):
        yield tried
        tried *= 10.0


def factor_spd(K, lam):
    """Lower Cholesky factor of ``K + lam I`` with jitter escalation.

    Returns ``(L, lam_used)``; raises NumericalError once the schedule runs out.
    """
    n = K.shape[0]
    last = lam
    for last in jitter_schedule(lam):
        try:
            L, _ = cho_factor(K + last * np.eye(n), lower=True, check_finite=False)
        except LinAlgError:
            continue
        if np.all(np.isfinite(L)):
            return np.tril(L), last
    raise NumericalError(
        f"Cholesky factorization failed for a {n}x{n} kernel system (final jitter {last:g})",
        jitter=last,
    )


def _check_Z(model, Z):
    Z = as_points(Z, "Z")
    if Z.shape[1] != model.X.shape[1]:
        raise InputError(f"dimension mismatch: model has D_x={model.X.shape[1]}, Z has {Z.shape[1]}")
    return Z


def _row_slices(P, N):
    step = max(1, _CHUNK // max(1, N))
    for s in range(0, P, step):
        yield slice(s, min(P, s + step))


@dataclass(frozen=True, eq=False)
class DenseModel:
    spec: KernelSpec
    X: np.ndarray
    Y: np.ndarray
    lam: float
    L: np.ndarray
    theta: np.ndarray
    lam_used: float

    @property
    def n(self):
        return self.X.shape[0]

    def _cross(self, Z):
        # k(Z, X) on already-validated raw Z
        return _accel.gram(
            self.spec.transform(Z), self._Xn, self.spec.metric_code, self.spec.activation_code
        )

    @property
    def _Xn(self):
        cached = self.__dict__.get("_xn_cache")
        if cached is None:
            cached = self.spec.transform(self.X)
            object.__setattr__(self, "_xn_cache", cached)
        return cached

    def solve(self, B):
        return cho_solve((self.L, True), B, check_finite=False)

    def predict(self, Z):
        Z = _check_Z(self, Z)
        out = np.empty((Z.shape[0], self.Y.shape[1]))
        for sl in _row_slices(Z.shape[0], self.n):
            out[sl] = self._cross(Z[sl]) @ self.theta
        return out

    def cardinal_basis(self, Z):
        """Lagrange functions ``k(Z, X) K^-1`` as a (P, N) matrix."""
        Z = _check_Z(self, Z)
        return self.solve(self._cross(Z).T).T

    def rkhs_norm(self):
        q = np.sum(self.Y * self.theta, axis=0)
        return np.sqrt(np.maximum(q, 0.0))

    def power_function(self, Z):
        Z = _check_Z(self, Z)
        out = np.empty(Z.shape[0])
        for sl in _row_slices(Z.shape[0], self.n):
            V = solve_triangular(self.L, self._cross(Z[sl]).T, lower=True, check_finite=False)
            out[sl] = np.sqrt(np.maximum(0.0, 1.0 - np.sum(V * V, axis=0)))
        return out

    def vjp(self, Z, upstream):
        """Pull ``upstream`` (P, D_y) back onto Y, X and Z.

        Returns ``(grad_Y, grad_X, grad_Z)`` for the map
        ``(Y, X, Z) -> k(Z, X) (k(X, X) + lam I)^-1 Y``.
        """
        Z = _check_Z(self, Z)
        G = np.asarray(upstream, dtype=np.float64).reshape(Z.shape[0], self.Y.shape[1])
        spec = self.spec
        Xn, Zn = self._Xn, spec.transform(Z)
        m, a = spec.metric_code, spec.activation_code
        Kzx = _accel.gram(Zn, Xn, m, a)
        grad_Y = self.solve(Kzx.T @ G)
        W_zx = G @ self.theta.T
        W_xx = -(grad_Y @ self.theta.T)
        gZ, gX = _accel.kernel_vjp(Zn, Xn, W_zx, m, a)
        gXa, gXb = _accel.kernel_vjp(Xn, Xn, W_xx, m, a)
        gX = gX + gXa + gXb
        if spec.normalizer is not None:
            gX = gX / spec.normalizer.scale
            gZ = gZ / spec.normalizer.scale
        return grad_Y, gX, gZ


def fit_dense(spec, X, Y, lam=DEFAULT_LAMBDA, warn=True):
    """Factor ``k(X, X) + lam I`` and solve for the coefficients ``theta``."""
    X = as_points(X, "X")
    Y = as_points(Y, "Y")
    if X.shape[0] < 1:
        raise InputError("need at least one training point")
    if X.shape[0] != Y.shape[0]:
        raise InputError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
    if not lam >= 0:
        raise InputError(f"lambda must be >= 0, got {lam}")
    K = gram_self(spec, X, warn=warn)
    L, lam_used = factor_spd(K, lam)
    theta = cho_solve((L, True), Y, check_finite=False)
    return DenseModel(spec=spec, X=X, Y=Y, lam=float(lam), L=L, theta=theta, lam_used=lam_used)


def predict_dense(model, Z):
    return model.predict(Z)


def cardinal_basis(model, Z):
    return model.cardinal_basis(Z)


def rkhs_norm(model):
    return model.rkhs_norm()


def power_function(model, Z):
    return model.power_function(Z)


def krr_gradients(spec, X, Y, Z, lam, upstream):
    """VJPs of the kernel ridge regressor with respect to Y, X and Z."""
    return fit_dense(spec, X, Y, lam, warn=False).vjp(Z, upstream)
