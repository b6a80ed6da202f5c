"""Synthetic datasets with fixed seeds."""

import numpy as np

from .errors import InputError

KINDS = ("clusters", "nonlinear", "regression1d", "uniform")


def clusters(n, dim=2, seed=0, separation=4.0):
    """Two Gaussian blobs, labels 0/1, centers ``separation`` apart on the first axis."""
    rng = np.random.default_rng(seed)
    labels = np.arange(n) % 2
    rng.shuffle(labels)
    X = rng.normal(size=(n, dim))
    X[:, 0] += separation * (labels - 0.5)
    return X, labels


def nonlinear(n, seed=0, noise=0.1):
    """Two classes split by the curve ``x2 = sin(3 x1)`` on the square [-2, 2]^2.

    No straight line separates them well, which is what the readout
    comparison needs.
    """
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2.0, 2.0, size=(n, 2))
    boundary = np.sin(3.0 * X[:, 0]) + rng.normal(scale=noise, size=n)
    labels = ((X[:, 1] > boundary) ^ (np.abs(X[:, 0]) < 1.0)).astype(np.int64)
    return X, labels


def regression1d(n, seed=0, noise=0.0):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(0.0, 1.0, size=n))
    y = np.sin(2 * np.pi * x) + 0.5 * x
    if noise:
        y = y + rng.normal(scale=noise, size=n)
    return x[:, None], y[:, None]


def uniform(n, dim=4, seed=0):
    """Uniform features in the unit cube with a smooth scalar target."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, dim))
    y = np.sin(X @ np.linspace(1.0, 2.0, dim))
    return X, y[:, None]


def generate(kind, n, seed=0, dim=None):
    """``(column names, data matrix)`` for the CLI ``gen`` command."""
    if kind == "clusters":
        X, lab = clusters(n, dim or 2, seed)
        return [f"x{i}" for i in range(X.shape[1])] + ["label"], np.column_stack([X, lab])
    if kind == "nonlinear":
        X, lab = nonlinear(n, seed)
        return ["x0", "x1", "label"], np.column_stack([X, lab])
    if kind == "regression1d":
        x, y = regression1d(n, seed)
        return ["x0", "y"], np.column_stack([x, y])
    if kind == "uniform":
        X, y = uniform(n, dim or 4, seed)
        return [f"x{i}" for i in range(X.shape[1])] + ["y"], np.column_stack([X, y])
    raise InputError(f"unknown dataset kind {kind!r}; expected one of {KINDS}")
