"""Regenerate the golden archives in tests/data.

Run once with ``python3 tests/make_golden.py``; the files are committed and
the archive tests check that current code reads them back unchanged.
"""

import pathlib

import numpy as np

from lazykrr import BlendedModel, KernelSpec, SparseModel, fit_dense, fit_hierarchical, init_hybrid, save_model
from lazykrr.learn import HybridModel
from lazykrr.tables import save_table

DATA = pathlib.Path(__file__).parent / "data"


def golden_models():
    rng = np.random.default_rng(2024)
    X = rng.normal(size=(40, 3))
    Y = np.column_stack([np.sin(X[:, 0]), X[:, 1] * X[:, 2]])
    spec = KernelSpec("euclidean", "exponential").fitted(X)
    sp = SparseModel(spec, X, Y, 8)
    params = init_hybrid(3, 6, 2, 5, states=X, seed=1)
    params["y1"] = rng.normal(size=(5, 6))
    params["y3"] = rng.normal(size=(5, 2))
    return {
        "dense": fit_dense(KernelSpec("manhattan", "exponential").fitted(X), X, Y),
        "sparse": sp,
        "blended": BlendedModel(sp, J=3),
        "hierarchical": fit_hierarchical(spec, X, Y, 8, 10),
        "hybrid": HybridModel(params=params),
    }


def golden_queries():
    return np.random.default_rng(7).normal(size=(25, 3))


def main():
    DATA.mkdir(exist_ok=True)
    Z = golden_queries()
    for kind, model in golden_models().items():
        save_model(model, DATA / f"{kind}.skm", feature_names=["a", "b", "c"], meta={"note": kind, "seed": 2024})
        pred = model.predict(Z)
        save_table(DATA / f"{kind}_pred.csv", [f"y{i}" for i in range(pred.shape[1])], pred)


if __name__ == "__main__":
    main()
