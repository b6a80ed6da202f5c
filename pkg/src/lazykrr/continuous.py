"""Globally smoother variants of the sparse predictor.

``BlendedModel`` averages the local models of the J training points nearest
to the query (each anchor uses its own M-NN cell), weighted by a radial
function of the anchor distance divided by a length scale. The default
scale is the mean nearest-neighbor spacing of the training set; with a
unit scale the weights are close to uniform whenever anchors are much
closer together than the kernel width, and dropping an anchor then
causes a jump as large as the sparse model's own. ``HierModel`` adds a local sparse correction
of the residuals to a coarse dense model built on a greedy subset.
"""

from dataclasses import dataclass

import numpy as np

from .dense import DEFAULT_LAMBDA, DenseModel, fit_dense
from .errors import InputError
from .kernels import ACTIVATIONS, _canonical, as_points
from .selection import greedy_select
from .sparse import SparseModel

DEFAULT_BLEND = 4


class BlendedModel:
    def __init__(self, sparse, J=DEFAULT_BLEND, weight_activation="exponential", weight_scale="auto"):
        if not 1 <= int(J) <= sparse.n:
            raise InputError(f"blend count J must be in [1, {sparse.n}], got {J}")
        if weight_scale != "auto" and not float(weight_scale) > 0:
            raise InputError(f"weight_scale must be 'auto' or > 0, got {weight_scale!r}")
        self.sparse = sparse
        self.J = int(J)
        self.weight_activation = _canonical(weight_activation, ACTIVATIONS, "activation")
        self._scale = None if weight_scale == "auto" else float(weight_scale)
        self._anchor_cells = {}

    @property
    def weight_scale(self):
        """Length scale of the blend weights, resolved on first use when ``"auto"``."""
        if self._scale is None:
            sp = self.sparse
            h = 0.0
            if sp.n > 1:
                _, d = sp.index.query(sp.Xn, 2, warn=False)
                h = float(np.mean(d[:, 1]))
            self._scale = h if h > 0 else 1.0
        return self._scale

    def _cells_for(self, anchors):
        """Sorted M-NN cell of each training index in ``anchors``."""
        todo = np.setdiff1d(np.unique(anchors), np.fromiter(self._anchor_cells, dtype=np.int64))
        if todo.size:
            cells = self.sparse.cells_of(self.sparse.Xn[todo])
            for a, cell in zip(todo, cells):
                self._anchor_cells[int(a)] = cell
        return np.stack([self._anchor_cells[int(a)] for a in anchors.ravel()])

    def weights(self, Z):
        """Anchor indices (P, J) and normalized blend weights (P, J)."""
        Zn = self.sparse._normalized(Z)
        anchors, dist = self.sparse.index.query(Zn, self.J, warn=False)
        return anchors, self._weights(dist)

    def _weights(self, dist):
        dist = dist / self.weight_scale
        if self.weight_activation == "exponential":
            # shift by the nearest anchor so far queries do not underflow to 0/0
            w = np.exp(-(dist - dist[:, :1]))
        else:
            w = np.exp(-(dist * dist - dist[:, :1] ** 2))
        return w / w.sum(axis=1, keepdims=True)

    def predict(self, Z):
        sp = self.sparse
        Zn = sp._normalized(Z)
        P = Zn.shape[0]
        anchors, dist = sp.index.query(Zn, self.J, warn=False)
        w = self._weights(dist)
        keys = self._cells_for(anchors)
        local, _, _ = sp._evaluate(np.repeat(Zn, self.J, axis=0), keys)
        local = local.reshape(P, self.J, -1)
        return np.einsum("pj,pjd->pd", w, local)


def predict_blended(model, Z):
    return model.predict(Z)


@dataclass(eq=False)
class HierModel:
    coarse: DenseModel
    residual: SparseModel
    subset: np.ndarray
    Y: np.ndarray

    @property
    def n0(self):
        return len(self.subset)

    @property
    def M(self):
        return self.residual.M

    def predict(self, Z):
        return self.coarse.predict(Z) + self.residual.predict(Z)


def fit_hierarchical(spec, X, Y, M, N0, lam=DEFAULT_LAMBDA, start_index=0):
    """Coarse dense model on ``N0`` greedy points plus sparse residual model on all points."""
    X = as_points(X, "X")
    Y = as_points(Y, "Y")
    N = X.shape[0]
    if not 1 <= int(N0) <= N:
        raise InputError(f"coarse size N0 must be in [1, {N}], got {N0}")
    sel = greedy_select(spec.transform(X), int(N0), metric=spec.metric, start_index=start_index)
    subset = np.sort(sel.indices)
    coarse = fit_dense(spec, X[subset], Y[subset], lam)
    residual = SparseModel(spec, X, Y - coarse.predict(X), M, lam)
    return HierModel(coarse=coarse, residual=residual, subset=subset, Y=Y)


def predict_hierarchical(model, Z):
    return model.predict(Z)
