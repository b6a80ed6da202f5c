"""Gradient-based training of kernel readouts and of a kernel-perturbed MLP.

Gradients are assembled by hand from the regressor's vector-Jacobian products
(``DenseModel.vjp``); there is no autodiff framework involved.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .dense import DEFAULT_LAMBDA, fit_dense
from .errors import InputError, TrainingError
from .kernels import KernelSpec, as_points
from .selection import greedy_select, gromov_monge

LOSSES = ("mse", "cross_entropy", "smooth_l1")
SMOOTH_L1_BETA = 1.0


@dataclass(frozen=True)
class LossSpec:
    kind: str = "cross_entropy"
    gm_weight: float = 0.0

    def __post_init__(self):
        kind = {"ce": "cross_entropy", "xent": "cross_entropy", "huber": "smooth_l1"}.get(self.kind, self.kind)
        if kind not in LOSSES:
            raise InputError(f"unknown loss {self.kind!r}; expected one of {LOSSES}")
        object.__setattr__(self, "kind", kind)
        if self.gm_weight < 0:
            raise InputError("gm_weight must be >= 0")


def one_hot(labels, n_classes=None):
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise InputError("labels must be a 1-D integer array")
    if labels.size and (np.any(labels < 0) or np.any(labels != np.round(labels))):
        raise InputError("labels must be non-negative integers")
    labels = labels.astype(np.int64)
    C = int(labels.max()) + 1 if n_classes is None else int(n_classes)
    if labels.size and labels.max() >= C:
        raise InputError(f"label {labels.max()} out of range for {C} classes")
    out = np.zeros((labels.size, C))
    out[np.arange(labels.size), labels] = 1.0
    return out


def loss_and_grad(spec, predictions, targets):
    """Mean-reduced loss and its gradient with respect to ``predictions``.

    Cross-entropy takes integer labels and averages over samples; mse and
    smooth-L1 average over all entries.
    """
    A = np.atleast_2d(np.asarray(predictions, dtype=np.float64))
    P, C = A.shape
    if spec.kind == "cross_entropy":
        labels = np.asarray(targets).ravel()
        if labels.shape[0] != P:
            raise InputError(f"{labels.shape[0]} labels for {P} predictions")
        if P and (np.any(labels < 0) or np.any(labels >= C) or np.any(labels != np.round(labels))):
            raise InputError(f"labels must be integers in [0, {C})")
        labels = labels.astype(np.int64)
        shifted = A - A.max(axis=1, keepdims=True)
        logz = np.log(np.exp(shifted).sum(axis=1))
        logp = shifted - logz[:, None]
        value = -logp[np.arange(P), labels].sum() / P
        grad = np.exp(logp)
        grad[np.arange(P), labels] -= 1.0
        return float(value), grad / P
    B = np.asarray(targets, dtype=np.float64).reshape(A.shape)
    d = A - B
    if spec.kind == "mse":
        return float(np.mean(d * d)), 2.0 * d / d.size
    small = np.abs(d) < SMOOTH_L1_BETA
    value = np.where(small, 0.5 * d * d / SMOOTH_L1_BETA, np.abs(d) - 0.5 * SMOOTH_L1_BETA)
    grad = np.where(small, d / SMOOTH_L1_BETA, np.sign(d))
    return float(np.mean(value)), grad / d.size


# ---------------------------------------------------------------- AdamW


@dataclass
class TrainState:
    params: dict
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0
    lr: float = 1e-3
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    frozen: frozenset = frozenset()

    def __post_init__(self):
        self.params = {k: np.array(v, dtype=np.float64) for k, v in self.params.items()}
        for k, p in self.params.items():
            self.m.setdefault(k, np.zeros_like(p))
            self.v.setdefault(k, np.zeros_like(p))
        self.frozen = frozenset(self.frozen)

    @property
    def trainable(self):
        return [k for k in self.params if k not in self.frozen]


def adamw_step(state, grads):
    """One AdamW update; returns a new state and leaves ``state`` untouched."""
    t = state.step + 1
    for k, g in grads.items():
        if k in state.frozen or k not in state.params:
            continue
        if np.shape(g) != state.params[k].shape:
            raise InputError(f"gradient for {k!r} has shape {np.shape(g)}, expected {state.params[k].shape}")
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for {k!r} at step {t}", step=t)
    params, m, v = dict(state.params), dict(state.m), dict(state.v)
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for k, g in grads.items():
        if k in state.frozen or k not in params:
            continue
        g = np.asarray(g, dtype=np.float64)
        p = params[k] * (1.0 - state.lr * state.weight_decay)
        m[k] = b1 * m[k] + (1.0 - b1) * g
        v[k] = b2 * v[k] + (1.0 - b2) * g * g
        params[k] = p - state.lr * (m[k] / c1) / (np.sqrt(v[k] / c2) + state.eps)
    return replace(state, params=params, m=m, v=v, step=t)


# ---------------------------------------------------------------- kernel readout


def readout_loss_and_grads(spec, centers, targets, Z, labels, loss, lam=DEFAULT_LAMBDA):
    """Loss of the readout ``k(Z, centers) K^-1 targets`` and its gradients.

    Returns ``(value, {"centers", "targets", "Z"})``; a positive
    ``loss.gm_weight`` adds the Gromov-Monge term of (centers, targets).
    """
    model = fit_dense(spec, centers, targets, lam, warn=False)
    pred = model.predict(Z)
    value, G = loss_and_grad(loss, pred, labels)
    gT, gC, gZ = model.vjp(Z, G)
    if loss.gm_weight > 0:
        gm, gmx, gmy = gromov_monge(centers, targets)
        value += loss.gm_weight * gm
        gC = gC + loss.gm_weight * gmx
        gT = gT + loss.gm_weight * gmy
    return value, {"centers": gC, "targets": gT, "Z": gZ}


@dataclass
class ReadoutConfig:
    epochs: int = 50
    batch: int = 64
    lr: float = 1e-3
    weight_decay: float = 0.0
    learn_targets: bool = True
    learn_centers: bool = False
    n_centers: int | None = None
    center_batch: int | None = None
    loss: str = "cross_entropy"
    gm_weight: float = 0.0
    lam: float = DEFAULT_LAMBDA
    seed: int = 0


@dataclass
class ReadoutResult:
    model: object
    curve: np.ndarray
    state: TrainState
    center_indices: np.ndarray

    def predict(self, Z):
        return self.model.predict(Z)

    def predict_labels(self, Z):
        return np.argmax(self.model.predict(Z), axis=1)


def _readout_targets(loss, labels, n_classes):
    return labels if loss.kind == "cross_entropy" else one_hot(labels, n_classes)


def train_readout(spec, X, labels, config=None):
    """Train kernel centers and/or targets of a readout with AdamW.

    Centers start at the training features (or a greedy subset of
    ``n_centers`` of them) and targets at the one-hot labels, so zero epochs
    give back the training-free kernel classifier. Each step fits the
    regressor on the current centers (all of them, or ``center_batch`` random
    ones), evaluates it on a minibatch of features and backpropagates.
    The curve holds the full-data loss before training and after each epoch.
    """
    cfg = config or ReadoutConfig()
    X = as_points(X)
    labels = np.asarray(labels).ravel()
    N = X.shape[0]
    if labels.shape[0] != N:
        raise InputError(f"{labels.shape[0]} labels for {N} points")
    onehot = one_hot(labels)
    C = onehot.shape[1]
    loss = LossSpec(cfg.loss, cfg.gm_weight)
    n_c = N if cfg.n_centers is None else int(cfg.n_centers)
    if not 1 <= n_c <= N:
        raise InputError(f"n_centers must be in [1, {N}]")
    if n_c == N:
        cidx = np.arange(N)
    else:
        cidx = np.sort(greedy_select(spec.transform(X), n_c, metric=spec.metric).indices)
    frozen = set()
    if not cfg.learn_targets:
        frozen.add("targets")
    if not cfg.learn_centers:
        frozen.add("centers")
    state = TrainState(
        params={"centers": X[cidx], "targets": onehot[cidx]},
        lr=cfg.lr,
        weight_decay=cfg.weight_decay,
        frozen=frozen,
    )
    eval_targets = _readout_targets(loss, labels, C)
    rng = np.random.default_rng(cfg.seed)

    def full_loss(st):
        model = fit_dense(spec, st.params["centers"], st.params["targets"], cfg.lam, warn=False)
        value = loss_and_grad(loss, model.predict(X), eval_targets)[0]
        if loss.gm_weight > 0:
            value += loss.gm_weight * gromov_monge(st.params["centers"], st.params["targets"])[0]
        return value

    curve = [(0, full_loss(state))]
    batch = max(1, min(int(cfg.batch), N))
    for epoch in range(1, int(cfg.epochs) + 1):
        if state.trainable:
            order = rng.permutation(N)
            for s in range(0, N, batch):
                b = order[s : s + batch]
                if cfg.center_batch is not None and cfg.center_batch < n_c:
                    c = np.sort(rng.choice(n_c, size=int(cfg.center_batch), replace=False))
                else:
                    c = slice(None)
                centers = state.params["centers"][c]
                targets = state.params["targets"][c]
                value, g = readout_loss_and_grads(
                    spec, centers, targets, X[b], eval_targets[b], loss, cfg.lam
                )
                if not np.isfinite(value):
                    raise TrainingError(f"loss diverged at step {state.step + 1}", step=state.step + 1)
                grads = {}
                for name, local in (("centers", g["centers"]), ("targets", g["targets"])):
                    full = np.zeros_like(state.params[name])
                    full[c] = local
                    grads[name] = full
                state = adamw_step(state, grads)
        value = full_loss(state)
        if not np.isfinite(value):
            raise TrainingError(f"loss diverged in epoch {epoch}", step=state.step)
        curve.append((epoch, value))
    model = fit_dense(spec, state.params["centers"], state.params["targets"], cfg.lam, warn=False)
    return ReadoutResult(model=model, curve=np.array(curve), state=state, center_indices=cidx)


# ---------------------------------------------------------------- hybrid model

HYBRID_PARAMS = ("theta1", "theta2", "theta3", "x1", "y1", "x3", "y3")
KERNEL_PARAMS = ("x1", "y1", "x3", "y3")


def _relu(a):
    return np.maximum(a, 0.0)


def mlp_forward(params, s):
    """Plain three-layer ReLU network without the kernel terms."""
    s = as_points(s, "s")
    return _relu(_relu(s @ params["theta1"]) @ params["theta2"]) @ params["theta3"]


def _check_hybrid_shapes(p, s):
    S, L = p["theta1"].shape
    A = p["theta3"].shape[1]
    B = p["x1"].shape[0]
    want = {
        "theta1": (S, L),
        "theta2": (L, L),
        "theta3": (L, A),
        "x1": (B, S),
        "y1": (B, L),
        "x3": (p["x3"].shape[0], S),
        "y3": (p["x3"].shape[0], A),
    }
    for k, shape in want.items():
        if p[k].shape != shape:
            raise InputError(f"hybrid parameter {k!r} has shape {p[k].shape}, expected {shape}")
    if s.shape[1] != S:
        raise InputError(f"state dimension {s.shape[1]} does not match theta1 ({S})")


def _hybrid_pass(params, s, spec, lam):
    p = params
    s = as_points(s, "s")
    _check_hybrid_shapes(p, s)
    k1 = fit_dense(spec, p["x1"], p["y1"], lam, warn=False)
    k3 = fit_dense(spec, p["x3"], p["y3"], lam, warn=False)
    h1 = s @ p["theta1"]
    u = _relu(h1) + k1.predict(s)
    h2 = u @ p["theta2"]
    a2 = _relu(h2)
    out = a2 @ p["theta3"] + k3.predict(s)
    return out, (s, h1, u, h2, a2, k1, k3)


def hybrid_forward(params, s, spec=None, lam=DEFAULT_LAMBDA):
    """``relu((relu(s t1) + P1(s)) t2) t3 + P3(s)`` with kernel regressors P1, P3."""
    spec = KernelSpec() if spec is None else spec
    return _hybrid_pass(params, s, spec, lam)[0]


def hybrid_loss_and_grads(params, s, targets, loss, spec=None, lam=DEFAULT_LAMBDA):
    spec = KernelSpec() if spec is None else spec
    out, (s, h1, u, h2, a2, k1, k3) = _hybrid_pass(params, s, spec, lam)
    value, G = loss_and_grad(loss, out, targets)
    p = params
    grads = {"theta3": a2.T @ G}
    gh2 = (G @ p["theta3"].T) * (h2 > 0)
    grads["theta2"] = u.T @ gh2
    gu = gh2 @ p["theta2"].T
    grads["theta1"] = s.T @ (gu * (h1 > 0))
    grads["y1"], grads["x1"], _ = k1.vjp(s, gu)
    grads["y3"], grads["x3"], _ = k3.vjp(s, G)
    return value, grads


@dataclass(eq=False)
class HybridModel:
    params: dict
    spec: KernelSpec = field(default_factory=KernelSpec)
    lam: float = DEFAULT_LAMBDA

    def predict(self, s):
        return hybrid_forward(self.params, s, self.spec, self.lam)


def init_hybrid(S, L, A, B, states=None, seed=0):
    """Uniform(+-1/sqrt(fan_in)) weights, centers at greedy-selected states, zero kernel targets."""
    rng = np.random.default_rng(seed)

    def dense(fan_in, fan_out):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=(fan_in, fan_out))

    params = {"theta1": dense(S, L), "theta2": dense(L, L), "theta3": dense(L, A)}
    if states is not None:
        states = as_points(states, "states")
        if states.shape[0] < B:
            raise InputError(f"need at least B={B} states to place kernel centers")
        sel = greedy_select(states, B).indices
        x = states[np.sort(sel)]
        params["x1"], params["x3"] = x.copy(), x.copy()
    else:
        params["x1"] = rng.normal(size=(B, S))
        params["x3"] = rng.normal(size=(B, S))
    params["y1"] = np.zeros((B, L))
    params["y3"] = np.zeros((B, A))
    return params


@dataclass
class HybridConfig:
    epochs: int = 20
    batch: int = 64
    lr: float = 1e-3
    weight_decay: float = 0.0
    loss: str = "smooth_l1"
    lam: float = DEFAULT_LAMBDA
    seed: int = 0
    freeze_kernel: bool = False


def train_hybrid(state, S_data, targets, config=None, spec=None):
    """Supervised AdamW training of every hybrid parameter set.

    ``freeze_kernel`` freezes x1, y1, x3, y3 (the plain-MLP ablation when the
    kernel targets are zero). Returns the final state and the per-epoch
    full-data loss curve (epoch 0 = before training).
    """
    cfg = config or HybridConfig()
    spec = KernelSpec() if spec is None else spec
    S_data = as_points(S_data, "states")
    targets = as_points(targets, "targets")
    loss = LossSpec(cfg.loss)
    state = replace(state, lr=cfg.lr, weight_decay=cfg.weight_decay)
    if cfg.freeze_kernel:
        state = replace(state, frozen=frozenset(state.frozen) | set(KERNEL_PARAMS))
    rng = np.random.default_rng(cfg.seed)
    N = S_data.shape[0]
    batch = max(1, min(int(cfg.batch), N))

    def full_loss(st):
        return loss_and_grad(loss, hybrid_forward(st.params, S_data, spec, cfg.lam), targets)[0]

    curve = [(0, full_loss(state))]
    for epoch in range(1, int(cfg.epochs) + 1):
        order = rng.permutation(N)
        for s in range(0, N, batch):
            b = order[s : s + batch]
            value, grads = hybrid_loss_and_grads(state.params, S_data[b], targets[b], loss, spec, cfg.lam)
            if not np.isfinite(value):
                raise TrainingError(f"loss diverged at step {state.step + 1}", step=state.step + 1)
            state = adamw_step(state, grads)
        curve.append((epoch, full_loss(state)))
    return state, np.array(curve)
