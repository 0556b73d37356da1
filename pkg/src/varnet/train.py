"""Backpropagation and (sub)gradient training under an l1 row budget.

Two regimes are supported:

* ``Projection(V)``: after each gradient step every row is projected back onto
  the l1 ball of radius ``V``, so iterates never leave the constrained class.
* ``Penalty(lam, style)``: the l1 penalty subgradient is added to the data
  gradient and an unprojected step is taken. ``sum_rows`` penalizes the total
  l1 norm of all weights; ``max_row`` penalizes ``V_op(f) ** L`` through the
  row(s) attaining the maximum.

The optimizer is plain (sub)gradient descent with sign(0) = 0 throughout.
"""
import csv
import enum
import time
from dataclasses import dataclass, field

import numpy as np

from .l1 import project_rows
from .network import INPUT_BIAS, Network


class LossKind(str, enum.Enum):
    SQUARE_L2 = "square_l2"
    ABSOLUTE_L1 = "absolute_l1"

    def __call__(self, pred, y):
        r = np.asarray(pred, dtype=np.float64) - np.asarray(y, dtype=np.float64)
        return r * r if self is LossKind.SQUARE_L2 else np.abs(r)

    def residual_grad(self, r):
        """d loss / d prediction, elementwise in the residual ``pred - y``."""
        return 2.0 * r if self is LossKind.SQUARE_L2 else np.sign(r)


class PenaltyStyle(str, enum.Enum):
    SUM_ROWS = "sum_rows"
    MAX_ROW = "max_row"


@dataclass(frozen=True)
class Projection:
    V: float

    def __post_init__(self):
        if not (np.isfinite(self.V) and self.V > 0):
            raise ValueError(f"projection radius must be positive, got {self.V}")

    @property
    def value(self):
        return self.V


@dataclass(frozen=True)
class Penalty:
    """l1 penalty with weight ``lam``.

    If ``target_total`` is set, ``lam`` is only the starting weight: after every
    epoch it moves by dual ascent,
    ``lam <- max(0, lam + dual_lr * (total_l1 - target_total) / target_total)``,
    so the realized total l1 norm of the weights settles near the target.
    """

    lam: float
    style: PenaltyStyle = PenaltyStyle.SUM_ROWS
    target_total: float = None
    dual_lr: float = 1e-4

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam >= 0):
            raise ValueError(f"penalty weight must be >= 0, got {self.lam}")
        object.__setattr__(self, "style", PenaltyStyle(self.style))
        if self.target_total is not None and not self.target_total > 0:
            raise ValueError(f"target_total must be > 0, got {self.target_total}")
        if not self.dual_lr >= 0:
            raise ValueError(f"dual_lr must be >= 0, got {self.dual_lr}")

    @property
    def value(self):
        return self.lam


@dataclass(frozen=True)
class TrainConfig:
    mode: object
    loss: LossKind = LossKind.SQUARE_L2
    epochs: int = 1000
    batch_size: object = None  # None: full batch up to 1024 samples, else 256; "full": always
    learning_rate: float = 0.05
    lr_decay: str = "none"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "loss", LossKind(self.loss))
        if not isinstance(self.mode, (Projection, Penalty)):
            raise TypeError(f"mode must be Projection or Penalty, got {self.mode!r}")
        if int(self.epochs) < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size not in (None, "full") and int(self.batch_size) < 1:
            raise ValueError(f"batch_size must be >= 1, None or 'full', got {self.batch_size!r}")
        if self.lr_decay not in ("none", "inverse_sqrt"):
            raise ValueError(f"lr_decay must be 'none' or 'inverse_sqrt', got {self.lr_decay!r}")

    def resolved_batch_size(self, n):
        if self.batch_size == "full":
            return n
        if self.batch_size is not None:
            return min(int(self.batch_size), n)
        return n if n <= 1024 else 256

    def lr_at(self, epoch):
        """Learning rate for the 1-based ``epoch``."""
        if self.lr_decay == "inverse_sqrt":
            return self.learning_rate / np.sqrt(epoch)
        return self.learning_rate


@dataclass
class TrainTrace:
    loss: list = field(default_factory=list)
    variation: list = field(default_factory=list)
    epochs: int = 0
    wall_time: float = 0.0
    # largest max-row norm seen after any single step
    step_max_variation: float = 0.0
    violations: int = 0
    final_lam: float = None

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "loss", "variation"])
            for i, (l, v) in enumerate(zip(self.loss, self.variation), start=1):
                w.writerow([i, repr(float(l)), repr(float(v))])


def _as_batch(net, X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    y = np.atleast_1d(y)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    if X.ndim != 2 or X.shape[1] != net.spec.input_dim:
        raise ValueError(f"batch inputs must have shape (n, {net.spec.input_dim}), got {X.shape}")
    if y.shape != (X.shape[0],):
        raise ValueError(f"responses must have shape ({X.shape[0]},), got {y.shape}")
    return X, y


def _forward_cache(weights, X, act):
    bias = act.at_zero
    A = np.hstack([X, np.full((X.shape[0], 1), INPUT_BIAS)])
    acts = [A]
    for W in weights[:-1]:
        H = act.fn(A @ W.T)
        A = np.hstack([H, np.full((H.shape[0], 1), bias)])
        acts.append(A)
    return acts, A @ weights[-1][0]


def _loss_and_grad(weights, X, y, loss, act):
    acts, pred = _forward_cache(weights, X, act)
    r = pred - y
    value = float(np.mean(loss(pred, y)))
    delta = (loss.residual_grad(r) / X.shape[0])[:, None]  # (n, 1)
    grads = [None] * len(weights)
    for l in range(len(weights) - 1, -1, -1):
        grads[l] = delta.T @ acts[l]
        if l == 0:
            break
        H = acts[l][:, :-1]
        # logistic: sigma' = sigma (1 - sigma); bias column carries no gradient
        delta = (delta @ weights[l][:, :-1]) * (H * (1.0 - H))
    return value, grads


def empirical_loss(net, X, y, loss=LossKind.SQUARE_L2):
    X, y = _as_batch(net, X, y)
    _, pred = _forward_cache(net.weights, X, net.spec.activation)
    return float(np.mean(LossKind(loss)(pred, y)))


def gradient(net, X, y, loss=LossKind.SQUARE_L2):
    """Gradient of the mean batch loss, one array per layer (weight shapes)."""
    X, y = _as_batch(net, X, y)
    _, grads = _loss_and_grad(net.weights, X, y, LossKind(loss), net.spec.activation)
    return grads


def finite_diff_gradient(net, X, y, loss=LossKind.SQUARE_L2, h=1e-5):
    """Central-difference gradient of the mean batch loss. Test oracle only."""
    if not h > 0:
        raise ValueError(f"step h must be > 0, got {h}")
    X, y = _as_batch(net, X, y)
    loss = LossKind(loss)
    theta = net.flat()
    g = np.empty_like(theta)
    for j in range(theta.size):
        tp = theta.copy()
        tp[j] += h
        tm = theta.copy()
        tm[j] -= h
        g[j] = (empirical_loss(net.from_flat(tp), X, y, loss)
                - empirical_loss(net.from_flat(tm), X, y, loss)) / (2 * h)
    return list(net.from_flat(g).weights)


def _check_grad_shapes(net, grad):
    if len(grad) != len(net.weights):
        raise ValueError(f"expected {len(net.weights)} gradient arrays, got {len(grad)}")
    for l, (W, G) in enumerate(zip(net.weights, grad), start=1):
        if np.shape(G) != W.shape:
            raise ValueError(f"layer {l}: gradient shape {np.shape(G)} != weight shape {W.shape}")


def _penalty_subgradient(weights, lam, style):
    if lam == 0:
        return [np.zeros_like(W) for W in weights]
    if style is PenaltyStyle.SUM_ROWS:
        return [lam * np.sign(W) for W in weights]
    norms = [np.abs(W).sum(axis=1) for W in weights]
    vmax = max(n.max() for n in norms)
    L = len(weights)
    scale = lam * L * vmax ** (L - 1)
    out = []
    for W, n in zip(weights, norms):
        P = np.zeros_like(W)
        rows = n == vmax
        P[rows] = scale * np.sign(W[rows])
        out.append(P)
    return out


def step_projected(net, grad, lr, V):
    _check_grad_shapes(net, grad)
    if not lr > 0:
        raise ValueError(f"lr must be > 0, got {lr}")
    if not V > 0:
        raise ValueError(f"V must be > 0, got {V}")
    return net.with_weights([project_rows(W - lr * G, V) for W, G in zip(net.weights, grad)])


def step_penalized(net, grad, lr, lam, style=PenaltyStyle.SUM_ROWS):
    _check_grad_shapes(net, grad)
    if not lam >= 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    pen = _penalty_subgradient(net.weights, lam, PenaltyStyle(style))
    return net.with_weights([W - lr * (G + P) for W, G, P in zip(net.weights, grad, pen)])


def _max_row_norm(weights):
    return max(float(np.abs(W).sum(axis=1).max()) for W in weights)


def train(net, X, y, config):
    """Run ``config.epochs`` passes of (mini)batch steps from ``net``.

    Minibatch order is reshuffled every epoch from ``config.seed``; the result
    depends only on ``(net, X, y, config)``.
    """
    X, y = _as_batch(net, X, y)
    n = X.shape[0]
    act = net.spec.activation
    loss = config.loss
    mode = config.mode
    bs = config.resolved_batch_size(n)
    rng = np.random.default_rng(config.seed)
    weights = [W.copy() for W in net.weights]
    trace = TrainTrace()
    trace.step_max_variation = _max_row_norm(weights)
    lam = mode.lam if isinstance(mode, Penalty) else None
    start = time.perf_counter()

    for epoch in range(1, int(config.epochs) + 1):
        lr = config.lr_at(epoch)
        order = rng.permutation(n) if bs < n else None
        for s in range(0, n, bs):
            if order is None:
                Xb, yb = X, y
            else:
                idx = order[s:s + bs]
                Xb, yb = X[idx], y[idx]
            _, grads = _loss_and_grad(weights, Xb, yb, loss, act)
            if isinstance(mode, Projection):
                weights = [project_rows(W - lr * G, mode.V) for W, G in zip(weights, grads)]
                vmax = _max_row_norm(weights)
                if vmax > mode.V + 1e-9:
                    trace.violations += 1
            else:
                pen = _penalty_subgradient(weights, lam, mode.style)
                weights = [W - lr * (G + P) for W, G, P in zip(weights, grads, pen)]
                vmax = _max_row_norm(weights)
            trace.step_max_variation = max(trace.step_max_variation, vmax)
        _, pred = _forward_cache(weights, X, act)
        trace.loss.append(float(np.mean(loss(pred, y))))
        trace.variation.append(_max_row_norm(weights))
        if lam is not None and mode.target_total is not None:
            total = sum(float(np.abs(W).sum()) for W in weights)
            lam = max(0.0, lam + mode.dual_lr * (total - mode.target_total) / mode.target_total)

    trace.epochs = int(config.epochs)
    trace.final_lam = lam
    trace.wall_time = time.perf_counter() - start
    final = Network(net.spec, tuple(weights))
    return final, trace
