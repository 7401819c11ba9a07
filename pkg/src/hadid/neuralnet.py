"""Fully-connected ReLU network with dropout, softmax output and cross-entropy.

Written directly on numpy. Inputs are z-scored with statistics stored in the
model, so a serialized model is self-contained.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (DataError, DimensionMismatch, InvalidTarget, InvalidTopology,
                     ModelFormatError, NonFiniteLoss, SingleClassData)

FORMAT_NAME = "hadid-mlp"
FORMAT_VERSION = 1
PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 32
    max_epochs: int = 200
    patience: int = 20
    validation_fraction: float = 0.15
    max_grad_norm: float | None = 5.0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise DataError("learning_rate must be > 0")
        if not 0 <= self.momentum < 1:
            raise DataError("momentum must be in [0, 1)")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise DataError("batch_size, max_epochs and patience must be >= 1")
        if not 0 <= self.validation_fraction < 1:
            raise DataError("validation_fraction must be in [0, 1)")
        if self.max_grad_norm is not None and not self.max_grad_norm > 0:
            raise DataError("max_grad_norm must be > 0 (or None to disable clipping)")


class Mlp:
    """Feed-forward network ``layer_sizes[0] -> ... -> layer_sizes[-1]``.

    ``weights[l]`` has shape ``(layer_sizes[l], layer_sizes[l + 1])`` so a
    layer computes ``y @ W + b``. Dropout only touches hidden activations.
    """

    def __init__(self, layer_sizes, weights, biases, dropout_rate=0.0, rng_seed=0,
                 feature_mean=None, feature_std=None):
        sizes = [int(s) for s in layer_sizes]
        if len(sizes) < 2 or min(sizes) < 1:
            raise InvalidTopology(f"bad layer sizes {sizes}")
        if len(weights) != len(sizes) - 1 or len(biases) != len(sizes) - 1:
            raise InvalidTopology("one weight matrix and bias vector per layer")
        for l, (w, b) in enumerate(zip(weights, biases)):
            if np.shape(w) != (sizes[l], sizes[l + 1]) or np.shape(b) != (sizes[l + 1],):
                raise InvalidTopology(f"layer {l}: shapes {np.shape(w)}, {np.shape(b)} "
                                      f"do not match sizes {sizes[l]}->{sizes[l + 1]}")
        if not 0 <= dropout_rate < 1:
            raise InvalidTopology("dropout rate must be in [0, 1)")
        self.layer_sizes = sizes
        self.weights = [np.array(w, dtype=np.float64) for w in weights]
        self.biases = [np.array(b, dtype=np.float64) for b in biases]
        self.dropout_rate = float(dropout_rate)
        self.rng_seed = int(rng_seed)
        n_in = sizes[0]
        self.feature_mean = np.zeros(n_in) if feature_mean is None else np.array(feature_mean, float)
        self.feature_std = np.ones(n_in) if feature_std is None else np.array(feature_std, float)

    @property
    def n_inputs(self):
        return self.layer_sizes[0]

    @property
    def n_outputs(self):
        return self.layer_sizes[-1]

    def params(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self):
        return Mlp(self.layer_sizes, [w.copy() for w in self.weights],
                   [b.copy() for b in self.biases], self.dropout_rate, self.rng_seed,
                   self.feature_mean.copy(), self.feature_std.copy())

    # -- forward / backward -------------------------------------------------
    def _standardize(self, X):
        return (X - self.feature_mean) / self.feature_std

    def _forward(self, X, train=False, rng=None):
        """Return (probabilities, cache) for a batch of standardized inputs."""
        acts = [X]
        pre = []
        masks = []
        y = X
        last = len(self.weights) - 1
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = y @ w + b
            if l == last:
                break
            pre.append(z)
            y = np.maximum(z, 0.0)
            if train and self.dropout_rate > 0:
                keep = 1.0 - self.dropout_rate
                mask = (rng.random(y.shape) < keep) / keep
                y = y * mask
                masks.append(mask)
            else:
                masks.append(None)
            acts.append(y)
        return softmax(z), (acts, pre, masks)

    def _backward(self, P, T, cache):
        """Gradients of the mean cross-entropy over the batch.

        ReLU'(0) is taken as 1/2, the mean of the one-sided slopes, which is
        also what a central difference measures at the kink.
        """
        acts, pre, masks = cache
        n = P.shape[0]
        delta = (P - T) / n
        gw = [None] * len(self.weights)
        gb = [None] * len(self.weights)
        for l in range(len(self.weights) - 1, -1, -1):
            gw[l] = acts[l].T @ delta
            gb[l] = delta.sum(axis=0)
            if l == 0:
                break
            delta = delta @ self.weights[l].T
            if masks[l - 1] is not None:
                delta = delta * masks[l - 1]
            z = pre[l - 1]
            delta = delta * np.where(z > 0, 1.0, np.where(z == 0, 0.5, 0.0))
        return gw, gb

    def predict_proba(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_inputs:
            raise DimensionMismatch(f"expected {self.n_inputs} inputs, got {X.shape[1]}")
        P, _ = self._forward(self._standardize(X))
        return P

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    # -- serialization ------------------------------------------------------
    def to_dict(self):
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "layer_sizes": self.layer_sizes,
            "dropout_rate": self.dropout_rate,
            "rng_seed": self.rng_seed,
            "feature_mean": self.feature_mean.tolist(),
            "feature_std": self.feature_std.tolist(),
            "weights": [w.ravel(order="C").tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != FORMAT_NAME:
            raise ModelFormatError(f"not a {FORMAT_NAME} document")
        if d.get("version") != FORMAT_VERSION:
            raise ModelFormatError(f"model format version {d.get('version')} "
                                   f"!= supported {FORMAT_VERSION}")
        try:
            sizes = [int(s) for s in d["layer_sizes"]]
            weights = [np.asarray(w, float).reshape(sizes[l], sizes[l + 1])
                       for l, w in enumerate(d["weights"])]
            return cls(sizes, weights, d["biases"], d["dropout_rate"], d["rng_seed"],
                       d["feature_mean"], d["feature_std"])
        except (KeyError, ValueError, TypeError, IndexError) as exc:
            raise ModelFormatError(f"malformed model document: {exc}") from exc

    def dumps(self):
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def loads(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(d)


def softmax(z):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def init_mlp(layer_sizes, dropout_rate=0.5, seed=0) -> Mlp:
    """He-initialized network: weights ~ N(0, 2/fan_in), zero biases."""
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 3:
        raise InvalidTopology("need an input layer, at least one hidden layer and an output layer")
    if min(sizes) < 1:
        raise InvalidTopology(f"layer sizes must be >= 1, got {sizes}")
    rng = np.random.default_rng(seed)
    weights = [rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_in, n_out))
               for n_in, n_out in zip(sizes[:-1], sizes[1:])]
    biases = [np.zeros(n_out) for n_out in sizes[1:]]
    return Mlp(sizes, weights, biases, dropout_rate, seed)


def forward(m: Mlp, x, mode="infer", rng=None):
    """Class probabilities for one input vector (or a batch of rows).

    ``mode="train"`` applies inverted dropout to the hidden layers using
    ``rng`` (a fresh generator seeded from the model when omitted).
    """
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', not {mode!r}")
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    if X.shape[1] != m.n_inputs:
        raise DimensionMismatch(f"expected {m.n_inputs} inputs, got {X.shape[1]}")
    if mode == "train" and rng is None:
        rng = np.random.default_rng(m.rng_seed)
    P, _ = m._forward(m._standardize(X), train=mode == "train", rng=rng)
    return P[0] if single else P


def loss(p, t):
    """Cross-entropy ``-sum t_j log p_j`` with p clamped to >= 1e-12."""
    p = np.asarray(p, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if p.shape != t.shape:
        raise InvalidTarget("target and probability shapes differ")
    if not (np.all((t == 0) | (t == 1)) and np.all(t.sum(axis=-1) == 1)):
        raise InvalidTarget("target must be one-hot")
    if np.any(np.abs(p.sum(axis=-1) - 1.0) > 1e-9):
        raise DataError("probabilities must sum to 1")
    return float(-np.sum(t * np.log(np.maximum(p, PROB_FLOOR))) / (p.size // p.shape[-1]))


def _one_hot(y, n_classes):
    T = np.zeros((len(y), n_classes))
    T[np.arange(len(y)), y] = 1.0
    return T


def _split(y, fraction, rng):
    """Stratified train/validation split; each class keeps >= 1 training row."""
    train_idx, val_idx = [], []
    for c in np.unique(y):
        idx = np.flatnonzero(y == c)
        idx = idx[rng.permutation(idx.size)]
        n_val = min(int(round(fraction * idx.size)), idx.size - 1)
        val_idx.append(idx[:n_val])
        train_idx.append(idx[n_val:])
    return np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(val_idx))


def _mean_ce(P, T):
    return float(-np.mean(np.sum(T * np.log(np.maximum(P, PROB_FLOOR)), axis=1)))


def train(m: Mlp, X, y, cfg: TrainConfig = None, *, seed=None):
    """Mini-batch SGD with momentum and early stopping.

    ``X`` is an (n, d) feature matrix and ``y`` integer class indices in
    ``[0, n_outputs)``. A stratified ``validation_fraction`` of the rows is
    held out; training stops after ``patience`` epochs without a lower
    validation cross-entropy and the best epoch's parameters are returned.
    Without validation rows the training loss drives the selection. The
    global gradient norm of each batch is clipped to ``max_grad_norm``.

    Returns ``(model, history)`` where history holds one dict per epoch.
    """
    cfg = cfg or TrainConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionMismatch("X must be (n, d) with one label per row")
    if X.shape[1] != m.n_inputs:
        raise DimensionMismatch(f"expected {m.n_inputs} features, got {X.shape[1]}")
    if y.size and (y.min() < 0 or y.max() >= m.n_outputs):
        raise InvalidTarget("class index out of range")
    if np.unique(y).size < 2:
        raise SingleClassData("training data must contain at least two classes")

    rng = np.random.default_rng([m.rng_seed if seed is None else seed, 7])
    model = m.copy()
    tr, va = _split(y, cfg.validation_fraction, rng)
    mean = X[tr].mean(axis=0)
    std = X[tr].std(axis=0)
    std[std < 1e-12] = 1.0
    model.feature_mean, model.feature_std = mean, std
    Xs = model._standardize(X)
    T = _one_hot(y, model.n_outputs)
    Xtr, Ttr = Xs[tr], T[tr]
    Xva, Tva = Xs[va], T[va]

    vel = [np.zeros_like(p) for p in model.params()]
    best = None
    best_loss = np.inf
    since_best = 0
    history = []
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(tr))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            b = order[start:start + cfg.batch_size]
            P, cache = model._forward(Xtr[b], train=True, rng=rng)
            total += _mean_ce(P, Ttr[b]) * len(b)
            gw, gb = model._backward(P, Ttr[b], cache)
            grads = []
            for g_w, g_b in zip(gw, gb):
                grads += [g_w, g_b]
            if cfg.max_grad_norm is not None:
                norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads))
                if norm > cfg.max_grad_norm:
                    grads = [g * (cfg.max_grad_norm / norm) for g in grads]
            for p, v, g in zip(model.params(), vel, grads):
                v *= cfg.momentum
                v -= cfg.learning_rate * g
                p += v
        train_loss = total / len(tr)
        if not np.isfinite(train_loss):
            raise NonFiniteLoss(epoch)
        P_tr, _ = model._forward(Xtr)
        rec = {"epoch": epoch, "train_loss": train_loss,
               "train_acc": float(np.mean(P_tr.argmax(1) == Ttr.argmax(1)))}
        if len(va):
            P_va, _ = model._forward(Xva)
            rec["val_loss"] = _mean_ce(P_va, Tva)
            rec["val_acc"] = float(np.mean(P_va.argmax(1) == Tva.argmax(1)))
            monitor = rec["val_loss"]
        else:
            monitor = _mean_ce(P_tr, Ttr)
        if not np.isfinite(monitor):
            raise NonFiniteLoss(epoch)
        history.append(rec)
        if monitor < best_loss - 1e-12:
            best_loss = monitor
            best = model.copy()
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break
    return best, history


def analytic_gradients(m: Mlp, x, t):
    """Gradients of the single-example loss w.r.t. every parameter (no dropout)."""
    X = m._standardize(np.atleast_2d(np.asarray(x, float)))
    T = np.atleast_2d(np.asarray(t, float))
    P, cache = m._forward(X)
    gw, gb = m._backward(P, T, cache)
    out = []
    for g_w, g_b in zip(gw, gb):
        out += [g_w, g_b]
    return out


def gradient_check(m: Mlp, x, t, epsilon=1e-5, n_params=200, seed=0):
    """Largest relative gap between backprop and central-difference gradients.

    Up to ``n_params`` parameters are sampled (all of them when the model is
    smaller). The relative error is ``|a - n| / max(|a| + |n|, 1e-6)``, so
    gradients that are both tiny are compared on an absolute scale.
    """
    m = m.copy()
    t = np.asarray(t, float)
    analytic = analytic_gradients(m, x, t)
    params = m.params()
    index = [(k, i) for k, p in enumerate(params) for i in range(p.size)]
    rng = np.random.default_rng(seed)
    if len(index) > n_params:
        pick = rng.choice(len(index), size=n_params, replace=False)
        index = [index[i] for i in np.sort(pick)]

    def cost():
        return loss(forward(m, x), t)

    worst = 0.0
    for k, i in index:
        flat = params[k].reshape(-1)
        old = flat[i]
        flat[i] = old + epsilon
        c_plus = cost()
        flat[i] = old - epsilon
        c_minus = cost()
        flat[i] = old
        num = (c_plus - c_minus) / (2 * epsilon)
        ana = analytic[k].reshape(-1)[i]
        err = abs(ana - num) / max(abs(ana) + abs(num), 1e-6)
        worst = max(worst, err)
    return worst
