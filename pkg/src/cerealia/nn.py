"""Minimal feed-forward network with analytic gradients.

Dense layers with ReLU hidden activations, an optional softmax head for
classification or a linear head for regression, inverted dropout, and Adam.
Gradients are derived by hand and checked against central finite
differences in the test suite, so keep forward and backward in sync.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DivergenceError, RangeError
from .model import make_rng


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


class MLP:
    """Fully connected net: sizes = [n_in, hidden..., n_out].

    task "classify" puts softmax + categorical cross-entropy on top;
    task "regress" uses the raw linear output with mean squared error.
    """

    def __init__(self, sizes: Sequence[int], seed: int, task: str = "classify"):
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise RangeError("layer sizes must be positive, got %r" % (list(sizes),))
        if task not in ("classify", "regress"):
            raise RangeError("task must be 'classify' or 'regress', got %r" % task)
        rng = make_rng(seed)
        self.sizes = tuple(int(s) for s in sizes)
        self.task = task
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            scale = np.sqrt(2.0 / fan_in)  # He init for ReLU stacks
            self.weights.append(rng.normal(0.0, scale, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def copy_parameters(self) -> list[np.ndarray]:
        return [p.copy() for p in self.parameters()]

    def set_parameters(self, params: Sequence[np.ndarray]) -> None:
        for target, source in zip(self.parameters(), params):
            target[...] = source

    def forward(
        self,
        x: np.ndarray,
        dropout: float = 0.0,
        rng: np.random.Generator | None = None,
    ):
        """Run the net; returns (output, cache) where cache holds per-layer
        activations and dropout masks for backprop."""
        if dropout and rng is None:
            raise RangeError("dropout requires an rng")
        activations = [np.asarray(x, dtype=np.float64)]
        masks: list[np.ndarray | None] = []
        a = activations[0]
        for layer in range(self.n_layers):
            z = a @ self.weights[layer] + self.biases[layer]
            if layer < self.n_layers - 1:
                a = np.maximum(z, 0.0)
                if dropout:
                    keep = 1.0 - dropout
                    mask = (rng.random(a.shape) < keep) / keep
                    a = a * mask
                    masks.append(mask)
                else:
                    masks.append(None)
            else:
                a = z
                masks.append(None)
            activations.append(a)
        return a, (activations, masks)

    def predict(self, x: np.ndarray) -> np.ndarray:
        out, _ = self.forward(x)
        if self.task == "classify":
            return softmax(out)
        return out

    def loss(self, x: np.ndarray, y: np.ndarray) -> float:
        out, _ = self.forward(x)
        return float(self._loss_from_output(out, y))

    def _loss_from_output(self, out: np.ndarray, y: np.ndarray) -> float:
        if self.task == "classify":
            p = softmax(out)
            eps = 1e-12
            return float(-np.mean(np.sum(y * np.log(p + eps), axis=1)))
        diff = out - y
        return float(np.mean(diff * diff))

    def loss_and_grads(
        self,
        x: np.ndarray,
        y: np.ndarray,
        dropout: float = 0.0,
        rng: np.random.Generator | None = None,
    ):
        """Mean loss over the batch plus gradients in parameters() order."""
        out, (activations, masks) = self.forward(x, dropout=dropout, rng=rng)
        batch = x.shape[0]
        if self.task == "classify":
            p = softmax(out)
            loss = float(-np.mean(np.sum(y * np.log(p + 1e-12), axis=1)))
            delta = (p - y) / batch
        else:
            diff = out - y
            loss = float(np.mean(diff * diff))
            delta = 2.0 * diff / diff.size
        grads_w: list[np.ndarray] = [None] * self.n_layers  # type: ignore[list-item]
        grads_b: list[np.ndarray] = [None] * self.n_layers  # type: ignore[list-item]
        for layer in range(self.n_layers - 1, -1, -1):
            a_prev = activations[layer]
            grads_w[layer] = a_prev.T @ delta
            grads_b[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = delta @ self.weights[layer].T
                if masks[layer - 1] is not None:
                    delta = delta * masks[layer - 1]
                delta = delta * (activations[layer] > 0.0)
        grads = []
        for gw, gb in zip(grads_w, grads_b):
            grads.extend([gw, gb])
        return loss, grads


def finite_difference_grads(net: MLP, x: np.ndarray, y: np.ndarray, eps: float = 1e-5):
    """Central-difference gradient of the (dropout-free) loss, same layout
    as net.loss_and_grads. Slow; for verification only."""
    grads = []
    for param in net.parameters():
        g = np.zeros_like(param)
        flat = param.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + eps
            hi = net.loss(x, y)
            flat[i] = original - eps
            lo = net.loss(x, y)
            flat[i] = original
            gflat[i] = (hi - lo) / (2.0 * eps)
        grads.append(g)
    return grads


class Adam:
    """Adam with bias-corrected first and second moments."""

    def __init__(
        self,
        params: Sequence[np.ndarray],
        learning_rate: float = 0.001,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        self.t += 1
        correction1 = 1.0 - self.beta1**self.t
        correction2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m[...] = self.beta1 * m + (1.0 - self.beta1) * g
            v[...] = self.beta2 * v + (1.0 - self.beta2) * (g * g)
            m_hat = m / correction1
            v_hat = v / correction2
            p -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass(frozen=True)
class FitConfig:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    batch_size: int = 64
    max_epochs: int = 100
    patience: int = 5
    dropout: float = 0.0

    def __post_init__(self):
        if self.max_epochs <= 0:
            raise RangeError("max_epochs must be positive; nothing to train otherwise")
        if self.batch_size <= 0:
            raise RangeError("batch_size must be positive")
        if not (0.0 <= self.dropout < 1.0):
            raise RangeError("dropout must be in [0, 1), got %g" % self.dropout)
        if self.patience < 0:
            raise RangeError("patience must be non-negative")


@dataclass
class FitResult:
    epochs_run: int
    train_loss: float
    val_loss: float
    history: list[tuple[float, float]]


def fit_network(
    net: MLP,
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_val: np.ndarray,
    y_val: np.ndarray,
    config: FitConfig,
    seed: int,
) -> FitResult:
    """Mini-batch Adam with early stopping on validation loss.

    Stops after `patience` epochs without improvement and restores the best
    weights seen. All shuffling and dropout masks derive from `seed`, so a
    fixed seed gives a bit-identical final model.
    """
    rng = make_rng(seed)
    adam = Adam(
        net.parameters(),
        learning_rate=config.learning_rate,
        beta1=config.beta1,
        beta2=config.beta2,
    )
    best_params = net.copy_parameters()
    best_val = np.inf
    stale = 0
    history: list[tuple[float, float]] = []
    epochs_run = 0
    train_loss = net.loss(x_train, y_train)
    for epoch in range(config.max_epochs):
        order = rng.permutation(x_train.shape[0])
        losses = []
        for start in range(0, x_train.shape[0], config.batch_size):
            batch = order[start : start + config.batch_size]
            loss, grads = net.loss_and_grads(
                x_train[batch], y_train[batch], dropout=config.dropout, rng=rng
            )
            if not np.isfinite(loss):
                raise DivergenceError("non-finite training loss at epoch %d" % epoch)
            adam.step(net.parameters(), grads)
            losses.append(loss)
        train_loss = float(np.mean(losses))
        val_loss = net.loss(x_val, y_val)
        if not np.isfinite(val_loss):
            raise DivergenceError("non-finite validation loss at epoch %d" % epoch)
        history.append((train_loss, val_loss))
        epochs_run = epoch + 1
        if val_loss < best_val:
            best_val = val_loss
            best_params = net.copy_parameters()
            stale = 0
        else:
            stale += 1
            if stale > config.patience:
                break
    net.set_parameters(best_params)
    final_val = net.loss(x_val, y_val)
    return FitResult(
        epochs_run=epochs_run,
        train_loss=train_loss,
        val_loss=final_val,
        history=history,
    )
