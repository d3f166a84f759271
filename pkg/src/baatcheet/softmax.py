"""Multinomial logistic regression trained by full-batch gradient descent.

Shared numeric core for the intent classifier and the next-action ranker.
Loss is mean cross-entropy plus (l2/2)*||W||^2; the bias is not regularized.
Training is deterministic given the seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TrainingError


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, shift-stabilized."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def loss_and_grad(
    weights: np.ndarray,
    bias: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Cross-entropy + L2 loss with analytic gradients.

    weights: (L, D), bias: (L,), x: (N, D), y: (N,) int class indices.
    """
    n = x.shape[0]
    probs = softmax(x @ weights.T + bias)
    ce = -np.log(probs[np.arange(n), y])
    loss = float(ce.mean() + 0.5 * l2 * np.sum(weights * weights))
    g = probs
    g[np.arange(n), y] -= 1.0
    g /= n
    grad_w = g.T @ x + l2 * weights
    grad_b = g.sum(axis=0)
    return loss, grad_w, grad_b


@dataclass(frozen=True)
class FitResult:
    weights: np.ndarray
    bias: np.ndarray
    final_loss: float


def fit(
    x: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    learning_rate: float,
    epochs: int,
    l2: float,
    seed: int,
) -> FitResult:
    """Run full-batch gradient descent from a small seeded random init."""
    if epochs < 1:
        raise TrainingError("epochs must be >= 1")
    rng = np.random.default_rng(seed)
    weights = rng.normal(0.0, 0.01, size=(n_classes, x.shape[1]))
    bias = np.zeros(n_classes)
    for epoch in range(epochs):
        loss, grad_w, grad_b = loss_and_grad(weights, bias, x, y, l2)
        if not np.isfinite(loss):
            raise TrainingError(f"non-finite loss at epoch {epoch}")
        weights -= learning_rate * grad_w
        bias -= learning_rate * grad_b
    final_loss, _, _ = loss_and_grad(weights, bias, x, y, l2)
    return FitResult(weights, bias, final_loss)
