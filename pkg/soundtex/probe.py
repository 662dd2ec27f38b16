"""Linear probe: a softmax classifier trained on self-supervised labels.

Training is full-batch gradient descent from zero weights with a
backtracking line search, so a fit is fully determined by its inputs.
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple
import logging

import numpy as np
from scipy.special import log_softmax
from scipy.special import softmax as _softmax

from .exceptions import InvalidConfigError, InvalidInputError

logger = logging.getLogger(__name__)

ARMIJO_C = 1e-4
MAX_HALVINGS = 40


@dataclass(frozen=True, eq=False)
class LinearModel:
    weights: np.ndarray
    bias: np.ndarray
    classes: int
    feature_dim: int
    training_log: List[float] = field(default_factory=list)
    feature_mean: Optional[np.ndarray] = None
    feature_scale: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.weights.shape != (self.classes, self.feature_dim):
            raise InvalidInputError(
                f"weights must be {self.classes} x {self.feature_dim}, got {self.weights.shape}"
            )
        if self.bias.shape != (self.classes,):
            raise InvalidInputError("bias must have one entry per class")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise InvalidInputError("model parameters must be finite")

    def standardize(self, X: np.ndarray) -> np.ndarray:
        if self.feature_mean is None:
            return X
        return (X - self.feature_mean) / self.feature_scale

    def logits(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.feature_dim:
            raise InvalidInputError(f"expected an n x {self.feature_dim} matrix, got {X.shape}")
        return self.standardize(X) @ self.weights.T + self.bias


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a logit matrix."""
    return _softmax(logits, axis=-1)


def softmax_cross_entropy(
    W: np.ndarray, b: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float = 0.0
) -> Tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy plus (l2/2)·‖W‖² and its gradients with respect to W and b."""
    n = X.shape[0]
    logits = X @ W.T + b
    log_p = log_softmax(logits, axis=1)
    loss = -log_p[np.arange(n), y].mean() + 0.5 * l2 * float(np.sum(W * W))

    delta = np.exp(log_p)
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grad_W = delta.T @ X + l2 * W
    grad_b = delta.sum(axis=0)
    return float(loss), grad_W, grad_b


def _check_labels(y: np.ndarray, n_classes: int) -> np.ndarray:
    y = np.asarray(y)
    if y.size and (not np.issubdtype(y.dtype, np.integer)):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise InvalidInputError("labels must be integers")
        y = y.astype(np.int64)
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise InvalidInputError(f"labels must lie in [0, {n_classes}), got range [{y.min()}, {y.max()}]")
    return y.astype(np.int64)


def train(
    X: np.ndarray,
    y: np.ndarray,
    epochs: int = 200,
    lr: float = 1.0,
    l2: float = 1e-4,
    n_classes: Optional[int] = None,
    standardize: bool = True,
) -> LinearModel:
    """Fit a multinomial logistic regression by full-batch gradient descent with backtracking."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise InvalidInputError("X must be a non-empty n x d matrix")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError("X contains non-finite values")
    if len(y) != X.shape[0]:
        raise InvalidInputError(f"{len(y)} labels for {X.shape[0]} rows")
    if epochs < 0 or lr <= 0 or l2 < 0:
        raise InvalidConfigError("need epochs >= 0, lr > 0 and l2 >= 0")

    if n_classes is None:
        n_classes = int(np.max(y)) + 1 if len(y) else 1
    y = _check_labels(y, n_classes)
    n, d = X.shape

    mean = scale = None
    if standardize:
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        X = (X - mean) / scale

    W = np.zeros((n_classes, d))
    b = np.zeros(n_classes)
    loss, grad_W, grad_b = softmax_cross_entropy(W, b, X, y, l2)
    history = [loss]

    for epoch in range(epochs):
        grad_sq = float(np.sum(grad_W * grad_W) + np.sum(grad_b * grad_b))
        if grad_sq == 0.0:
            break
        step = lr
        for _ in range(MAX_HALVINGS + 1):
            W_try = W - step * grad_W
            b_try = b - step * grad_b
            loss_try, gW_try, gb_try = softmax_cross_entropy(W_try, b_try, X, y, l2)
            if loss_try <= loss - ARMIJO_C * step * grad_sq:
                W, b, loss, grad_W, grad_b = W_try, b_try, loss_try, gW_try, gb_try
                break
            step *= 0.5
        else:
            logger.debug(f"Line search found no decrease at epoch {epoch}")
        history.append(loss)

    logger.info(f"Probe trained on {n} x {d}, {n_classes} classes: loss {history[0]:.4f} -> {history[-1]:.4f}")
    return LinearModel(
        weights=W,
        bias=b,
        classes=n_classes,
        feature_dim=d,
        training_log=history,
        feature_mean=mean,
        feature_scale=scale,
    )


def predict(model: LinearModel, X: np.ndarray) -> np.ndarray:
    """Class with the largest logit; ties go to the lowest class index."""
    # argmax returns the lowest index on ties
    return np.argmax(model.logits(X), axis=1)


def evaluate_predictions(predictions: np.ndarray, y: np.ndarray, n_classes: int) -> Dict:
    predictions = np.asarray(predictions)
    y = _check_labels(y, n_classes)
    if predictions.shape != y.shape:
        raise InvalidInputError("predictions and labels must be aligned")
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (y, predictions), 1)

    support = confusion.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(support > 0, np.diag(confusion) / support, np.nan)
    accuracy = float(np.mean(predictions == y)) if y.size else float("nan")
    return {
        "accuracy": accuracy,
        "per_class": per_class,
        "confusion": confusion,
    }


def evaluate(model: LinearModel, X: np.ndarray, y: np.ndarray) -> Dict:
    """Top-1 accuracy, per-class accuracy (NaN for absent classes) and confusion counts."""
    y = np.asarray(y)
    if np.asarray(X).shape[0] != y.shape[0]:
        raise InvalidInputError("X and y must have the same number of rows")
    return evaluate_predictions(predict(model, X), y, model.classes)


def baselines(y: np.ndarray) -> Tuple[float, float]:
    """(chance over distinct observed classes, frequency of the modal class)."""
    y = np.asarray(y)
    if y.size == 0:
        raise InvalidInputError("baselines need at least one label")
    _, counts = np.unique(y, return_counts=True)
    return 1.0 / counts.size, float(counts.max() / y.size)


def format_report(
    n_examples: int, n_classes: int, accuracy: float, chance: float, majority: float,
    train_accuracy: Optional[float] = None,
) -> List[str]:
    """Report lines printed by the probe command."""
    lines = [
        f"examples: {n_examples}",
        f"classes: {n_classes}",
    ]
    if train_accuracy is not None:
        lines.append(f"train accuracy: {100 * train_accuracy:.1f}%")
    lines += [
        f"accuracy: {100 * accuracy:.1f}%",
        f"chance: {100 * chance:.1f}%",
        f"majority: {100 * majority:.1f}%",
    ]
    return lines
