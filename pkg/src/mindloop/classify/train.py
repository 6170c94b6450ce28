"""Training loop, evaluation, and the shallow reference models."""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field

import numpy as np
import torch
from scipy.optimize import minimize

from ..features.tensor import FeatureTensor, pool_time
from .s4d import ClassifierError, S4dClassifier

log = logging.getLogger(__name__)


class TrainingError(ClassifierError):
    """Training diverged; ``last_good`` carries the last finite state dict."""

    def __init__(self, message, last_good=None):
        super().__init__(message)
        self.last_good = last_good


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 60
    patience: int = 10
    seed: int = 0
    betas: tuple = (0.9, 0.999)

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.max_epochs < 1:
            raise ClassifierError("rates and sizes must be positive")

    def to_dict(self) -> dict:
        return {"learning_rate": self.learning_rate, "batch_size": self.batch_size,
                "max_epochs": self.max_epochs, "patience": self.patience,
                "seed": self.seed, "betas": list(self.betas)}


@dataclass
class TrainingReport:
    """Per-epoch metrics; deliberately free of wall-clock fields so fixed
    seeds reproduce it byte-for-byte."""

    seed: int
    epochs: list = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = float("inf")
    stopped_early: bool = False

    def record(self, train_loss, train_acc, val_loss, val_acc):
        self.epochs.append({
            "epoch": len(self.epochs),
            "train_loss": float(train_loss),
            "train_accuracy": float(train_acc),
            "val_loss": float(val_loss),
            "val_accuracy": float(val_acc),
        })

    @property
    def epochs_run(self) -> int:
        return len(self.epochs)

    def to_dict(self) -> dict:
        return {"seed": self.seed, "epochs": self.epochs,
                "best_epoch": self.best_epoch,
                "best_val_loss": self.best_val_loss,
                "stopped_early": self.stopped_early}


def _as_torch(tensor: FeatureTensor):
    return (torch.from_numpy(np.ascontiguousarray(tensor.data)),
            torch.from_numpy(tensor.labels))


def train(model: S4dClassifier, train_set: FeatureTensor,
          val_set: FeatureTensor, config: TrainConfig = TrainConfig()):
    """Cross-entropy training with Adam and validation early stopping.

    Returns ``(model, TrainingReport)`` with the best-validation weights
    restored in place.
    """
    if train_set.n_windows == 0 or val_set.n_windows == 0:
        raise ClassifierError("train and validation sets must be non-empty")
    n_classes = model.config.n_classes
    if train_set.labels.max() >= n_classes or train_set.labels.min() < 0:
        raise ClassifierError("labels outside the model's class range")

    x_train, y_train = _as_torch(train_set)
    x_val, y_val = _as_torch(val_set)
    shuffler = torch.Generator().manual_seed(config.seed)
    dropper = torch.Generator().manual_seed(config.seed + 0x5EED)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate,
                                 betas=config.betas)
    loss_fn = torch.nn.CrossEntropyLoss()

    report = TrainingReport(seed=config.seed)
    best_state = copy.deepcopy(model.state_dict())
    last_good = best_state
    since_best = 0

    for epoch in range(config.max_epochs):
        model.train()
        order = torch.randperm(x_train.shape[0], generator=shuffler)
        epoch_loss, epoch_hits = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            rows = order[start:start + config.batch_size]
            logits = model(x_train[rows], dropout_generator=dropper)
            loss = loss_fn(logits, y_train[rows])
            if not torch.isfinite(loss):
                raise TrainingError(
                    f"loss diverged at epoch {epoch}", last_good=last_good)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_loss += float(loss.detach()) * len(rows)
            epoch_hits += int((logits.detach().argmax(dim=1) == y_train[rows]).sum())
        last_good = copy.deepcopy(model.state_dict())

        model.eval()
        with torch.no_grad():
            val_logits = model(x_val)
            val_loss = float(loss_fn(val_logits, y_val))
            val_acc = float((val_logits.argmax(dim=1) == y_val).double().mean())
        train_loss = epoch_loss / x_train.shape[0]
        train_acc = epoch_hits / x_train.shape[0]
        report.record(train_loss, train_acc, val_loss, val_acc)
        log.info("epoch %d: train loss %.4f acc %.3f | val loss %.4f acc %.3f",
                 epoch, train_loss, train_acc, val_loss, val_acc)

        if val_loss < report.best_val_loss - 1e-12:
            report.best_val_loss = val_loss
            report.best_epoch = epoch
            best_state = copy.deepcopy(model.state_dict())
            since_best = 0
        else:
            since_best += 1
            if since_best > config.patience:
                report.stopped_early = True
                break

    model.load_state_dict(best_state)
    model.eval()
    return model, report


def evaluate(model: S4dClassifier, test_set: FeatureTensor) -> dict:
    """Window-level confusion matrix (rows = true class), accuracy, recalls."""
    if test_set.n_windows == 0:
        raise ClassifierError("test set is empty")
    x, y = _as_torch(test_set)
    with torch.no_grad():
        predicted = model(x).argmax(dim=1).numpy()
    return confusion_summary(test_set.labels, predicted,
                             len(test_set.class_names))


def evaluate_trials(model: S4dClassifier, test_set: FeatureTensor) -> dict:
    """Per-trial metrics: majority vote over each parent epoch's windows."""
    x, _ = _as_torch(test_set)
    with torch.no_grad():
        predicted = model(x).argmax(dim=1).numpy()
    n_classes = len(test_set.class_names)
    trues, votes = [], []
    for parent in np.unique(test_set.parent_epoch):
        rows = test_set.parent_epoch == parent
        trues.append(test_set.labels[rows][0])
        votes.append(np.bincount(predicted[rows], minlength=n_classes).argmax())
    return confusion_summary(np.array(trues), np.array(votes), n_classes)


def confusion_summary(true_labels: np.ndarray, predicted: np.ndarray,
                      n_classes: int) -> dict:
    matrix = np.zeros((n_classes, n_classes), dtype=np.int64)
    for t, p in zip(true_labels, predicted):
        matrix[t, p] += 1
    row_totals = matrix.sum(axis=1)
    recalls = np.divide(np.diag(matrix), row_totals,
                        out=np.zeros(n_classes), where=row_totals > 0)
    return {
        "confusion_matrix": matrix,
        "accuracy": float(np.trace(matrix) / max(matrix.sum(), 1)),
        "per_class_recall": recalls,
        "n_samples": int(matrix.sum()),
    }


# --- shallow baselines -------------------------------------------------------

@dataclass
class KnnModel:
    train_x: np.ndarray
    train_y: np.ndarray
    k: int
    n_classes: int

    def predict(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        distances = np.linalg.norm(x[:, None, :] - self.train_x[None], axis=2)
        nearest = np.argsort(distances, axis=1, kind="stable")[:, :self.k]
        votes = self.train_y[nearest]
        return np.array([np.bincount(v, minlength=self.n_classes).argmax()
                         for v in votes])


@dataclass
class LinearModel:
    """Multinomial logistic regression with an L2 penalty (L-BFGS fit)."""

    weights: np.ndarray   # [d x n_classes]
    bias: np.ndarray      # [n_classes]

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        logits = np.atleast_2d(x) @ self.weights + self.bias
        logits -= logits.max(axis=1, keepdims=True)
        expd = np.exp(logits)
        return expd / expd.sum(axis=1, keepdims=True)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.predict_proba(x).argmax(axis=1)


def baseline_fit(kind: str, features: np.ndarray, labels: np.ndarray,
                 k: int = 5, l2: float = 1e-3, n_classes: int | None = None):
    """Fit a reference model on time-pooled feature vectors.

    kind 'knn': Euclidean k-nearest-neighbour voting.
    kind 'linear': softmax regression with L2 regularization.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if features.ndim != 2 or features.shape[0] != labels.shape[0]:
        raise ClassifierError("features must be [n x d] aligned with labels")
    n_classes = n_classes or int(labels.max()) + 1

    if kind == "knn":
        if k < 1 or k > features.shape[0]:
            raise ClassifierError(
                f"k={k} invalid for a training set of {features.shape[0]}")
        return KnnModel(train_x=features.copy(), train_y=labels.copy(), k=k,
                        n_classes=n_classes)
    if kind == "linear":
        n, d = features.shape
        onehot = np.eye(n_classes)[labels]

        def objective(flat):
            w = flat[:d * n_classes].reshape(d, n_classes)
            b = flat[d * n_classes:]
            logits = features @ w + b
            logits -= logits.max(axis=1, keepdims=True)
            log_z = np.log(np.exp(logits).sum(axis=1))
            nll = (log_z - logits[np.arange(n), labels]).mean()
            penalty = 0.5 * l2 * np.sum(w ** 2)
            probs = np.exp(logits - log_z[:, None])
            grad_logits = (probs - onehot) / n
            grad_w = features.T @ grad_logits + l2 * w
            grad_b = grad_logits.sum(axis=0)
            return nll + penalty, np.concatenate([grad_w.ravel(), grad_b])

        x0 = np.zeros(d * n_classes + n_classes)
        result = minimize(objective, x0, jac=True, method="L-BFGS-B",
                          options={"maxiter": 500})
        w = result.x[:d * n_classes].reshape(d, n_classes)
        return LinearModel(weights=w, bias=result.x[d * n_classes:])
    raise ClassifierError(f"unknown baseline kind {kind!r}")


def baseline_predict(model, features: np.ndarray) -> np.ndarray:
    return model.predict(np.asarray(features, dtype=np.float64))


def pooled_features(tensor: FeatureTensor) -> np.ndarray:
    return pool_time(tensor)
