"""Keystroke classifiers over raw click bytes: nearest centroid, multinomial logistic regression and an MLP.

Gradient-trained kinds use Adam on mini-batches and keep the checkpoint with the
best validation accuracy.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
from numpy.typing import NDArray

from ..utils.errors import EmptyClass
from ..utils.logger import setup_logger, should_log_progress
from .KeyboardModel import KEY_COUNT

logger = setup_logger(__name__)

CLASSIFIER_KINDS = ("nearest-centroid", "logistic", "mlp")

Params = dict[str, NDArray[np.float64]]


@dataclass(frozen=True)
class TrainingConfig:
    learning_rate: float = 1e-4
    epochs: int = 500
    batch_size: int = 32
    seed: int = 0
    hidden: tuple[int, ...] = (128, 64)


@dataclass
class TrainingHistory:
    train_loss: list[float] = field(default_factory=lambda: [])
    val_accuracy: list[float] = field(default_factory=lambda: [])
    best_epoch: int = 0


def softmax(logits: NDArray[np.float64]) -> NDArray[np.float64]:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


class KeystrokeClassifier:
    def __init__(
        self,
        kind: str,
        n_features: int,
        n_classes: int = KEY_COUNT,
        config: TrainingConfig = TrainingConfig(),
    ) -> None:
        if kind not in CLASSIFIER_KINDS:
            raise ValueError(f"Unknown classifier kind {kind!r}; expected one of {CLASSIFIER_KINDS}")
        self.kind = kind
        self.n_features = n_features
        self.n_classes = n_classes
        self.config = config
        self.params: Params = self._init_params()
        self.history = TrainingHistory()

    def _layer_sizes(self) -> list[int]:
        hidden = list(self.config.hidden) if self.kind == "mlp" else []
        return [self.n_features, *hidden, self.n_classes]

    def _init_params(self) -> Params:
        if self.kind == "nearest-centroid":
            return {
                "centroids": np.zeros((self.n_classes, self.n_features)),
                "present": np.zeros(self.n_classes),
            }
        rng = np.random.default_rng(self.config.seed)
        sizes = self._layer_sizes()
        params: Params = {}
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            # He initialisation for ReLU layers
            params[f"W{i}"] = rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_in, n_out))
            params[f"b{i}"] = np.zeros(n_out)
        return params

    @property
    def n_layers(self) -> int:
        return len(self._layer_sizes()) - 1

    def _forward(self, X: NDArray[np.float64], params: Params) -> tuple[NDArray[np.float64], list[NDArray[np.float64]]]:
        activations = [X]
        h = X
        for i in range(self.n_layers):
            z = h @ params[f"W{i}"] + params[f"b{i}"]
            h = np.maximum(z, 0.0) if i < self.n_layers - 1 else z
            activations.append(h)
        return h, activations

    def loss_and_grads(
        self, X: NDArray[np.float64], y: NDArray[np.int64], params: Optional[Params] = None
    ) -> tuple[float, Params]:
        """Mean cross-entropy and its gradient with respect to every weight and bias."""
        p = self.params if params is None else params
        logits, activations = self._forward(X, p)
        probs = softmax(logits)
        n = len(y)
        loss = float(-np.mean(np.log(probs[np.arange(n), y] + 1e-300)))

        grads: Params = {}
        delta = probs
        delta[np.arange(n), y] -= 1.0
        delta /= n
        for i in reversed(range(self.n_layers)):
            grads[f"W{i}"] = activations[i].T @ delta
            grads[f"b{i}"] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ p[f"W{i}"].T) * (activations[i] > 0.0)
        return loss, grads

    def gradient_check(
        self,
        X: NDArray[np.float64],
        y: NDArray[np.int64],
        n_checks: int = 10,
        step: float = 1e-5,
        seed: int = 0,
    ) -> float:
        """Largest relative gap between analytic and central-difference gradients over random parameters."""
        if self.kind == "nearest-centroid":
            raise ValueError("Nearest-centroid has no gradient")
        rng = np.random.default_rng(seed)
        _, grads = self.loss_and_grads(X, y)
        names = sorted(self.params)
        worst = 0.0
        for _ in range(n_checks):
            name = names[int(rng.integers(len(names)))]
            param = self.params[name]
            index = tuple(int(rng.integers(n)) for n in param.shape)
            original = float(param[index])
            param[index] = original + step
            plus, _ = self.loss_and_grads(X, y)
            param[index] = original - step
            minus, _ = self.loss_and_grads(X, y)
            param[index] = original
            numeric = (plus - minus) / (2.0 * step)
            analytic = float(grads[name][index])
            denom = max(abs(numeric) + abs(analytic), 1e-8)
            worst = max(worst, abs(numeric - analytic) / denom)
        return worst

    def predict_proba(self, X: NDArray[np.float64]) -> NDArray[np.float64]:
        if self.kind == "nearest-centroid":
            centroids = self.params["centroids"]
            d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
            d2[:, self.params["present"] == 0.0] = np.inf
            return softmax(-d2)
        logits, _ = self._forward(X, self.params)
        return softmax(logits)

    def predict_topk(self, X: NDArray[np.float64], k: int) -> NDArray[np.int64]:
        """Labels by descending probability; ties go to the lower label index."""
        probs = self.predict_proba(X)
        order = np.argsort(-probs, axis=1, kind="stable")
        return order[:, :k]

    def accuracy(self, X: NDArray[np.float64], y: NDArray[np.int64], k: int = 1) -> float:
        if len(y) == 0:
            return 0.0
        top = self.predict_topk(X, k)
        return float(np.mean((top == y[:, None]).any(axis=1)))

    def fit(
        self,
        X: NDArray[np.float64],
        y: NDArray[np.int64],
        X_val: Optional[NDArray[np.float64]] = None,
        y_val: Optional[NDArray[np.int64]] = None,
    ) -> TrainingHistory:
        if len(y) == 0:
            raise ValueError("Training split is empty")
        missing = sorted(set(range(self.n_classes)) - set(np.unique(y).tolist()))
        if missing:
            message = f"{len(missing)} classes have no training samples: {missing}"
            warnings.warn(message, EmptyClass, stacklevel=2)
            logger.warning("%s", message)

        if self.kind == "nearest-centroid":
            self._fit_centroids(X, y)
        else:
            self._fit_adam(X, y, X_val, y_val)
        return self.history

    def _fit_centroids(self, X: NDArray[np.float64], y: NDArray[np.int64]) -> None:
        centroids = np.zeros((self.n_classes, self.n_features))
        present = np.zeros(self.n_classes)
        for c in np.unique(y):
            centroids[c] = X[y == c].mean(axis=0)
            present[c] = 1.0
        self.params = {"centroids": centroids, "present": present}
        self.history = TrainingHistory(train_loss=[], val_accuracy=[], best_epoch=0)
        logger.info("Nearest-centroid fit on %s samples (%s classes present)", len(y), int(present.sum()))

    def _fit_adam(
        self,
        X: NDArray[np.float64],
        y: NDArray[np.int64],
        X_val: Optional[NDArray[np.float64]],
        y_val: Optional[NDArray[np.int64]],
    ) -> None:
        cfg = self.config
        rng = np.random.default_rng(cfg.seed)
        beta1, beta2, eps = 0.9, 0.999, 1e-8
        m = {k: np.zeros_like(v) for k, v in self.params.items()}
        v = {k: np.zeros_like(v) for k, v in self.params.items()}
        step = 0
        has_val = X_val is not None and y_val is not None and len(y_val) > 0
        best_acc = -1.0
        best_params = {k: p.copy() for k, p in self.params.items()}
        history = TrainingHistory()

        for epoch in range(1, cfg.epochs + 1):
            order = rng.permutation(len(y))
            for start in range(0, len(y), cfg.batch_size):
                batch = order[start : start + cfg.batch_size]
                _, grads = self.loss_and_grads(X[batch], y[batch])
                step += 1
                for name, g in grads.items():
                    m[name] = beta1 * m[name] + (1.0 - beta1) * g
                    v[name] = beta2 * v[name] + (1.0 - beta2) * g * g
                    m_hat = m[name] / (1.0 - beta1**step)
                    v_hat = v[name] / (1.0 - beta2**step)
                    self.params[name] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + eps)

            loss, _ = self.loss_and_grads(X, y)
            history.train_loss.append(loss)
            acc = self.accuracy(X_val, y_val) if has_val else self.accuracy(X, y)  # type: ignore[arg-type]
            history.val_accuracy.append(acc)
            if acc > best_acc:
                best_acc = acc
                best_params = {k: p.copy() for k, p in self.params.items()}
                history.best_epoch = epoch
            if should_log_progress(epoch, cfg.epochs, interval=max(1, cfg.epochs // 10)):
                logger.info("%s epoch %s/%s: loss %.4f, val acc %.4f", self.kind, epoch, cfg.epochs, loss, acc)

        self.params = best_params
        self.history = history
        logger.info("%s: best validation accuracy %.4f at epoch %s", self.kind, best_acc, history.best_epoch)

    def metadata(self, extra: Optional[dict[str, Any]] = None) -> dict[str, Any]:
        config = asdict(self.config)
        config["hidden"] = list(self.config.hidden)
        return {
            "kind": self.kind,
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "config": config,
            "best_epoch": self.history.best_epoch,
            "train_loss": self.history.train_loss,
            "val_accuracy": self.history.val_accuracy,
            **(extra or {}),
        }

    def save(self, path: str | Path, extra: Optional[dict[str, Any]] = None) -> None:
        """Parameter arrays plus a JSON metadata string in one compressed archive."""
        meta = json.dumps(self.metadata(extra), sort_keys=True)
        np.savez_compressed(path, metadata=np.array(meta), **self.params)
        logger.info("Saved %s checkpoint to %s", self.kind, path)

    @classmethod
    def load(cls, path: str | Path) -> tuple[KeystrokeClassifier, dict[str, Any]]:
        with np.load(path) as data:
            meta = json.loads(str(data["metadata"]))
            config = dict(meta["config"])
            config["hidden"] = tuple(config["hidden"])
            model = cls(meta["kind"], int(meta["n_features"]), int(meta["n_classes"]), TrainingConfig(**config))
            model.params = {name: data[name] for name in data.files if name != "metadata"}
        model.history = TrainingHistory(list(meta["train_loss"]), list(meta["val_accuracy"]), int(meta["best_epoch"]))
        return model, meta
