"""Probabilistic binary classifiers with analytic Jacobians.

Two parameterizations are provided:

* :class:`SigmoidLinearModel` -- ``sigmoid(w @ z + bias)`` on standardized
  features ``z``; the workhorse for every experiment.
* :class:`DirectModel` -- one free logit per example, used to optimize
  directly over learned probabilities on toy problems.

Both are immutable; :meth:`with_params` returns a new model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.special import expit

from .core import ContractError, Dataset, as_probs


class TrainingError(RuntimeError):
    """Optimization produced a non-finite loss or gradient."""


def _features(data) -> np.ndarray:
    if isinstance(data, Dataset):
        return data.features
    X = np.asarray(data, dtype=np.float64)
    return X[:, None] if X.ndim == 1 else X


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = _features(X)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        return cls(X.mean(axis=0), scale)

    @classmethod
    def identity(cls, d: int) -> "Standardizer":
        return cls(np.zeros(d), np.ones(d))

    def transform(self, X) -> np.ndarray:
        return (_features(X) - self.mean) / self.scale


@dataclass(frozen=True)
class SigmoidLinearModel:
    """Logistic model; ``weights[-1]`` is the bias."""

    weights: np.ndarray
    scaler: Standardizer

    @classmethod
    def zeros(cls, data, standardize: bool = True) -> "SigmoidLinearModel":
        X = _features(data)
        scaler = Standardizer.fit(X) if standardize else Standardizer.identity(X.shape[1])
        return cls(np.zeros(X.shape[1] + 1), scaler)

    @property
    def params(self) -> np.ndarray:
        return self.weights

    @property
    def d(self) -> int:
        return self.weights.size - 1

    def with_params(self, params) -> "SigmoidLinearModel":
        return replace(self, weights=np.asarray(params, dtype=np.float64))

    def design(self, data) -> np.ndarray:
        X = _features(data)
        if X.shape[1] != self.d:
            raise ContractError(f"model expects {self.d} features, data has {X.shape[1]}")
        Z = self.scaler.transform(X)
        return np.hstack([Z, np.ones((Z.shape[0], 1))])

    def predict(self, data) -> np.ndarray:
        return expit(self.design(data) @ self.weights)

    def jvp(self, data, v) -> np.ndarray:
        A = self.design(data)
        p = expit(A @ self.weights)
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (A.shape[0],):
            raise ContractError(f"v has shape {v.shape}, expected ({A.shape[0]},)")
        return A.T @ (p * (1.0 - p) * v)

    def to_dict(self) -> dict:
        return {
            "kind": "sigmoid_linear",
            "weights": self.weights.tolist(),
            "feature_mean": self.scaler.mean.tolist(),
            "feature_scale": self.scaler.scale.tolist(),
        }

    @classmethod
    def from_dict(cls, record: dict) -> "SigmoidLinearModel":
        if record.get("kind") != "sigmoid_linear":
            raise ValueError(f"not a sigmoid_linear record: {record.get('kind')!r}")
        scaler = Standardizer(
            np.asarray(record["feature_mean"], dtype=np.float64),
            np.asarray(record["feature_scale"], dtype=np.float64),
        )
        return cls(np.asarray(record["weights"], dtype=np.float64), scaler)


@dataclass(frozen=True)
class DirectModel:
    """One logit per example; the data only fixes ``n``."""

    logits: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "DirectModel":
        return cls(np.zeros(n))

    @property
    def params(self) -> np.ndarray:
        return self.logits

    def with_params(self, params) -> "DirectModel":
        return DirectModel(np.asarray(params, dtype=np.float64))

    def _check(self, data) -> None:
        n = data.n if isinstance(data, Dataset) else len(data)
        if n != self.logits.size:
            raise ContractError(f"model has {self.logits.size} logits, data has {n} rows")

    def predict(self, data) -> np.ndarray:
        self._check(data)
        return expit(self.logits)

    def jvp(self, data, v) -> np.ndarray:
        self._check(data)
        p = expit(self.logits)
        return p * (1.0 - p) * np.asarray(v, dtype=np.float64)


def predict(model, data) -> np.ndarray:
    """Positive-class probabilities ``p(theta)`` for every example."""
    return model.predict(data)


def jacobian_vector_product(model, data, v) -> np.ndarray:
    """``(dp/dtheta).T @ v`` without materializing the Jacobian."""
    return model.jvp(data, v)


@dataclass(frozen=True)
class FitConfig:
    step: float = 0.1
    l2: float = 1e-4
    max_iter: int = 5000
    tol: float = 1e-6
    standardize: bool = True


def cross_entropy(model: SigmoidLinearModel, data, targets, l2: float) -> float:
    p = np.clip(model.predict(data), 1e-15, 1 - 1e-15)
    t = np.asarray(targets, dtype=np.float64)
    w = model.weights[:-1]
    return float(-np.mean(t * np.log(p) + (1 - t) * np.log(1 - p)) + 0.5 * l2 * w @ w)


def fit_supervised(data, labels, config: FitConfig = FitConfig()) -> SigmoidLinearModel:
    """L2-regularized logistic regression by full-batch gradient descent.

    ``labels`` may be soft; the loss is cross-entropy against them.  The
    bias is not penalized.  Stops once the gradient's max-norm drops below
    ``config.tol`` or after ``config.max_iter`` steps.
    """
    targets = as_probs(labels, "labels")
    model = SigmoidLinearModel.zeros(data, standardize=config.standardize)
    A = model.design(data)
    if targets.size != A.shape[0]:
        raise ContractError(f"{targets.size} labels for {A.shape[0]} examples")
    n = A.shape[0]
    w = model.weights.copy()
    penalty = np.full(w.size, config.l2)
    penalty[-1] = 0.0
    for _ in range(config.max_iter):
        p = expit(A @ w)
        grad = A.T @ (p - targets) / n + penalty * w
        if not np.all(np.isfinite(grad)):
            raise TrainingError("non-finite gradient in fit_supervised")
        if np.max(np.abs(grad)) < config.tol:
            break
        w -= config.step * grad
    model = model.with_params(w)
    loss = cross_entropy(model, data, targets, config.l2)
    if not np.isfinite(loss):
        raise TrainingError("non-finite loss in fit_supervised")
    return model


def save_model(model: SigmoidLinearModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=2) + "\n")


def load_model(path) -> SigmoidLinearModel:
    return SigmoidLinearModel.from_dict(json.loads(Path(path).read_text()))
