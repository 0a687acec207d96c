"""Simulated expert weak signals: one-feature logistic classifiers."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .core import ContractError, Dataset, WeakSignalSet, constraint_value
from .models import FitConfig, SigmoidLinearModel, fit_supervised


@dataclass(frozen=True)
class OneFeatureModel:
    """A logistic model that reads a single column of the feature matrix."""

    feature_index: int
    model: SigmoidLinearModel

    def predict(self, data) -> np.ndarray:
        X = data.features if isinstance(data, Dataset) else np.asarray(data, dtype=np.float64)
        return self.model.predict(X[:, [self.feature_index]])


def fit_weak_model(ws_split: Dataset, feature_index: int, config: FitConfig = FitConfig()) -> OneFeatureModel:
    if ws_split.true_labels is None:
        raise ContractError("weak-supervision split needs true labels")
    if not 0 <= feature_index < ws_split.d:
        raise ContractError(f"feature index {feature_index} out of range for d={ws_split.d}")
    column = ws_split.features[:, [feature_index]]
    if np.ptp(column) == 0:
        warnings.warn(
            f"feature {feature_index} is constant on the weak-supervision split; "
            "its signal carries only the class prior",
            stacklevel=2,
        )
    return OneFeatureModel(feature_index, fit_supervised(column, ws_split.true_labels, config))


def make_weak_signal(ws_split: Dataset, train_split: Dataset, feature_index: int,
                     config: FitConfig = FitConfig()) -> np.ndarray:
    """Soft labeling of ``train_split`` from a one-feature model fit on ``ws_split``."""
    return fit_weak_model(ws_split, feature_index, config).predict(train_split)


def true_error_bound(q, labels) -> float:
    """The signal's actual expected error against known labels."""
    if labels is None:
        raise ContractError("true labels are required to measure a bound")
    return constraint_value(q, labels)


def fixed_bounds(m: int, value: float) -> np.ndarray:
    if not 0 < value < 1:
        raise ContractError(f"fixed bound must lie in (0, 1), got {value}")
    return np.full(m, float(value))


def fashion_mnist_pixels(width: int = 28, height: int = 28):
    """Column indices of the quarter, center and three-quarter pixels on the
    vertical center line of a row-major image."""
    col = width // 2
    rows = (height // 4, height // 2, (3 * height) // 4)
    return [r * width + col for r in rows]


def default_feature_indices(d: int):
    """First, middle and last feature, for datasets without named features."""
    return [0, d // 2, d - 1]


def write_signals_csv(path, ws: WeakSignalSet, ids=None) -> None:
    """One row per example: ``id`` then one column per signal."""
    ids = np.arange(ws.n) if ids is None else np.asarray(ids)
    if ids.shape != (ws.n,):
        raise ContractError(f"{ids.size} ids for {ws.n} examples")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", *ws.names])
        for i, row in zip(ids, ws.signals.T):
            w.writerow([i, *(f"{v:.10g}" for v in row)])
