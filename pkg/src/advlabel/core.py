"""Shared data containers and the bilinear expected-error arithmetic.

Every probability vector in this package is a dense float64 array with
entries in ``[0, 1]``; labels use the ``{0, 1}`` convention throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

PROB_TOL = 1e-9


class ContractError(ValueError):
    """Raised when inputs violate an operation's preconditions."""


def as_probs(values, name: str = "probs") -> np.ndarray:
    """Validate a probability vector and clamp floating-point residue.

    Entries further than ``PROB_TOL`` outside ``[0, 1]`` are rejected.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ContractError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} contains non-finite entries")
    if arr.size and (arr.min() < -PROB_TOL or arr.max() > 1 + PROB_TOL):
        raise ContractError(
            f"{name} has entries outside [0, 1]: min={arr.min():.3g}, max={arr.max():.3g}"
        )
    return np.clip(arr, 0.0, 1.0)


def _pair(p, y):
    p = as_probs(p, "p")
    y = as_probs(y, "y")
    if p.shape != y.shape:
        raise ContractError(f"length mismatch: {p.size} vs {y.size}")
    if p.size == 0:
        raise ContractError("empty probability vectors")
    return p, y


def expected_error(p, y) -> float:
    """Probability that independent Bernoulli draws from ``p`` and ``y`` disagree.

    Computes ``(p @ (1 - y) + (1 - p) @ y) / n``.
    """
    p, y = _pair(p, y)
    return float(np.mean(p * (1.0 - y) + (1.0 - p) * y))


def constraint_value(q, y) -> float:
    """Expected error of weak signal ``q`` against labeling ``y``.

    Constraint ``i`` holds iff ``constraint_value(q_i, y) <= b_i``.
    """
    return expected_error(q, y)


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    true_labels: Optional[np.ndarray] = None
    ids: Optional[np.ndarray] = None
    feature_names: Optional[Sequence[str]] = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise ContractError(f"features must be 2-D, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ContractError("features contain non-finite entries")
        object.__setattr__(self, "features", X)
        if self.true_labels is not None:
            y = np.asarray(self.true_labels, dtype=np.float64)
            if y.shape != (X.shape[0],):
                raise ContractError(
                    f"true_labels has shape {y.shape}, expected ({X.shape[0]},)"
                )
            if not np.all((y == 0) | (y == 1)):
                raise ContractError("true_labels must be in {0, 1}")
            object.__setattr__(self, "true_labels", y)
        if self.ids is not None:
            ids = np.asarray(self.ids)
            if ids.shape != (X.shape[0],):
                raise ContractError("ids must have one entry per example")
            object.__setattr__(self, "ids", ids)
        if self.feature_names is not None:
            names = tuple(str(c) for c in self.feature_names)
            if len(names) != X.shape[1]:
                raise ContractError("feature_names must have one entry per column")
            object.__setattr__(self, "feature_names", names)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def subset(self, index) -> "Dataset":
        index = np.asarray(index)
        return Dataset(
            self.features[index],
            None if self.true_labels is None else self.true_labels[index],
            None if self.ids is None else self.ids[index],
            self.feature_names,
        )

    def without_labels(self) -> "Dataset":
        return Dataset(self.features, None, self.ids, self.feature_names)

    def feature_index(self, key) -> int:
        """Column index for an integer index or a feature name."""
        if isinstance(key, (int, np.integer)):
            if not -self.d <= key < self.d:
                raise ContractError(f"feature index {key} out of range for d={self.d}")
            return int(key) % self.d
        if self.feature_names is None or key not in self.feature_names:
            raise ContractError(f"unknown feature {key!r}")
        return self.feature_names.index(key)


@dataclass(frozen=True)
class WeakSignalSet:
    """``m`` soft labelings (rows of ``signals``) with their error bounds.

    An empty set (``m = 0``) is allowed and means an unconstrained adversary.
    """

    signals: np.ndarray
    bounds: np.ndarray
    names: Sequence[str] = field(default=())

    def __post_init__(self):
        Q = np.asarray(self.signals, dtype=np.float64)
        if Q.ndim == 1:
            Q = Q[None, :]
        if Q.ndim != 2:
            raise ContractError(f"signals must be an (m, n) array, got {Q.shape}")
        if Q.size and (Q.min() < -PROB_TOL or Q.max() > 1 + PROB_TOL or not np.all(np.isfinite(Q))):
            raise ContractError("signals must lie in [0, 1]")
        b = np.atleast_1d(np.asarray(self.bounds, dtype=np.float64))
        if b.shape != (Q.shape[0],):
            raise ContractError(f"{Q.shape[0]} signals but {b.size} bounds")
        if np.any(b < 0) or np.any(b > 1):
            raise ContractError("bounds must lie in [0, 1]")
        names = tuple(self.names) or tuple(f"ws{i + 1}" for i in range(Q.shape[0]))
        if len(names) != Q.shape[0]:
            raise ContractError(f"{Q.shape[0]} signals but {len(names)} names")
        object.__setattr__(self, "signals", np.clip(Q, 0.0, 1.0))
        object.__setattr__(self, "bounds", b)
        object.__setattr__(self, "names", names)

    @classmethod
    def empty(cls, n: int) -> "WeakSignalSet":
        return cls(np.zeros((0, n)), np.zeros(0), ())

    @property
    def m(self) -> int:
        return self.signals.shape[0]

    @property
    def n(self) -> int:
        return self.signals.shape[1]

    def take(self, k: int) -> "WeakSignalSet":
        """The first ``k`` signals (as used by the ALL-k / GE-k / AVG-k variants)."""
        return WeakSignalSet(self.signals[:k], self.bounds[:k], self.names[:k])

    def with_bounds(self, bounds) -> "WeakSignalSet":
        return WeakSignalSet(self.signals, np.broadcast_to(bounds, (self.m,)), self.names)

    def unnormalized_constraints(self, y: np.ndarray) -> np.ndarray:
        """``q_i @ (1 - y) + (1 - q_i) @ y - n * b_i`` for every ``i``."""
        Q = self.signals
        return Q.sum(axis=1) + (1.0 - 2.0 * Q) @ y - self.n * self.bounds


@dataclass(frozen=True)
class ModelState:
    params: np.ndarray
    multipliers: np.ndarray
    adversarial: np.ndarray


def constraint_values(ws: WeakSignalSet, y) -> np.ndarray:
    y = as_probs(y, "y")
    if y.size != ws.n:
        raise ContractError(f"labeling has length {y.size}, signals have length {ws.n}")
    Q = ws.signals
    return (Q @ (1.0 - y) + (1.0 - Q) @ y) / ws.n


def feasibility(ws: WeakSignalSet, y) -> np.ndarray:
    """Per-constraint slack ``b_i - constraint_value(q_i, y)``; all >= 0 iff feasible."""
    return ws.bounds - constraint_values(ws, y)


def accuracy(p, y) -> float:
    """Accuracy of 0.5-thresholded predictions against binary labels."""
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return float(np.mean((p >= 0.5) == (y == 1)))
