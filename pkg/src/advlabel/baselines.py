"""Comparison methods: averaged pseudo-labels and a modified GE criterion."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .core import ContractError, Dataset, WeakSignalSet, as_probs
from .models import FitConfig, SigmoidLinearModel, TrainingError, fit_supervised

KL_EPS = 1e-6


def avg_pseudolabels(ws: WeakSignalSet) -> np.ndarray:
    """Rounded mean of the weak signals; a mean of exactly 0.5 rounds up."""
    if ws.m < 1:
        raise ContractError("need at least one weak signal")
    return (ws.signals.mean(axis=0) >= 0.5).astype(np.float64)


def train_avg(data, ws: WeakSignalSet, config: FitConfig = FitConfig()) -> SigmoidLinearModel:
    return fit_supervised(data, avg_pseudolabels(ws), config)


@dataclass(frozen=True)
class ConditionalReference:
    """Label rate among examples where a signal says positive / negative."""

    rate_high: float  # P(y = 1 | q >= 0.5)
    rate_low: float  # P(y = 1 | q < 0.5)
    count_high: int
    count_low: int


def conditional_reference(q, labels) -> ConditionalReference:
    q = as_probs(q, "q")
    y = np.asarray(labels, dtype=np.float64)
    if y.shape != q.shape:
        raise ContractError("signal and labels differ in length")
    high = q >= 0.5
    c_high = int(high.sum())
    c_low = q.size - c_high
    return ConditionalReference(
        float(y[high].mean()) if c_high else float("nan"),
        float(y[~high].mean()) if c_low else float("nan"),
        c_high,
        c_low,
    )


def model_conditional(p, q, branch: str) -> float:
    """Mean prediction over the examples in one branch of signal ``q``."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if branch not in ("high", "low"):
        raise ContractError(f"branch must be 'high' or 'low', got {branch!r}")
    mask = q >= 0.5 if branch == "high" else q < 0.5
    if not mask.any():
        raise ContractError("empty branch")
    return float(p[mask].mean())


def bernoulli_kl(a: float, b: float, eps: float = KL_EPS) -> float:
    a = min(max(a, eps), 1 - eps)
    b = min(max(b, eps), 1 - eps)
    return a * np.log(a / b) + (1 - a) * np.log((1 - a) / (1 - b))


def _branches(ws: WeakSignalSet, refs):
    if len(refs) != ws.m:
        raise ContractError(f"{len(refs)} references for {ws.m} signals")
    out = []
    for q, ref in zip(ws.signals, refs):
        high = q >= 0.5
        for mask, rate in ((high, ref.rate_high), (~high, ref.rate_low)):
            # Branches empty on either side contribute nothing.
            if mask.any() and np.isfinite(rate):
                out.append((mask, rate))
    return out


def ge_objective(p, ws: WeakSignalSet, refs, weights=None, l2: float = 0.0) -> float:
    """Sum over signals and branches of KL(reference || model conditional),
    plus ``l2/2 * |w|^2`` over the non-bias weights when given."""
    p = np.asarray(p, dtype=np.float64)
    total = sum(bernoulli_kl(rate, p[mask].mean()) for mask, rate in _branches(ws, refs))
    if weights is not None:
        w = np.asarray(weights)[:-1]
        total += 0.5 * l2 * w @ w
    return float(total)


def ge_gradient(model: SigmoidLinearModel, data, ws: WeakSignalSet, refs, l2: float) -> np.ndarray:
    return _ge_gradient(model.design(data), model.weights, _branches(ws, refs), l2)


def _ge_gradient(A, weights, branches, l2):
    p = expit(A @ weights)
    s = p * (1 - p)
    grad = np.zeros_like(weights)
    for mask, rate in branches:
        mean = p[mask].mean()
        if mean <= KL_EPS or mean >= 1 - KL_EPS:
            continue  # clamped region: flat
        a = min(max(rate, KL_EPS), 1 - KL_EPS)
        d_kl = -a / mean + (1 - a) / (1 - mean)
        grad += d_kl * (A[mask].T @ s[mask]) / mask.sum()
    grad[:-1] += l2 * weights[:-1]
    return grad


def train_ge(data, ws: WeakSignalSet, refs, config: FitConfig = FitConfig()) -> SigmoidLinearModel:
    """Minimize the modified GE objective by full-batch gradient descent."""
    model = SigmoidLinearModel.zeros(data, standardize=config.standardize)
    n = data.n if isinstance(data, Dataset) else len(data)
    if ws.n != n:
        raise ContractError("signals and data differ in length")
    A = model.design(data)
    branches = _branches(ws, refs)
    w = model.weights.copy()
    for _ in range(config.max_iter):
        grad = _ge_gradient(A, w, branches, config.l2)
        if not np.all(np.isfinite(grad)):
            raise TrainingError("non-finite GE gradient")
        if np.max(np.abs(grad)) < config.tol:
            break
        w -= config.step * grad
    model = model.with_params(w)
    value = ge_objective(model.predict(data), ws, refs, model.weights, config.l2)
    if not np.isfinite(value):
        raise TrainingError("non-finite GE objective")
    return model
