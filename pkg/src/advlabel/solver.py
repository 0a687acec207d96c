"""Projected primal-dual training of a classifier against adversarial labels.

Each iteration updates, in order, the model parameters (gradient descent on
the expected error against the current adversarial labels), the learned
probabilities, the adversarial labels (projected ascent on the augmented
Lagrangian), and the constraint multipliers.

Constraint terms are kept in unnormalized form::

    h_i(y) = q_i @ (1 - y) + (1 - q_i) @ y - n * b_i

so ``h_i <= 0`` is the weak-signal bound and ``rho`` multiplies quantities of
order ``n``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import ContractError, Dataset, ModelState, WeakSignalSet, as_probs, expected_error
from .models import TrainingError


@dataclass(frozen=True)
class SolverConfig:
    step: float = 0.01
    schedule: str = "constant"  # or "inv_sqrt": step / sqrt(t)
    rho: float = 0.1
    max_iters: int = 10_000
    tol: float = 1e-6
    init_params: str = "zeros"  # or "random"
    seed: int = 0
    # Infeasibility detection.
    gamma_limit: float = 1e6
    stall_window: int = 1000
    violation_tol: float = 1e-3
    # Report the mean of the iterates over the trailing fraction of the run
    # instead of the last iterate; damps primal-dual cycling.  None disables.
    average_tail: float | None = None

    def __post_init__(self):
        if self.rho <= 0 or self.step <= 0:
            raise ContractError("rho and step must be positive")
        if self.schedule not in ("constant", "inv_sqrt"):
            raise ContractError(f"unknown step schedule {self.schedule!r}")
        if self.max_iters < 1:
            raise ContractError("max_iters must be positive")
        if self.average_tail is not None and not 0 < self.average_tail <= 1:
            raise ContractError("average_tail must lie in (0, 1]")

    def step_size(self, t: int) -> float:
        """Step for 1-based iteration ``t``."""
        if self.schedule == "inv_sqrt":
            return self.step / math.sqrt(t)
        return self.step


@dataclass
class TrainTrace:
    lagrangian: list = field(default_factory=list)
    error: list = field(default_factory=list)
    max_violation: list = field(default_factory=list)
    gamma_norm: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.lagrangian)

    def append(self, lagrangian, error, violation, gamma_norm) -> None:
        self.lagrangian.append(float(lagrangian))
        self.error.append(float(error))
        self.max_violation.append(float(violation))
        self.gamma_norm.append(float(gamma_norm))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "lagrangian", "expected_error", "max_violation", "gamma_inf"])
            for i, row in enumerate(
                zip(self.lagrangian, self.error, self.max_violation, self.gamma_norm), 1
            ):
                w.writerow([i, *(f"{v:.10g}" for v in row)])


@dataclass(frozen=True)
class TrainResult:
    model: object
    state: ModelState
    trace: TrainTrace
    status: str  # "converged", "max_iters" or "infeasible"
    iterations: int
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    @property
    def infeasible(self) -> bool:
        return self.status == "infeasible"


def _hinge(x):
    return np.maximum(x, 0.0)


def lagrangian(state: ModelState, p, ws: WeakSignalSet, rho: float) -> float:
    """Augmented Lagrangian value at ``(p, y, gamma)``.

    ``err(p, y) - sum_i gamma_i h_i(y) - rho/2 * sum_i [h_i(y)]_+^2``
    """
    y = as_probs(state.adversarial, "adversarial")
    h = ws.unnormalized_constraints(y)
    gamma = np.asarray(state.multipliers, dtype=np.float64)
    if gamma.shape != h.shape:
        raise ContractError(f"{gamma.size} multipliers for {h.size} constraints")
    return expected_error(p, y) - gamma @ h - 0.5 * rho * np.sum(_hinge(h) ** 2)


def step_theta(state: ModelState, model, data, alpha: float) -> np.ndarray:
    """One descent step on the parameters against the current adversarial labels."""
    y = state.adversarial
    n = y.size
    grad = model.with_params(state.params).jvp(data, 1.0 - 2.0 * y) / n
    if not np.all(np.isfinite(grad)):
        raise TrainingError("non-finite parameter gradient")
    return state.params - alpha * grad


def step_labels(state: ModelState, p, ws: WeakSignalSet, alpha: float, rho: float) -> np.ndarray:
    """Projected ascent step on the adversarial labels."""
    y = state.adversarial
    p = np.asarray(p, dtype=np.float64)
    n = y.size
    if p.shape != y.shape or ws.n != n:
        raise ContractError("inconsistent lengths in step_labels")
    direction = (1.0 - 2.0 * p) / n
    if ws.m:
        h = ws.unnormalized_constraints(y)
        weights = state.multipliers + rho * _hinge(h)
        direction = direction - weights @ (1.0 - 2.0 * ws.signals)
    return np.clip(y + alpha * direction, 0.0, 1.0)


def step_multipliers(state: ModelState, ws: WeakSignalSet, rho: float) -> np.ndarray:
    """Multiplier update with fixed step ``rho``, clipped at zero.

    Multipliers grow while a bound is violated and shrink while it has slack.
    """
    if ws.m == 0:
        return np.zeros(0)
    h = ws.unnormalized_constraints(state.adversarial)
    return _hinge(state.multipliers + rho * h)


def initial_state(model, ws: WeakSignalSet, config: SolverConfig) -> ModelState:
    params = np.zeros_like(model.params, dtype=np.float64)
    if config.init_params == "random":
        params = np.random.default_rng(config.seed).normal(scale=0.01, size=params.shape)
    elif config.init_params != "zeros":
        raise ContractError(f"unknown init policy {config.init_params!r}")
    y = ws.signals.mean(axis=0) if ws.m else np.full(ws.n, 0.5)
    return ModelState(params, np.zeros(ws.m), y)


def _max_violation(ws: WeakSignalSet, y) -> float:
    if ws.m == 0:
        return 0.0
    return float(max(0.0, np.max(ws.unnormalized_constraints(y)) / ws.n))


def train(
    data,
    ws: WeakSignalSet,
    model,
    config: SolverConfig = SolverConfig(),
    callback: Callable[[int, ModelState], None] | None = None,
) -> TrainResult:
    """Run the primal-dual loop until the iterates stop moving.

    Returns the final iterate, or the tail average when
    ``config.average_tail`` is set.  ``status`` is ``"infeasible"`` when the
    multipliers blow up or when the worst violation stops improving for
    ``stall_window`` iterations while above ``violation_tol``.  Running out
    of iterations gives ``"max_iters"`` even if a bound is still violated;
    the message says by how much.
    """
    n = data.n if isinstance(data, Dataset) else len(data)
    if ws.n != n:
        raise ContractError(f"signals cover {ws.n} examples, data has {n}")

    state = initial_state(model, ws, config)
    Q = ws.signals
    G = 1.0 - 2.0 * Q  # (m, n): gradient of h_i with respect to y
    q_sum = Q.sum(axis=1)
    nb = n * ws.bounds
    rho = config.rho
    has_constraints = ws.m > 0

    trace = TrainTrace()
    best_violation = math.inf
    last_improvement = 0
    status, message = "max_iters", "iteration budget exhausted"
    avg_start = (
        None if config.average_tail is None
        else config.max_iters - int(config.average_tail * config.max_iters) + 1
    )
    sums = None
    params, y, gamma = state.params, state.adversarial, state.multipliers
    h = q_sum + G @ y - nb
    t = 0
    for t in range(1, config.max_iters + 1):
        alpha = config.step_size(t)
        fitted = model.with_params(params)
        grad = fitted.jvp(data, 1.0 - 2.0 * y) / n
        new_params = params - alpha * grad
        if not math.isfinite(float(grad.sum())):
            raise TrainingError(f"non-finite parameter gradient at iteration {t}")
        p = model.with_params(new_params).predict(data)

        direction = (1.0 - 2.0 * p) / n
        if has_constraints:
            direction = direction - (gamma + rho * np.maximum(h, 0.0)) @ G
        new_y = np.clip(y + alpha * direction, 0.0, 1.0)
        h = q_sum + G @ new_y - nb
        new_gamma = np.maximum(gamma + rho * h, 0.0) if has_constraints else gamma

        err = float((p + (1.0 - 2.0 * p) * new_y).sum()) / n
        hinge = np.maximum(h, 0.0)
        violation = float(hinge.max()) / n if has_constraints else 0.0
        gamma_norm = float(new_gamma.max()) if has_constraints else 0.0
        trace.append(err - new_gamma @ h - 0.5 * rho * hinge @ hinge, err, violation, gamma_norm)

        change = max(
            float(np.abs(new_params - params).max()),
            float(np.abs(new_y - y).max()),
            float(np.abs(new_gamma - gamma).max()) if has_constraints else 0.0,
        )
        params, y, gamma = new_params, new_y, new_gamma
        if avg_start is not None and t >= avg_start:
            if sums is None:
                sums = [np.zeros_like(params), np.zeros_like(y), np.zeros_like(gamma), 0]
            sums[0] += params
            sums[1] += y
            sums[2] += gamma
            sums[3] += 1
        if callback is not None:
            callback(t, ModelState(params, gamma, y))

        if violation < best_violation * 0.99:
            best_violation = violation
            last_improvement = t
        if gamma_norm > config.gamma_limit:
            status, message = "infeasible", f"multipliers exceeded {config.gamma_limit:g}"
            break
        if t - last_improvement >= config.stall_window and best_violation > config.violation_tol:
            status = "infeasible"
            message = (
                f"constraint violation stalled at {best_violation:.4g} "
                f"for {config.stall_window} iterations"
            )
            break
        if change < config.tol and violation <= config.violation_tol:
            status, message = "converged", f"converged after {t} iterations"
            break
    else:
        leftover = _max_violation(ws, y)
        if leftover > config.violation_tol:
            message = f"iteration budget exhausted with constraint violation {leftover:.3g}"

    if sums is not None and status != "infeasible":
        k = sums[3]
        params, y, gamma = sums[0] / k, sums[1] / k, sums[2] / k
    state = ModelState(params, gamma, y)
    return TrainResult(model.with_params(state.params), state, trace, status, t, message)
