"""The two-example toy problem used to sanity-check the solver.

Two examples, two weak signals, bounds 0.4 each.  With one free logit per
example the solver optimizes directly over the learned probabilities, so the
result can be compared with the exact primal objective.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .core import WeakSignalSet, constraint_values
from .models import DirectModel
from .oracle import primal_value, solve_exact
from .solver import SolverConfig, TrainResult, train

Q1 = (0.3, 0.2)
Q2 = (0.6, 0.1)
BOUNDS = (0.4, 0.4)

TARGET_P = (0.18, 0.0)
TARGET_Y = (0.41, 0.23)
TOL = 0.02
ACTIVE_TOL = 0.01

# Tail averaging damps the primal-dual cycle around the saddle point.
FIXTURE_SOLVER = SolverConfig(step=0.1, rho=0.1, max_iters=10_000, average_tail=0.5)


def fixture_signals(extra_signals: int = 0, noise: float = 0.02, seed: int = 0,
                    bound: float | None = None) -> WeakSignalSet:
    """``q1``, ``q2`` and ``extra_signals`` jittered copies of ``q2``.

    ``bound`` replaces every bound when given.
    """
    rng = np.random.default_rng(seed)
    rows = [np.array(Q1), np.array(Q2)]
    rows += [np.clip(np.array(Q2) + rng.normal(scale=noise, size=2), 0, 1) for _ in range(extra_signals)]
    bounds = [BOUNDS[0], BOUNDS[1]] + [BOUNDS[1]] * extra_signals
    if bound is not None:
        bounds = [bound] * len(rows)
    names = ["q1", "q2"] + [f"q2_copy{i + 1}" for i in range(extra_signals)]
    return WeakSignalSet(np.array(rows), np.array(bounds), tuple(names))


@dataclass
class FixtureReport:
    p: np.ndarray
    y: np.ndarray
    primal: float
    best_response: np.ndarray  # oracle labels at p
    slack: np.ndarray  # b - constraint value at the solver's y
    seconds: float
    result: TrainResult
    checks: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def lines(self) -> list[str]:
        out = [
            f"learned p        = ({self.p[0]:.4f}, {self.p[1]:.4f})",
            f"adversarial y    = ({self.y[0]:.4f}, {self.y[1]:.4f})",
            f"primal g(p)      = {self.primal:.4f}",
            f"best response    = ({self.best_response[0]:.4f}, {self.best_response[1]:.4f})",
            "slack (b - c)    = (" + ", ".join(f"{s:.4f}" for s in self.slack) + ")",
            f"solver status    = {self.result.status} after {self.result.iterations} iterations",
            f"runtime          = {self.seconds:.3f} s",
        ]
        out += [f"{'PASS' if ok else 'FAIL'}  {name}" for name, ok in self.checks.items()]
        return out


def _close(a, b, tol) -> bool:
    return bool(np.all(np.abs(np.asarray(a) - np.asarray(b)) <= tol))


def run_fixture(extra_signals: int = 0, constraints: bool = True, bound: float | None = None,
                config: SolverConfig = FIXTURE_SOLVER, seed: int = 0) -> FixtureReport:
    """Train the direct model on the toy problem and compare with the targets."""
    ws = fixture_signals(extra_signals, seed=seed, bound=bound) if constraints else WeakSignalSet.empty(2)
    data = np.zeros((2, 1))
    start = time.perf_counter()
    result = train(data, ws, DirectModel.zeros(2), config)
    seconds = time.perf_counter() - start
    p = result.model.predict(data)
    y = result.state.adversarial

    if result.infeasible:
        return FixtureReport(p, y, float("nan"), np.full(2, np.nan), np.full(ws.m, np.nan),
                             seconds, result, {"bounds feasible": False})

    oracle = solve_exact(p, ws)
    report = FixtureReport(p, y, oracle.value, oracle.labels,
                           ws.bounds - constraint_values(ws, y), seconds, result)
    if not constraints:
        # Unconstrained adversary: flips every prediction, error of a hard
        # prediction is 1.
        flipped = (p < 0.5).astype(float)
        report.checks["adversary flips predictions"] = _close(oracle.labels, flipped, 1e-9)
        report.checks["primal of hard predictions is 1"] = abs(primal_value([1.0, 0.0], ws) - 1.0) < 1e-9
        report.checks["learned p near 0.5"] = _close(p, 0.5, TOL)
    else:
        report.checks[f"p within {TOL} of {TARGET_P}"] = _close(p, TARGET_P, TOL)
        report.checks[f"y within {TOL} of {TARGET_Y}"] = _close(y, TARGET_Y, TOL)
        report.checks[f"both constraints active within {ACTIVE_TOL}"] = _close(report.slack[:2], 0.0, ACTIVE_TOL)
    report.checks["runtime under 1 s"] = seconds < 1.0
    return report
