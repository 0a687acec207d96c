"""Exact solution of the adversary's linear program for small problems.

The adversary picks labels ``y`` in the unit box maximizing the learner's
expected error subject to every weak-signal error bound.  Written in
standard form::

    max  (1 - 2p) @ y / n
    s.t. (1 - 2q_i) @ y <= n * b_i - sum(q_i)     for each signal i
         0 <= y <= 1

This is a diagnostic and test path; training never calls it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .core import ContractError, WeakSignalSet, as_probs, expected_error

OPT_TOL = 1e-6
FEAS_TOL = 1e-6


class InfeasibleError(RuntimeError):
    """The weak-signal bounds admit no labeling in the unit box."""


@dataclass(frozen=True)
class OracleResult:
    labels: np.ndarray
    value: float
    status: str  # "optimal" or "infeasible"
    multipliers: np.ndarray | None = None

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def _standard_form(ws: WeakSignalSet):
    Q = ws.signals
    return 1.0 - 2.0 * Q, ws.n * ws.bounds - Q.sum(axis=1)


def _linprog(c, A, rhs, bounds, A_eq=None, b_eq=None):
    res = linprog(
        c,
        A_ub=A if A.size else None,
        b_ub=rhs if A.size else None,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=bounds,
        method="highs",
    )
    return res


def is_feasible(ws: WeakSignalSet) -> bool:
    """True when some labeling in ``[0, 1]^n`` satisfies every bound."""
    if ws.m == 0:
        return True
    A, rhs = _standard_form(ws)
    res = _linprog(np.zeros(ws.n), A, rhs + FEAS_TOL, [(0.0, 1.0)] * ws.n)
    return res.status == 0


def solve_exact(p, ws: WeakSignalSet, tie_break: bool = True) -> OracleResult:
    """Maximize ``expected_error(p, y)`` over feasible labelings ``y``.

    Among optimal labelings the lexicographically smallest one is returned,
    so the result is deterministic and sits on a vertex of the feasible
    polytope.  ``tie_break=False`` skips that refinement (one extra LP per
    coordinate) and returns whichever optimal vertex the solver finds.
    """
    p = as_probs(p, "p")
    if p.size != ws.n:
        raise ContractError(f"p has length {p.size}, signals have length {ws.n}")
    n = p.size
    A, rhs = _standard_form(ws)
    c = -(1.0 - 2.0 * p) / n
    box = [(0.0, 1.0)] * n
    res = _linprog(c, A, rhs, box)
    if res.status == 2:
        return OracleResult(np.full(n, np.nan), float("nan"), "infeasible")
    if res.status != 0:
        raise RuntimeError(f"LP solver failed: {res.message}")
    best = -res.fun
    multipliers = -res.ineqlin.marginals if ws.m else np.zeros(0)
    if not tie_break:
        y = np.clip(res.x, 0.0, 1.0)
        return OracleResult(y, expected_error(p, y), "optimal", multipliers)

    # Lexicographic tie-break: fix the objective at its optimum, then push each
    # coordinate down in turn.
    A_opt = np.vstack([A, c[None, :]]) if ws.m else c[None, :]
    rhs_opt = np.append(rhs, -best + OPT_TOL * 1e-3) if ws.m else np.array([-best + OPT_TOL * 1e-3])
    y = res.x.copy()
    lo = np.zeros(n)
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        bounds = [(lo[k], lo[k] + 1e-10) if k < j else (0.0, 1.0) for k in range(n)]
        sub = _linprog(e, A_opt, rhs_opt, bounds)
        if sub.status != 0:
            break
        lo[j] = sub.x[j]
        y = sub.x
    y = np.clip(y, 0.0, 1.0)
    y[np.abs(y) < 1e-7] = 0.0
    y[np.abs(y - 1.0) < 1e-7] = 1.0
    return OracleResult(y, expected_error(p, y), "optimal", multipliers)


def primal_value(p, ws: WeakSignalSet) -> float:
    """The learner's worst-case expected error ``g`` at predictions ``p``.

    An upper bound on the true error whenever the bounds are valid.
    """
    result = solve_exact(p, ws, tie_break=False)
    if not result.optimal:
        raise InfeasibleError("weak-signal bounds are infeasible")
    return result.value
