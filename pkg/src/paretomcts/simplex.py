"""Dense two-phase simplex solver for small linear programs.

Self-contained (no external solver), with Bland's anti-cycling rule.
Intended for tree-flow programs with at most a few thousand variables;
an optional SciPy backend is available through `lp_solve(backend=...)`
for larger instances.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

FEASIBILITY_TOL = 1e-7
PIVOT_TOL = 1e-10
REDUCED_COST_TOL = 1e-9


class UnboundedError(RuntimeError):
    """Raised when the objective is unbounded over the feasible region."""


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal" or "infeasible"
    x: Optional[np.ndarray]
    value: Optional[float]


def lp_solve(
    objective: Sequence[float],
    a_ub: Sequence[Sequence[float]] = (),
    b_ub: Sequence[float] = (),
    a_eq: Sequence[Sequence[float]] = (),
    b_eq: Sequence[float] = (),
    maximize: bool = True,
    backend: str = "bland",
) -> LPResult:
    """Optimize objective @ x subject to a_ub @ x <= b_ub, a_eq @ x = b_eq, x >= 0."""
    if backend == "highs":
        return _solve_scipy(objective, a_ub, b_ub, a_eq, b_eq, maximize)
    if backend != "bland":
        raise ValueError(f"unknown LP backend {backend!r}")
    return _solve_bland(objective, a_ub, b_ub, a_eq, b_eq, maximize)


def _solve_scipy(objective, a_ub, b_ub, a_eq, b_eq, maximize) -> LPResult:
    from scipy.optimize import linprog

    c = np.asarray(objective, dtype=float)
    sign = -1.0 if maximize else 1.0
    res = linprog(
        sign * c,
        A_ub=np.asarray(a_ub, dtype=float) if len(a_ub) else None,
        b_ub=np.asarray(b_ub, dtype=float) if len(b_ub) else None,
        A_eq=np.asarray(a_eq, dtype=float) if len(a_eq) else None,
        b_eq=np.asarray(b_eq, dtype=float) if len(b_eq) else None,
        bounds=(0, None),
        method="highs",
    )
    if res.status == 2:
        return LPResult("infeasible", None, None)
    if res.status == 3:
        raise UnboundedError("objective unbounded")
    if not res.success:
        raise RuntimeError(f"LP solver failure: {res.message}")
    return LPResult("optimal", res.x, float(c @ res.x))


def _pivot(tableau: np.ndarray, basis: list[int], row: int, col: int) -> None:
    tableau[row] /= tableau[row, col]
    for i in range(tableau.shape[0]):
        if i != row and abs(tableau[i, col]) > 0.0:
            tableau[i] -= tableau[i, col] * tableau[row]
    basis[row] = col


def _bland_iterate(tableau: np.ndarray, basis: list[int], n_cols: int) -> None:
    """Run simplex pivots on the tableau until the objective row is optimal."""
    while True:
        obj = tableau[-1]
        entering = -1
        for j in range(n_cols):
            if obj[j] < -REDUCED_COST_TOL:
                entering = j
                break
        if entering < 0:
            return
        leaving = -1
        best_ratio = None
        for i in range(tableau.shape[0] - 1):
            a = tableau[i, entering]
            if a > PIVOT_TOL:
                ratio = tableau[i, -1] / a
                if (
                    best_ratio is None
                    or ratio < best_ratio - PIVOT_TOL
                    or (abs(ratio - best_ratio) <= PIVOT_TOL and basis[i] < basis[leaving])
                ):
                    best_ratio = ratio
                    leaving = i
        if leaving < 0:
            raise UnboundedError("objective unbounded")
        _pivot(tableau, basis, leaving, entering)


def _solve_bland(objective, a_ub, b_ub, a_eq, b_eq, maximize) -> LPResult:
    c_user = np.asarray(objective, dtype=float)
    n = c_user.size
    rows = []
    rhs = []
    n_ub = len(a_ub)
    for row, b in zip(a_ub, b_ub):
        rows.append(np.asarray(row, dtype=float))
        rhs.append(float(b))
    for row, b in zip(a_eq, b_eq):
        rows.append(np.asarray(row, dtype=float))
        rhs.append(float(b))
    m = len(rows)
    if m == 0:
        # No constraints: only x = 0 is safely optimal for c <= 0.
        if np.any(c_user > 0) if maximize else np.any(c_user < 0):
            raise UnboundedError("objective unbounded")
        return LPResult("optimal", np.zeros(n), 0.0)

    # Columns: n structural, n_ub slacks, m artificials.
    n_slack = n_ub
    n_total = n + n_slack + m
    a = np.zeros((m, n_total))
    b = np.zeros(m)
    for i in range(m):
        a[i, :n] = rows[i]
        if i < n_ub:
            a[i, n + i] = 1.0
        b[i] = rhs[i]
        if b[i] < 0:
            a[i] *= -1.0
            b[i] *= -1.0
        a[i, n + n_slack + i] = 1.0

    tableau = np.zeros((m + 1, n_total + 1))
    tableau[:m, :n_total] = a
    tableau[:m, -1] = b
    basis = [n + n_slack + i for i in range(m)]

    # Phase 1: minimize the sum of artificials.
    tableau[-1, n + n_slack : n_total] = 1.0
    for i in range(m):
        tableau[-1] -= tableau[i]
    _bland_iterate(tableau, basis, n_total)
    if -tableau[-1, -1] > FEASIBILITY_TOL:
        return LPResult("infeasible", None, None)

    # Drive any artificial still in the basis out, or drop its redundant row.
    keep = list(range(m))
    for i in range(m):
        if basis[i] >= n + n_slack:
            pivot_col = -1
            for j in range(n + n_slack):
                if abs(tableau[i, j]) > PIVOT_TOL:
                    pivot_col = j
                    break
            if pivot_col >= 0:
                _pivot(tableau, basis, i, pivot_col)
            else:
                keep.remove(i)
    if len(keep) < m:
        rows_idx = keep + [m]
        tableau = tableau[rows_idx]
        basis = [basis[i] for i in keep]
        m = len(keep)

    # Phase 2 on the original objective (internally minimized).
    n_cols = n + n_slack
    tableau = np.hstack([tableau[:, :n_cols], tableau[:, -1:]])
    c_min = -c_user if maximize else c_user.copy()
    tableau[-1, :] = 0.0
    tableau[-1, :n] = c_min
    for i in range(m):
        if basis[i] < n and c_min[basis[i]] != 0.0:
            tableau[-1] -= c_min[basis[i]] * tableau[i]
    _bland_iterate(tableau, basis, n_cols)

    x = np.zeros(n_cols)
    for i in range(m):
        x[basis[i]] = tableau[i, -1]
    solution = x[:n]
    return LPResult("optimal", solution, float(c_user @ solution))
