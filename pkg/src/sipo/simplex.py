"""Textbook two-phase primal simplex on an explicit inequality system.

Reference solver for tiny instances: exact status (optimal / infeasible /
unbounded), primal solution and row multipliers.  Free variables are split
into positive parts internally; rows with negative right-hand sides get
artificial variables in phase 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_PIVOT_TOL = 1e-9
_COST_TOL = 1e-9
_FEAS_TOL = 1e-8


@dataclass
class SimplexResult:
    status: str                  # optimal | infeasible | unbounded | iteration_limit
    x: np.ndarray | None
    objective: float | None
    duals: np.ndarray | None     # one multiplier per <= row, >= 0 at optimum
    iterations: int


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]
    basis[row] = col


def _run_simplex(T, basis, allowed, max_iters):
    """Drive the reduced-cost row (last) to nonnegativity.  Returns
    (status, iterations); ``allowed`` masks columns eligible to enter."""
    m = T.shape[0] - 1
    stall = 0
    last_obj = T[-1, -1]
    for it in range(max_iters):
        r = T[-1, :-1]
        candidates = np.where(allowed & (r < -_COST_TOL))[0]
        if candidates.size == 0:
            return "optimal", it
        if stall > 2 * (T.shape[1] + m):
            col = candidates[0]            # Bland's rule once progress stalls
        else:
            col = candidates[np.argmin(r[candidates])]
        ratios = np.full(m, np.inf)
        pos = T[:m, col] > _PIVOT_TOL
        ratios[pos] = T[:m, -1][pos] / T[:m, col][pos]
        if not np.isfinite(ratios).any():
            return "unbounded", it
        best = ratios.min()
        ties = np.where(ratios <= best + 1e-12)[0]
        # Bland-style leaving rule on ties guards against cycling.
        row = int(ties[np.argmin(np.asarray(basis)[ties])])
        _pivot(T, basis, row, col)
        # The stored corner value is minus the objective; it only grows.
        if T[-1, -1] > last_obj + 1e-12:
            stall = 0
            last_obj = T[-1, -1]
        else:
            stall += 1
    return "iteration_limit", max_iters


def two_phase_simplex(c, A_ub, b_ub, nonneg, max_iters: int = 50_000) -> SimplexResult:
    """Minimize ``c @ x`` subject to ``A_ub @ x <= b_ub``.

    ``nonneg[j]`` marks variables bounded below by zero; the rest are free.
    """
    c = np.asarray(c, dtype=float)
    A = np.asarray(A_ub, dtype=float)
    b = np.asarray(b_ub, dtype=float)
    nonneg = np.asarray(nonneg, dtype=bool)
    m, n = A.shape

    # Split free variables into differences of nonnegative parts.
    free_idx = np.where(~nonneg)[0]
    A_split = np.hstack([A, -A[:, free_idx]]) if free_idx.size else A.copy()
    c_split = np.concatenate([c, -c[free_idx]]) if free_idx.size else c.copy()
    ns = A_split.shape[1]

    # Negate rows with negative rhs; their slack enters with coefficient -1
    # and an artificial carries the phase-1 basis.
    negated = b < 0
    rows = A_split.copy()
    rhs = b.copy()
    rows[negated] *= -1.0
    rhs[negated] *= -1.0
    slack = np.eye(m)
    slack[negated] *= -1.0
    art_rows = np.where(negated)[0]
    n_art = art_rows.size
    art = np.zeros((m, n_art))
    for k, i in enumerate(art_rows):
        art[i, k] = 1.0

    total = ns + m + n_art
    T = np.zeros((m + 1, total + 1))
    T[:m, :ns] = rows
    T[:m, ns:ns + m] = slack
    T[:m, ns + m:total] = art
    T[:m, -1] = rhs

    basis = [0] * m
    for i in range(m):
        if negated[i]:
            basis[i] = ns + m + int(np.where(art_rows == i)[0][0])
        else:
            basis[i] = ns + i

    iters_total = 0
    if n_art:
        # Phase 1: minimize the artificial sum.
        c1 = np.zeros(total)
        c1[ns + m:] = 1.0
        T[-1, :-1] = c1
        T[-1, -1] = 0.0
        for i in range(m):
            if basis[i] >= ns + m:
                T[-1] -= T[i]
        allowed = np.ones(total, dtype=bool)
        status, it1 = _run_simplex(T, basis, allowed, max_iters)
        iters_total += it1
        if status != "optimal":
            return SimplexResult("iteration_limit", None, None, None, iters_total)
        if -T[-1, -1] > _FEAS_TOL * (1.0 + np.abs(rhs).max(initial=0.0)):
            return SimplexResult("infeasible", None, None, None, iters_total)
        # Pivot remaining artificials out where possible.
        for i in range(m):
            if basis[i] >= ns + m:
                row_vals = np.abs(T[i, :ns + m])
                j = int(np.argmax(row_vals))
                if row_vals[j] > _PIVOT_TOL:
                    _pivot(T, basis, i, j)

    # Phase 2 with the true costs; artificial columns may not re-enter.
    c2 = np.zeros(total)
    c2[:ns] = c_split
    T[-1, :-1] = c2
    T[-1, -1] = 0.0
    for i in range(m):
        if c2[basis[i]] != 0.0:
            T[-1] -= c2[basis[i]] * T[i]
    allowed = np.ones(total, dtype=bool)
    allowed[ns + m:] = False
    status, it2 = _run_simplex(T, basis, allowed, max_iters)
    iters_total += it2
    if status != "optimal":
        return SimplexResult(status, None, None, None, iters_total)

    z = np.zeros(total)
    for i, bj in enumerate(basis):
        z[bj] = T[i, -1]
    x = z[:n].copy()
    if free_idx.size:
        x[free_idx] -= z[n:ns]
    # Row multipliers are the reduced costs of the slack columns.
    duals = T[-1, ns:ns + m].copy()
    duals[np.abs(duals) < 1e-12] = 0.0
    return SimplexResult("optimal", x, float(c @ x), duals, iters_total)
