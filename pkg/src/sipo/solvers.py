"""LP solvers: matrix-free primal-dual hybrid gradient with KKT-residual
stopping, a dense two-phase simplex reference for tiny instances, the
parametric ratio (Dinkelbach-style) cross check, and a rigorous phase-1
feasibility test.

The PDHG iteration on ``min c.x  s.t.  G x <= h, x_N >= 0``:

    lam  <- max(0, lam + sigma * (G xbar - h))
    x    <- clamp(x - tau * (c + G' lam))        # clamp only the beam block
    xbar <- x + theta * (x - x_prev)

with ``tau = sigma = 0.99 / ||G||`` by default.  A solve reports Optimal
only when the four normalized KKT residuals (stationarity, primal, dual,
complementary slackness) all sit at or below ``tol_kkt``.
"""

from __future__ import annotations

import csv
import enum
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (InnerSolverFailure, NonConvergence, NumericalBreakdown,
                     SizeLimitExceeded)
from .formulations import LfProblem, LpProblem
from .operators import power_iteration_norm
from .simplex import SimplexResult, two_phase_simplex

__all__ = [
    "SolveStatus", "PdhgOptions", "DualState", "SolveReport", "solve_pdhg",
    "kkt_residuals", "solve_dense_reference", "solve_dinkelbach",
    "check_feasibility_phase1", "FeasibilityResult",
]


class SolveStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    ITER_LIMIT = "IterLimit"
    UNBOUNDED = "Unbounded"


@dataclass(frozen=True)
class PdhgOptions:
    max_iters: int = 200_000
    tol_kkt: float = 1e-6
    tau: float | None = None       # auto: 0.99 / operator norm
    sigma: float | None = None
    theta: float = 1.0
    check_every: int = 100
    seed: int = 0
    norm_iters: int = 40
    restart_period: int = 32_000   # averaging-window cap; 0 disables restarts
    polish: bool = True            # active-set refinement once nearly converged
    trace_path: str | None = None
    x0: np.ndarray | None = None   # warm starts, off by default
    lam0: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.max_iters < 1 or self.check_every < 1:
            raise ValueError("iteration counts must be positive")


@dataclass(frozen=True)
class DualState:
    """Multipliers per constraint family, all nonnegative."""

    band: np.ndarray        # band cap rows
    gel_upper: np.ndarray   # gel upper-bound rows
    gel_lower: np.ndarray   # gel lower-bound rows
    beam_bounds: np.ndarray  # nonnegativity of active beamlets


@dataclass(frozen=True)
class SolveReport:
    status: SolveStatus
    objective: float
    beam_values: np.ndarray          # full sinogram vector, zeros on mask
    spill: float | None              # band spill bound, when present
    overshoot: float | None          # gel overshoot bound, when present
    kkt: dict[str, float]
    iters: int
    wall_time: float
    duals: DualState | None = None
    x: np.ndarray | None = None      # raw variable vector (active block + scalars)
    trace: list = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["field", "value"])
            w.writerow(["status", self.status.value])
            w.writerow(["objective", format(self.objective, ".17g")])
            w.writerow(["spill", "" if self.spill is None
                        else format(self.spill, ".17g")])
            w.writerow(["overshoot", "" if self.overshoot is None
                        else format(self.overshoot, ".17g")])
            for key, val in self.kkt.items():
                w.writerow([key, format(val, ".17g")])
            w.writerow(["iters", self.iters])
            w.writerow(["wall_time", format(self.wall_time, ".6g")])


class _System:
    """Uniform solver-facing view of an inequality-constrained LP."""

    def __init__(self, cost, nonneg_mask, residual, adjoint, h):
        self.cost = cost
        self.nonneg_mask = nonneg_mask
        self.residual = residual
        self.adjoint = adjoint
        self.h = h
        self.n_vars = cost.size
        self.n_rows = h.size

    @classmethod
    def from_problem(cls, prob: LpProblem) -> "_System":
        return cls(prob.cost, prob.nonneg_mask, prob.residual,
                   prob.adjoint_rows, prob.h)

    def linear_rows(self, x):
        return self.residual(x) + self.h

    def norm_estimate(self, iters, seed):
        return power_iteration_norm(self.linear_rows, self.adjoint,
                                    (self.n_vars,), iters, seed)


def _kkt_core(system: _System, x: np.ndarray, lam: np.ndarray,
              residual: np.ndarray | None = None,
              grad: np.ndarray | None = None) -> dict[str, float]:
    if residual is None:
        residual = system.residual(x)
    if grad is None:
        grad = system.cost + system.adjoint(lam)
    scale = 1.0 + np.abs(system.h).max(initial=0.0) \
        + np.abs(system.cost).max(initial=0.0)

    clamped = system.nonneg_mask & (x <= 0.0)
    stat = np.abs(grad).copy()
    # At an active lower bound only a negative gradient is a violation.
    stat[clamped] = np.maximum(0.0, -grad[clamped])
    stationarity = stat.max(initial=0.0)

    primal = np.maximum(0.0, residual).max(initial=0.0)
    dual = np.maximum(0.0, -lam).max(initial=0.0)
    compl_rows = np.abs(lam * residual).max(initial=0.0)
    bound_mult = np.maximum(0.0, grad[system.nonneg_mask])
    compl_bounds = np.abs(bound_mult * x[system.nonneg_mask]).max(initial=0.0)
    return {
        "stationarity_res": float(stationarity / scale),
        "primal_res": float(primal / scale),
        "dual_res": float(dual / scale),
        "compl_res": float(max(compl_rows, compl_bounds) / scale),
    }


def kkt_residuals(prob: LpProblem, x: np.ndarray,
                  lam: np.ndarray) -> dict[str, float]:
    """Normalized KKT residuals of (x, lam) for the given problem."""
    return _kkt_core(_System.from_problem(prob),
                     np.asarray(x, dtype=float), np.asarray(lam, dtype=float))


def _attempt_polish(system: _System, x, lam, tol):
    """Active-set refinement of a nearly converged primal-dual pair.

    Guess the binding rows from the dual support and the variable support
    from the primal iterate, fit the resulting KKT equality systems by
    least squares (matrix-free), and accept the candidate only if the full
    KKT residuals verify at ``tol``.  Returns (x, lam, kkt) or None.
    """
    from scipy.sparse.linalg import LinearOperator, lsqr

    nonneg = system.nonneg_mask
    lam_max = lam.max(initial=0.0)
    x_max = np.abs(x).max(initial=0.0)
    if lam_max <= 0.0 or x_max <= 0.0:
        return None

    res0 = system.residual(x)
    iter_lim = 700
    for row_cut, sup_cut in ((1e-5, 1e-9), (1e-4, 1e-7), (1e-3, 1e-5)):
        # Candidate binding rows: dual support plus anything violated (a
        # violated row must end up tight or strictly inside).
        rows = (lam > row_cut * lam_max) | (res0 > 0)
        if not rows.any():
            continue
        sup = ~nonneg | (x > sup_cut * x_max)
        n_sup = int(sup.sum())

        def pad_rows(v, rows=rows):
            out = np.zeros(system.n_rows)
            out[rows] = v
            return out

        def pad_sup(v, sup=sup):
            out = np.zeros(system.n_vars)
            out[sup] = v
            return out

        # Feasibility with the guessed rows tight: (G(x + d) - h)_rows = 0.
        op_primal = LinearOperator(
            (int(rows.sum()), n_sup),
            matvec=lambda d: system.linear_rows(pad_sup(d))[rows],
            rmatvec=lambda w: system.adjoint(pad_rows(w))[sup])
        d = lsqr(op_primal, -res0[rows], atol=1e-14, btol=1e-14,
                 iter_lim=iter_lim)[0]
        x2 = x.copy()
        x2[sup] += d
        np.maximum(x2, 0.0, out=x2, where=nonneg)

        # Stationarity on the support: (c + G' lam2)_sup = 0 with lam2 >= 0
        # supported on the candidate rows; one negative-dropping resolve.
        sel = rows.copy()
        lam2 = lam.copy()
        for _ in range(2):
            op_dual = LinearOperator(
                (n_sup, int(sel.sum())),
                matvec=lambda e, sel=sel: system.adjoint(pad_rows(e, sel))[sup],
                rmatvec=lambda v, sel=sel: system.linear_rows(pad_sup(v))[sel])
            e = lsqr(op_dual, -system.cost[sup], atol=1e-14, btol=1e-14,
                     iter_lim=iter_lim)[0]
            cand = pad_rows(e, sel)
            neg = cand < 0
            lam2 = np.maximum(cand, 0.0)
            if not neg.any():
                break
            sel = sel & ~neg

        kkt2 = _kkt_core(system, x2, lam2)
        if all(v <= tol for v in kkt2.values()):
            return x2, lam2, kkt2
    return None


def _pdhg_core(system: _System, opts: PdhgOptions):
    """Shared PDHG loop; returns (status, x, lam, kkt, iters, trace).

    Plain primal-dual iterations with periodic restarts to the running
    iterate average (window doubles whenever a restart fires on the cap
    rather than on residual decay); near convergence an active-set polish
    tries to close the final gap, subject to full KKT verification.
    """
    L = system.norm_estimate(opts.norm_iters, opts.seed)
    if L == 0.0:
        L = 1.0

    x = np.zeros(system.n_vars) if opts.x0 is None else opts.x0.astype(float).copy()
    lam = np.zeros(system.n_rows) if opts.lam0 is None else opts.lam0.astype(float).copy()
    nonneg = system.nonneg_mask
    cost = system.cost
    trace = []

    tau = opts.tau if opts.tau is not None else 0.99 / L
    sigma = opts.sigma if opts.sigma is not None else 0.99 / L
    probe = min(2000, max(200, opts.max_iters // 20)) \
        if (opts.tau is None and opts.sigma is None) else 0
    it = 0
    if probe:
        # Short symmetric-step probe to read off the primal/dual scale,
        # then fixed rebalanced steps for the remainder (tau*sigma*L^2
        # unchanged).  Balancing against the iterate norms shortens the
        # tail on instances whose dual mass is much smaller than the
        # primal pattern.
        xbar = x.copy()
        for _ in range(probe):
            lam += sigma * system.residual(xbar)
            np.maximum(lam, 0.0, out=lam)
            grad = cost + system.adjoint(lam)
            x_new = x - tau * grad
            np.maximum(x_new, 0.0, out=x_new, where=nonneg)
            xbar = x_new + opts.theta * (x_new - x)
            x = x_new
        it = probe
        nx = float(np.linalg.norm(x))
        nlam = float(np.linalg.norm(lam))
        if nx > 0 and nlam > 0:
            omega = float(np.clip(np.sqrt(nx / nlam), 1.0, 16.0))
            tau = 0.99 * omega / L
            sigma = 0.99 / (omega * L)

    xbar = x.copy()
    sum_x = np.zeros_like(x)
    sum_lam = np.zeros_like(lam)
    window = 0
    period = min(1000, opts.restart_period) if opts.restart_period else 0
    mu_at_restart = np.inf
    polish_below = 2e-4
    decay = 0.25

    kkt = _kkt_core(system, x, lam)
    status = SolveStatus.ITER_LIMIT
    while it < opts.max_iters:
        steps = min(opts.check_every, opts.max_iters - it)
        for _ in range(steps):
            lam += sigma * system.residual(xbar)
            np.maximum(lam, 0.0, out=lam)
            grad = cost + system.adjoint(lam)
            x_new = x - tau * grad
            np.maximum(x_new, 0.0, out=x_new, where=nonneg)
            xbar = x_new + opts.theta * (x_new - x)
            x = x_new
            sum_x += x
            sum_lam += lam
            window += 1
        it += steps

        residual = system.residual(x)
        kkt = _kkt_core(system, x, lam, residual=residual, grad=grad)
        obj = float(cost @ x)
        if not np.isfinite(obj) or not all(np.isfinite(v) for v in kkt.values()):
            raise NumericalBreakdown(f"non-finite iterate at iteration {it}")
        mu = max(kkt.values())
        trace.append((it, kkt["stationarity_res"], kkt["primal_res"],
                      kkt["dual_res"], kkt["compl_res"], obj))
        if mu <= opts.tol_kkt:
            status = SolveStatus.OPTIMAL
            break

        if period:
            x_avg = sum_x / window
            lam_avg = sum_lam / window
            np.maximum(x_avg, 0.0, out=x_avg, where=nonneg)
            np.maximum(lam_avg, 0.0, out=lam_avg)
            kkt_avg = _kkt_core(system, x_avg, lam_avg)
            mu_avg = max(kkt_avg.values())
            best = min(mu, mu_avg)
            if best <= opts.tol_kkt or best <= decay * mu_at_restart \
                    or window >= period:
                if mu_avg < mu:
                    x, lam, kkt, mu = x_avg, lam_avg, kkt_avg, mu_avg
                if mu <= opts.tol_kkt:
                    status = SolveStatus.OPTIMAL
                    break
                if best > decay * mu_at_restart:
                    period = min(2 * period, opts.restart_period)
                xbar = x.copy()
                sum_x[:] = 0.0
                sum_lam[:] = 0.0
                window = 0
                mu_at_restart = mu

                if opts.polish and mu <= polish_below:
                    polished = _attempt_polish(system, x, lam, opts.tol_kkt)
                    if polished is not None:
                        x, lam, kkt = polished
                        status = SolveStatus.OPTIMAL
                        trace.append((it, kkt["stationarity_res"],
                                      kkt["primal_res"], kkt["dual_res"],
                                      kkt["compl_res"], float(cost @ x)))
                        break
                    polish_below = mu / 2.0
    return status, x, lam, kkt, it, trace


def _write_trace(trace, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iter", "stationarity_res", "primal_res", "dual_res",
                    "compl_res", "objective"])
        for row in trace:
            w.writerow([row[0]] + [format(v, ".17g") for v in row[1:]])


def _report_from_solution(prob: LpProblem, status, x, lam, kkt, iters,
                          wall_time, trace) -> SolveReport:
    y, spill, overshoot = prob.split(x)
    beam_full = np.zeros(prob.operator.n_rays)
    beam_full[prob.partition.active] = y
    duals = None
    if lam is not None:
        grad = prob.cost + prob.adjoint_rows(lam)
        duals = DualState(
            band=lam[:prob.n_band].copy(),
            gel_upper=lam[prob.n_band:prob.n_band + prob.n_gel].copy(),
            gel_lower=lam[prob.n_band + prob.n_gel:].copy(),
            beam_bounds=np.maximum(0.0, grad[:prob.n_active]),
        )
    return SolveReport(
        status=status, objective=float(prob.cost @ x), beam_values=beam_full,
        spill=None if spill is None else float(spill),
        overshoot=None if overshoot is None else float(overshoot),
        kkt=kkt, iters=iters, wall_time=wall_time, duals=duals,
        x=x.copy(), trace=trace)


def solve_pdhg(prob: LpProblem, opts: PdhgOptions | None = None) -> SolveReport:
    """Matrix-free PDHG solve of a projection-shape LP.

    Deterministic for fixed options; Optimal status certifies all four
    normalized KKT residuals at ``tol_kkt``.
    """
    opts = opts or PdhgOptions()
    t0 = time.perf_counter()
    system = _System.from_problem(prob)
    status, x, lam, kkt, iters, trace = _pdhg_core(system, opts)
    wall = time.perf_counter() - t0
    if opts.trace_path:
        _write_trace(trace, opts.trace_path)
    return _report_from_solution(prob, status, x, lam, kkt, iters, wall, trace)


def solve_dense_reference(prob: LpProblem,
                          max_iters: int = 50_000) -> SolveReport:
    """Two-phase simplex on the materialized instance (tiny grids only)."""
    t0 = time.perf_counter()
    G, h = prob.materialize_constraints()
    res: SimplexResult = two_phase_simplex(prob.cost, G, h, prob.nonneg_mask,
                                           max_iters=max_iters)
    wall = time.perf_counter() - t0
    status = {
        "optimal": SolveStatus.OPTIMAL,
        "infeasible": SolveStatus.INFEASIBLE,
        "unbounded": SolveStatus.UNBOUNDED,
        "iteration_limit": SolveStatus.ITER_LIMIT,
    }[res.status]
    if status is not SolveStatus.OPTIMAL:
        return SolveReport(status=status, objective=np.nan,
                           beam_values=np.zeros(prob.operator.n_rays),
                           spill=None, overshoot=None, kkt={}, iters=res.iterations,
                           wall_time=wall)
    kkt = kkt_residuals(prob, res.x, res.duals)
    return _report_from_solution(prob, status, res.x, res.duals, kkt,
                                 res.iterations, wall, [])


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    worst_violation: float     # optimal max constraint violation
    margin: float              # tolerance minus violation (when feasible)
    certified: bool            # True when decided by an Optimal phase-1 solve


class _Phase1System(_System):
    """min xi  s.t.  (hard-rows(y) - h_hard)/s <= xi, y >= 0.

    Rows carrying a free auxiliary scalar are always satisfiable and are
    excluded, otherwise the phase-1 objective is unbounded below.  Rows
    are divided by the right-hand-side magnitude so the violation scalar
    lives at O(1) whatever the problem's normalization anchor; reported
    violations are mapped back to original units via ``row_scale``.
    """

    def __init__(self, prob: LpProblem):
        self._prob = prob
        self._hard = prob.hard_row_mask()
        self._n_active = prob.n_active
        h_hard = prob.h[self._hard]
        self.row_scale = max(1.0, float(np.abs(h_hard).max(initial=0.0)))
        cost = np.zeros(self._n_active + 1)
        cost[-1] = 1.0
        nonneg = np.zeros(self._n_active + 1, dtype=bool)
        nonneg[:self._n_active] = True
        super().__init__(cost, nonneg, self._residual, self._adjoint,
                         h_hard / self.row_scale)

    def _pad(self, y):
        full = np.zeros(self._prob.n_vars)
        full[:self._n_active] = y
        return full

    def _residual(self, x):
        r = self._prob.residual(self._pad(x[:-1]))
        return r[self._hard] / self.row_scale - x[-1]

    def _adjoint(self, lam):
        lam_full = np.zeros(self._prob.n_rows)
        lam_full[self._hard] = lam / self.row_scale
        g = self._prob.adjoint_rows(lam_full)
        return np.concatenate([g[:self._n_active], [-lam.sum()]])


def check_feasibility_phase1(prob: LpProblem,
                             opts: PdhgOptions | None = None,
                             feas_tol: float = 1e-6) -> FeasibilityResult:
    """Decide feasibility by minimizing the worst constraint violation.

    Feasible as soon as any iterate certifies violation <= ``feas_tol``;
    Infeasible only from an Optimal phase-1 solve with a positive floor.
    """
    opts = opts or PdhgOptions()
    system = _Phase1System(prob)

    # A constructive certificate often exists without any solve: scale a
    # uniform pattern until the gel lower bounds hold.
    y0 = np.ones(prob.n_active)
    field0 = prob.dose_from_active(y0)
    gel0 = field0[prob.partition.gel]
    if np.all(gel0 > 0):
        y0 *= float(np.max(prob.scaled_target / gel0))
        viol0 = float(np.maximum(0.0, prob.residual(
            system._pad(y0))[system._hard]).max(initial=0.0))
        if viol0 <= feas_tol:
            return FeasibilityResult(True, viol0, feas_tol - viol0, True)

    status, x, lam, kkt, iters, trace = _pdhg_core(system, opts)
    xi = float(x[-1]) * system.row_scale
    worst = float(np.maximum(0.0, prob.residual(
        system._pad(x[:-1]))[system._hard]).max(initial=0.0))
    if worst <= feas_tol:
        return FeasibilityResult(True, worst, feas_tol - worst, True)
    if status is SolveStatus.OPTIMAL and xi > feas_tol:
        return FeasibilityResult(False, xi, feas_tol - xi, True)
    raise NonConvergence(
        f"phase-1 undecided after {iters} iterations (xi={xi:.3e}, "
        f"worst violation {worst:.3e})")


def _default_inner_solver(c, A_ub, b_ub, nonneg):
    res = two_phase_simplex(c, A_ub, b_ub, nonneg)
    if res.status != "optimal":
        raise InnerSolverFailure(f"inner LP ended with status {res.status}")
    return res.x, res.objective


def solve_dinkelbach(lfp: LfProblem, inner=None, q0: float | None = None,
                     tol: float = 1e-9, max_outer: int = 50) -> SolveReport:
    """Parametric ratio iteration on the fractional instance.

    Solves ``min numerator(x) - q_k * denominator(x)`` over the feasible
    set and updates ``q_{k+1}`` to the realized ratio; the value function
    vanishes exactly at the optimal ratio and the ``q_k`` sequence is
    non-increasing from any feasible start.  Used as a cross-validation
    oracle on tiny instances; the inner solver defaults to the dense
    simplex.
    """
    inner = inner or _default_inner_solver
    t0 = time.perf_counter()
    G, h = lfp.materialize_constraints()
    n = lfp.n_vars
    # The cone is scale-free, so the search may be pinned to the unit-floor
    # slice without changing the optimal ratio; the parametric minimum is
    # then always attained at a point with a usable (positive) floor.
    pin = np.zeros((1, n))
    pin[0, -1] = -1.0
    G = np.vstack([G, pin])
    h = np.concatenate([h, [-1.0]])
    nonneg = np.ones(n, dtype=bool)

    if q0 is None:
        # Feasible ratio from a uniform pattern scaled to unit floor.
        g = np.ones(lfp.n_active)
        field = lfp._dose_from_active(g)
        gel = field[lfp.partition.gel]
        if np.any(gel <= 0):
            raise InnerSolverFailure(
                "uniform pattern leaves part of the gel dark; no starting ratio")
        floor0 = float(np.min(gel / lfp.scaled_target))
        spill0 = float(field[lfp.partition.band].max()) if lfp.partition.band.size else 0.0
        over0 = float(np.max(gel / lfp.scaled_target))
        q0 = (lfp.w1 * spill0 + lfp.w2 * over0) / floor0

    q = float(q0)
    x = None
    for outer in range(1, max_outer + 1):
        c = np.zeros(n)
        c[-3] = lfp.w1
        c[-2] = lfp.w2
        c[-1] = -q
        x, value = inner(c, G, h, nonneg)
        if abs(value) <= tol * (1.0 + abs(q)):
            break
        if x[-1] <= 0:
            raise InnerSolverFailure("parametric optimum lost its floor")
        q = lfp.numerator(x) / lfp.denominator(x)
    else:
        raise NonConvergence(f"ratio iteration did not settle in {max_outer} solves")

    wall = time.perf_counter() - t0
    y_full = np.zeros(lfp.operator.n_rays)
    scale = 1.0 / x[-1]
    y_full[lfp.partition.active] = scale * x[:lfp.n_active]
    return SolveReport(
        status=SolveStatus.OPTIMAL, objective=float(q), beam_values=y_full,
        spill=float(scale * x[-3]), overshoot=float(scale * x[-2]),
        kkt={}, iters=outer, wall_time=wall)
