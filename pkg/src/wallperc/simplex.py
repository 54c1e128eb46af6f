"""Dense two-phase bounded-variable primal simplex.

Solves ``min c.x  s.t.  A x = b,  lower <= x <= upper`` where lower bounds
are finite and upper bounds may be ``inf``. Nonbasic variables sit at one
of their bounds; a bound flip is an iteration without a basis change.
Bland's smallest-index rule picks both the entering and (among ratio ties)
the leaving variable, so degenerate problems terminate. Setting
``_Tableau.BLAND_AFTER`` above zero prices by largest reduced cost until
that many consecutive degenerate pivots have occurred.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded" | "iteration_limit"
    x: np.ndarray | None
    objective: float | None
    iterations: int
    farkas: np.ndarray | None = None  # y with y.A <= 0 (at-lower columns) and y.b > 0
    infeasibility: float = 0.0
    duals: np.ndarray | None = None  # y with c - y.A >= 0 on at-lower columns, at optimum

    @property
    def success(self) -> bool:
        return self.status == "optimal"


class _Tableau:
    REFACTOR_EVERY = 100
    BLAND_AFTER = 0

    def __init__(self, A, rhs, basis, at_upper, upper, pivot_tol):
        self.A = A            # original constraint matrix (with artificial identity)
        self.rhs = rhs
        self.T = A.copy()     # B^-1 A, shape (m, N)
        self.beta = rhs.copy()  # values of basic variables
        self.basis = basis    # basis[i] = column index basic in row i
        self.at_upper = at_upper
        self.upper = upper
        self.pivot_tol = pivot_tol
        self.iterations = 0

    def refactor(self):
        """Recompute ``B^-1 A`` and the basic values from the original data."""
        B = self.A[:, self.basis]
        flipped = np.flatnonzero(self.at_upper)
        r = self.rhs - self.A[:, flipped] @ self.upper[flipped]
        self.T = np.linalg.solve(B, self.A)
        self.T[np.abs(self.T) < 1e-13] = 0.0
        self.beta = np.linalg.solve(B, r)
        self.beta[np.abs(self.beta) < 1e-12] = 0.0

    def run(self, cost, active, opt_tol, max_iter):
        """Optimize ``cost`` over columns flagged in ``active``; returns status."""
        T = self.T
        m = T.shape[0]
        is_basic = np.zeros(T.shape[1], dtype=bool)
        is_basic[self.basis] = True
        d = cost - cost[self.basis] @ T  # reduced costs, updated per pivot
        rows = np.arange(m)
        stall = 0  # consecutive degenerate pivots
        while True:
            if self.iterations >= max_iter:
                return "iteration_limit"
            improving = active & ~is_basic & np.where(self.at_upper, d > opt_tol, d < -opt_tol)
            cand = np.flatnonzero(improving)
            if cand.size == 0:
                self.refactor()
                T = self.T
                d = cost - cost[self.basis] @ T
                improving = active & ~is_basic & np.where(self.at_upper, d > opt_tol, d < -opt_tol)
                cand = np.flatnonzero(improving)
                if cand.size == 0:
                    return "optimal"
            if stall >= self.BLAND_AFTER:
                j = int(cand[0])
            else:
                j = int(cand[np.argmax(np.abs(d[cand]))])
            sigma = -1.0 if self.at_upper[j] else 1.0
            col = sigma * T[:, j]

            ub_basic = self.upper[self.basis]
            down = col > self.pivot_tol
            up = (col < -self.pivot_tol) & np.isfinite(ub_basic)
            ratio = np.full(m, np.inf)
            ratio[down] = np.maximum(self.beta[down], 0.0) / col[down]
            ratio[up] = np.maximum(ub_basic[up] - self.beta[up], 0.0) / -col[up]
            theta = self.upper[j]  # bound flip
            leave = -1
            best = ratio.min() if m else np.inf
            # ties go to the smallest basic index; a tie with the bound flip keeps the flip
            if best < theta - 1e-12:
                tied = rows[ratio <= best + 1e-12]
                leave = int(tied[np.argmin(self.basis[tied])])
                theta = ratio[leave]
            if not np.isfinite(theta):
                return "unbounded"

            self.iterations += 1
            stall = stall + 1 if theta <= 1e-12 else 0
            self.beta -= theta * col
            self.beta[np.abs(self.beta) < 1e-12] = 0.0
            if leave < 0:
                self.at_upper[j] = not self.at_upper[j]
                continue
            leave_to_upper = bool(up[leave])
            entering_value = (self.upper[j] - theta) if self.at_upper[j] else theta
            out = self.basis[leave]
            T[leave] /= T[leave, j]
            pivot_col = T[:, j].copy()
            pivot_col[leave] = 0.0
            T -= np.outer(pivot_col, T[leave])
            d -= d[j] * T[leave]
            self.beta[leave] = entering_value
            self.basis[leave] = j
            is_basic[out] = False
            is_basic[j] = True
            self.at_upper[out] = leave_to_upper
            self.at_upper[j] = False
            if self.iterations % self.REFACTOR_EVERY == 0:
                self.refactor()
                T = self.T
                d = cost - cost[self.basis] @ T


def solve(c, A_eq, b_eq, lower=None, upper=None, tol=1e-9, max_iter=200_000) -> LPResult:
    """Minimize ``c.x`` subject to ``A_eq x = b_eq`` and variable bounds.

    ``tol`` is the feasibility tolerance on the phase-one objective (scaled
    by ``max(1, |b|_inf)``) and the optimality tolerance on reduced costs.
    On infeasibility ``farkas`` holds a row vector ``y`` certifying it:
    ``y @ A_eq <= tol`` on every column (for ``lower = 0``, ``upper = inf``)
    while ``y @ b_eq > 0``.
    """
    A = np.asarray(A_eq, dtype=float)
    b = np.asarray(b_eq, dtype=float).ravel()
    m, n = A.shape
    c = np.asarray(c, dtype=float).ravel()
    lo = np.zeros(n) if lower is None else np.asarray(lower, dtype=float).ravel()
    hi = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float).ravel()
    if np.any(~np.isfinite(lo)):
        raise ValueError("lower bounds must be finite")
    if np.any(hi < lo):
        return LPResult("infeasible", None, None, 0, infeasibility=float(np.max(lo - hi)))

    # shift to 0 <= x' <= hi - lo and make the right-hand side nonnegative
    width = hi - lo
    rhs = b - A @ lo
    sign = np.where(rhs < 0, -1.0, 1.0)
    A1 = A * sign[:, None]
    rhs = rhs * sign

    N = n + m
    upper = np.concatenate([width, np.full(m, np.inf)])
    tab = _Tableau(np.hstack([A1, np.eye(m)]), rhs, np.arange(n, N),
                   np.zeros(N, dtype=bool), upper, 1e-9)

    phase1_cost = np.concatenate([np.zeros(n), np.ones(m)])
    active = np.ones(N, dtype=bool)
    status = tab.run(phase1_cost, active, tol, max_iter)
    if status == "iteration_limit":
        return LPResult(status, None, None, tab.iterations)

    infeas = float(np.sum(tab.beta[tab.basis >= n]))
    scale = max(1.0, float(np.max(np.abs(b))) if m else 1.0)
    if infeas > tol * scale:
        # phase-one duals: columns n..N-1 of T are B^-1 in the sign-flipped rows
        y = phase1_cost[tab.basis] @ tab.T[:, n:]
        return LPResult("infeasible", None, None, tab.iterations,
                        farkas=y * sign, infeasibility=infeas)

    # drive zero-level artificials out of the basis where possible
    keep = np.ones(m, dtype=bool)
    for i in range(m):
        if tab.basis[i] < n:
            continue
        row = tab.T[i, :n]
        cand = np.flatnonzero((np.abs(row) > 1e-9) & ~np.isin(np.arange(n), tab.basis))
        if cand.size == 0:
            keep[i] = False  # redundant constraint
            continue
        j = int(cand[0])
        out = tab.basis[i]
        tab.T[i] /= tab.T[i, j]
        others = np.arange(m) != i
        tab.T[others] -= np.outer(tab.T[others, j], tab.T[i])
        tab.basis[i] = j
        tab.at_upper[out] = False
        # degenerate pivot: the entering value equals its bound position
        tab.beta[i] = width[j] if tab.at_upper[j] else 0.0
        tab.at_upper[j] = False
    if not keep.all():
        tab.A = tab.A[keep]
        tab.rhs = tab.rhs[keep]
        tab.basis = tab.basis[keep]
    tab.refactor()

    active = np.concatenate([np.ones(n, dtype=bool), np.zeros(m, dtype=bool)])
    cost = np.concatenate([c, np.zeros(m)])
    status = tab.run(cost, active, tol, max_iter)
    if status != "optimal":
        return LPResult(status, None, None, tab.iterations)

    x = np.where(tab.at_upper[:n], width, 0.0)
    for i, j in enumerate(tab.basis):
        if j < n:
            x[j] = tab.beta[i]
    x = np.clip(x, 0.0, width) + lo
    y = np.zeros(m)
    if tab.basis.size:
        B = A1[keep][:, tab.basis]
        y[keep] = np.linalg.solve(B.T, c[tab.basis]) * sign[keep]
    return LPResult("optimal", x, float(c @ x), tab.iterations, duals=y)
