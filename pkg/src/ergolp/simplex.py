"""Dense two-phase revised simplex for flat LPs: few rows, very many columns.

Solves ``min c.w  s.t.  A w = b, w >= 0`` where the row count stays small
(tens) while the column count may reach the millions.  The basis and its
inverse are tiny dense matrices; each iteration is dominated by one pricing
pass ``y.A`` over all columns (full Dantzig pricing, ties to the lowest
index).  Inequality rows are handled by appending slack columns.

Degeneracy handling: after ``5 * (rows + cols)`` iterations without objective
improvement the pivot rule switches to Bland's.  Redundant rows keep their
phase-1 artificial basic at level zero; such artificials may leave the basis
but never re-enter, and the ratio test forces them out whenever a pivot
would push them positive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

PIVOT_TOL = 1e-10
REFRESH_EVERY = 50
RESIDUAL_REFRESH = 1e-9
ITERATION_CAP = 1_000_000


def _lexicographic_row(tab, tied, d):
    """Leaving row among ratio-test ties by the lexicographic rule.

    Compares the rows of [xb | B^-1 B_ref] scaled by 1/d; with the reference
    rebased to the phase-start basis the rows are lex-positive, which rules
    out cycling under any entering rule.  A unique minimum is reached after
    at most m columns; exact remaining ties fall back to the lowest basis
    column index for determinism.
    """
    if len(tied) == 1:
        return int(tied[0])
    cand = tied
    for k in range(tab.m):
        vals = tab.lex[cand, k] / d[cand]
        best = vals.min()
        cand = cand[vals <= best + 1e-12 * (1.0 + abs(best))]
        if len(cand) == 1:
            return int(cand[0])
    return int(cand[np.argmin(tab.basis[cand])])


class InfeasibleError(RuntimeError):
    pass


class UnboundedError(RuntimeError):
    pass


class NoConvergenceError(RuntimeError):
    def __init__(self, message, last_objective=None):
        super().__init__(message)
        self.last_objective = last_objective


@dataclass
class StandardLP:
    """``min c.w : A w = b, w >= 0`` with dense row-major ``A``."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    is_slack: np.ndarray = field(default=None)

    def __post_init__(self):
        self.A = np.ascontiguousarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        m, n = self.A.shape
        if self.b.shape != (m,) or self.c.shape != (n,):
            raise ValueError("inconsistent LP dimensions")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.b))):
            raise ValueError("LP data must be finite")
        if m > n:
            raise ValueError("more rows than columns; add slacks first")
        if self.is_slack is None:
            self.is_slack = np.zeros(n, dtype=bool)

    @property
    def shape(self):
        return self.A.shape


@dataclass
class LPSolution:
    """Basic optimal solution; ``basis`` entries >= n mark rows whose phase-1
    artificial stayed basic at zero (redundant rows)."""

    status: str
    x: np.ndarray = None
    objective: float = None
    basis: np.ndarray = None
    duals: np.ndarray = None
    iterations: int = 0


class _Tableau:
    """Revised-simplex state over a sign-normalized copy of the row data."""

    def __init__(self, lp, cost):
        self.lp = lp
        self.m, self.n = lp.A.shape
        # rows are flipped on the fly so that b >= 0; duals un-flip at the end
        self.sgn = np.where(lp.b < 0, -1.0, 1.0)
        self.b = self.sgn * lp.b
        self.cost = cost
        self.basis = None
        self.binv = None
        self.xb = None
        self.lex = None  # B^-1 * B_ref; lex-positive rows prevent cycling
        self.pivots_since_refresh = 0

    def column(self, j):
        if j < self.n:
            return self.sgn * self.lp.A[:, j]
        e = np.zeros(self.m)
        e[j - self.n] = 1.0
        return e

    def basis_cost(self, cost_full):
        return cost_full[self.basis]

    def set_basis(self, basis):
        self.basis = np.array(basis, dtype=int)
        self.refresh()
        self.reset_lex()

    def reset_lex(self):
        """Rebase the lexicographic reference on the current basis."""
        self.lex = np.eye(self.m)
        self.lex_ref = self.basis.copy()

    def refresh(self):
        B = np.column_stack([self.column(j) for j in self.basis])
        self.binv = np.linalg.inv(B)
        self.xb = self.binv @ self.b
        if self.lex is not None:
            R = np.column_stack([self.column(j) for j in self.lex_ref])
            self.lex = self.binv @ R
        self.pivots_since_refresh = 0

    def residual(self):
        B = np.column_stack([self.column(j) for j in self.basis])
        return float(np.max(np.abs(B @ self.xb - self.b)))

    def pivot(self, entering, row, direction, theta):
        self.xb = self.xb - theta * direction
        self.xb[row] = theta
        pivrow = self.binv[row] / direction[row]
        self.binv -= np.outer(direction, pivrow)
        self.binv[row] = pivrow
        lexrow = self.lex[row] / direction[row]
        self.lex -= np.outer(direction, lexrow)
        self.lex[row] = lexrow
        self.basis[row] = entering
        self.pivots_since_refresh += 1
        if self.pivots_since_refresh >= REFRESH_EVERY:
            self.refresh()
        elif self.pivots_since_refresh % 10 == 0 and self.residual() > RESIDUAL_REFRESH:
            self.refresh()


def _run_phase(tab, cost_full, iteration_budget, pin_artificials=False):
    """Iterate to optimality for the given cost; returns iterations used.

    Only original columns are priced, so phase-1 artificials can leave the
    basis but never re-enter it.  With ``pin_artificials`` (phase 2) any
    basic artificial sits at zero for a redundant row; the ratio test then
    kicks it out at step zero whenever the pivot direction touches its row,
    keeping artificial values pinned.
    """
    m, n = tab.m, tab.n
    dj_tol = 1e-9 * (1.0 + float(np.max(np.abs(cost_full))))
    stall_limit = 5 * (m + n)
    stalled = 0
    use_bland = False
    iters = 0
    cost_cols = cost_full[: tab.n]
    reduced = np.empty(tab.n)
    while True:
        if iters >= iteration_budget:
            obj = float(tab.basis_cost(cost_full) @ tab.xb)
            raise NoConvergenceError(
                f"simplex iteration cap exceeded (objective {obj})", last_objective=obj
            )
        y = tab.basis_cost(cost_full) @ tab.binv
        np.matmul(tab.sgn * y, tab.lp.A, out=reduced)
        np.subtract(cost_cols, reduced, out=reduced)
        if use_bland:
            eligible = np.nonzero(reduced < -dj_tol)[0]
            if len(eligible) == 0:
                return iters
            entering = int(eligible[0])
        else:
            entering = int(np.argmin(reduced))
            if reduced[entering] >= -dj_tol:
                return iters
        d = tab.binv @ tab.column(entering)
        pinned_neg = None
        if pin_artificials:
            # basic artificials sit at zero; a pivot touching their row with
            # d < 0 would push them positive, so they leave at step zero
            hits = np.nonzero((tab.basis >= tab.n) & (d < -PIVOT_TOL))[0]
            if len(hits):
                pinned_neg = int(hits[np.argmin(tab.basis[hits])])
        if pinned_neg is not None:
            row, theta = pinned_neg, 0.0
        else:
            ratios = np.full(m, np.inf)
            positive = d > PIVOT_TOL
            ratios[positive] = tab.xb[positive] / d[positive]
            theta = float(np.min(ratios))
            if not np.isfinite(theta):
                raise UnboundedError("improving direction with no blocking row")
            tied = np.nonzero(ratios <= theta + 1e-12 * (1.0 + abs(theta)))[0]
            row = _lexicographic_row(tab, tied, d)
            theta = max(theta, 0.0)
        obj_before = float(tab.basis_cost(cost_full) @ tab.xb)
        tab.pivot(entering, row, d, theta)
        if pinned_neg is not None:
            # pivoting on a negative entry breaks lex positivity; rebase
            tab.reset_lex()
        iters += 1
        obj_after = float(tab.basis_cost(cost_full) @ tab.xb)
        if obj_after < obj_before - 1e-12 * (1.0 + abs(obj_before)):
            stalled = 0
            best_obj = obj_after
        else:
            stalled += 1
            if stalled > stall_limit:
                use_bland = True


def solve(lp, cost=None, start_basis=None):
    """Two-phase revised simplex.

    ``cost`` overrides ``lp.c`` (the row data is shared, so repeated solves
    with new costs are cheap).  ``start_basis`` warm-starts phase 2 from a
    previously returned basis when it is still primal feasible.
    """
    m, n = lp.shape
    cost = lp.c if cost is None else np.asarray(cost, dtype=float)
    tab = _Tableau(lp, cost)
    iterations = 0

    warm = False
    if start_basis is not None and len(start_basis) == m:
        start_basis = np.asarray(start_basis, dtype=int)
        if np.all((start_basis >= 0) & (start_basis < n + m)):
            try:
                tab.set_basis(start_basis)
                warm = bool(np.all(tab.xb >= -1e-9))
            except np.linalg.LinAlgError:
                warm = False
    if not warm:
        tab.set_basis(np.arange(n, n + m))
        phase1_cost = np.concatenate([np.zeros(n), np.ones(m)])
        iterations += _run_phase(tab, phase1_cost, ITERATION_CAP)
        phase1_obj = float(tab.basis_cost(phase1_cost) @ tab.xb)
        if phase1_obj > 1e-8 * (1.0 + float(np.max(np.abs(lp.b)))):
            return LPSolution(status="infeasible", iterations=iterations)

    full_cost = np.concatenate([cost, np.zeros(m)])
    tab.reset_lex()
    try:
        iterations += _run_phase(
            tab, full_cost, ITERATION_CAP - iterations, pin_artificials=True
        )
    except UnboundedError:
        return LPSolution(status="unbounded", iterations=iterations)

    tab.refresh()
    x = np.zeros(n)
    keep = tab.basis < n
    x[tab.basis[keep]] = tab.xb[keep]
    np.maximum(x, 0.0, out=x)
    y = tab.sgn * (tab.basis_cost(full_cost) @ tab.binv)
    return LPSolution(
        status="optimal",
        x=x,
        objective=float(cost @ x),
        basis=tab.basis.copy(),
        duals=y,
        iterations=iterations,
    )


def augment(lp, extra_rows):
    """Append extra ``(row, sense, rhs)`` constraints; '<=' rows get slacks.

    ``sense`` is ``"le"`` or ``"eq"``.  Returns a new StandardLP whose first
    columns coincide with ``lp``'s.
    """
    rows = [np.asarray(r, dtype=float) for r, _, _ in extra_rows]
    senses = [s for _, s, _ in extra_rows]
    rhs = [float(v) for _, _, v in extra_rows]
    if any(s not in ("le", "eq") for s in senses):
        raise ValueError("sense must be 'le' or 'eq'")
    m, n = lp.shape
    k = len(rows)
    n_slack = sum(1 for s in senses if s == "le")
    A = np.zeros((m + k, n + n_slack))
    A[:m, :n] = lp.A
    b = np.concatenate([lp.b, rhs])
    s_col = n
    for i, (row, sense) in enumerate(zip(rows, senses)):
        A[m + i, :n] = row
        if sense == "le":
            A[m + i, s_col] = 1.0
            s_col += 1
    c = np.concatenate([lp.c, np.zeros(n_slack)])
    is_slack = np.concatenate([lp.is_slack, np.ones(n_slack, dtype=bool)])
    return StandardLP(A=A, b=b, c=c, is_slack=is_slack)


def solve_with_extra_rows(lp, extra_rows, cost=None, start_basis=None):
    """Solve ``lp`` with appended constraint rows (see :func:`augment`)."""
    aug = augment(lp, extra_rows)
    if cost is not None:
        n_slack = aug.shape[1] - lp.shape[1]
        cost = np.concatenate([np.asarray(cost, dtype=float), np.zeros(n_slack)])
    return solve(aug, cost=cost, start_basis=start_basis)
