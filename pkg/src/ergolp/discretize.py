"""Finite LP over discretized occupational measures.

A probability weight is attached to every (cell, control) pair.  Feasible
weights satisfy one normalization row and one stationarity row per monomial
test function: the time average of d/dt phi(x(t)) along any trajectory that
keeps returning is zero, so mu(grad phi . f) = 0 must hold for the limiting
measure.  Test monomials are taken in bounding-box-normalized coordinates
(the box is mapped onto [-1, 1]^2) to keep high-degree rows well scaled.

Column order is spatial row-major, then control index: column = cell * n_u + j.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as expr_mod
from .geometry import ControlGrid, SpatialGrid, build_spatial_grid


def monomial_exponents(degree):
    """Exponent pairs (a, b) with 1 <= a + b <= degree, in fixed order."""
    out = []
    for d in range(1, degree + 1):
        for a in range(d, -1, -1):
            out.append((a, d - a))
    return out


@dataclass(frozen=True)
class DiscretizedSystem:
    """Grid, control set, and dynamics samples f(x_i, u_j)."""

    grid: SpatialGrid
    controls: np.ndarray  # (n_u, 2)
    dynamics: np.ndarray  # (n_cells, n_u, 2)
    domain: object = None

    def __post_init__(self):
        object.__setattr__(self, "controls", np.asarray(self.controls, dtype=float))
        object.__setattr__(self, "dynamics", np.asarray(self.dynamics, dtype=float))
        n_c, n_u = self.grid.n_cells, len(self.controls)
        if self.dynamics.shape != (n_c, n_u, 2):
            raise ValueError("dynamics must have shape (n_cells, n_u, 2)")
        if not np.all(np.isfinite(self.dynamics)):
            raise ValueError("dynamics samples must be finite")

    @property
    def n_u(self):
        return len(self.controls)

    @property
    def n_columns(self):
        return self.grid.n_cells * self.n_u


def build_system(domain, nx, ny, controls, dynamics=None):
    """Discretize a domain with the given controls; default dynamics f(x,u)=u.

    ``controls`` may be a ControlGrid or an (n_u, 2) array of control
    vectors.  ``dynamics``, if given, is a callable (x1, x2, u1, u2) -> (f1, f2)
    accepting broadcast arrays.
    """
    grid = build_spatial_grid(domain, nx, ny)
    u = controls.directions if isinstance(controls, ControlGrid) else np.asarray(controls, float)
    n_c, n_u = grid.n_cells, len(u)
    if dynamics is None:
        dyn = np.broadcast_to(u[None, :, :], (n_c, n_u, 2)).copy()
    else:
        x1 = grid.centers[:, 0][:, None]
        x2 = grid.centers[:, 1][:, None]
        f1, f2 = dynamics(x1, x2, u[None, :, 0], u[None, :, 1])
        dyn = np.stack(
            [np.broadcast_to(f1, (n_c, n_u)), np.broadcast_to(f2, (n_c, n_u))], axis=-1
        )
    return DiscretizedSystem(grid=grid, controls=u, dynamics=dyn, domain=domain)


def evaluate_integrand(g, x1, x2, u1, u2):
    """Evaluate an integrand given as expression tree, string, or callable."""
    if isinstance(g, str):
        g = expr_mod.parse(g)
    if isinstance(g, (expr_mod.Const, expr_mod.Var, expr_mod.Neg, expr_mod.BinOp, expr_mod.Call)):
        return expr_mod.evaluate(g, (x1, x2), (u1, u2))
    if callable(g):
        return g(x1, x2, u1, u2)
    raise TypeError(f"integrand must be an expression or callable, got {type(g)!r}")


def sample_integrand(g, system):
    """Evaluate an integrand on all (cell, control) pairs; returns (n_columns,).

    ``g`` may be an expression tree, an expression string, a callable
    ``g(x1, x2, u1, u2)`` over broadcastable arrays, or a precomputed array
    broadcastable to (n_cells, n_u).
    """
    if isinstance(g, np.ndarray):
        g = np.asarray(g, dtype=float)
        if g.shape == (system.n_columns,):
            return g.copy()
        return np.broadcast_to(g, (system.grid.n_cells, system.n_u)).ravel().copy()
    x1 = system.grid.centers[:, 0][:, None]
    x2 = system.grid.centers[:, 1][:, None]
    u1 = system.controls[None, :, 0]
    u2 = system.controls[None, :, 1]
    vals = evaluate_integrand(g, x1, x2, u1, u2)
    out = np.broadcast_to(np.asarray(vals, dtype=float), (system.grid.n_cells, system.n_u))
    return out.ravel().copy()


@dataclass
class MeasureLP:
    """Equality block (normalization + stationarity) plus constraint rows."""

    system: DiscretizedSystem
    A_eq: np.ndarray
    b_eq: np.ndarray
    constraint_rows: list  # (row_values, sense) with sense 'le' or 'eq', rhs 0
    objective_p: np.ndarray
    objective_q: np.ndarray
    test_degree: int
    p_source: object = None
    q_source: object = None
    constraint_sources: list = field(default_factory=list)

    @property
    def n_rows(self):
        return self.A_eq.shape[0] + len(self.constraint_rows)

    @property
    def n_columns(self):
        return self.A_eq.shape[1]


def stationarity_matrix(system, degree):
    """Rows grad phi(xhat) . fhat for monomials phi of total degree 1..degree."""
    grid = system.grid
    (x0, x1), (y0, y1) = grid.bbox
    sx, sy = 2.0 / (x1 - x0), 2.0 / (y1 - y0)
    xh = (grid.centers[:, 0] - 0.5 * (x0 + x1)) * sx
    yh = (grid.centers[:, 1] - 0.5 * (y0 + y1)) * sy
    f1h = system.dynamics[:, :, 0] * sx
    f2h = system.dynamics[:, :, 1] * sy
    exps = monomial_exponents(degree)
    A = np.empty((len(exps), system.n_columns))
    for r, (a, b) in enumerate(exps):
        t1 = a * xh ** max(a - 1, 0) * yh**b
        t2 = b * xh**a * yh ** max(b - 1, 0)
        A[r] = (t1[:, None] * f1h + t2[:, None] * f2h).ravel()
    return A


def assemble(system, p, q, constraints=(), degree=8, check_q_positive=True):
    """Build the measure LP for objective ratio p/q and averaged constraints.

    ``constraints`` is a sequence of (integrand, sense) with sense 'le' or
    'eq', meaning mu(C) <= 0 or mu(C) = 0.  ``q`` must be strictly positive
    at every sample unless the caller opts out (the weaker hypothesis that
    periodic integrals of q stay positive, verified after the solve).
    """
    if degree < 1:
        raise ValueError("test degree must be >= 1")
    p_col = sample_integrand(p, system)
    q_col = sample_integrand(q, system)
    j = int(np.argmin(q_col))
    if check_q_positive and q_col[j] <= 0:
        cell, ctrl = divmod(j, system.n_u)
        x = system.grid.centers[cell]
        u = system.controls[ctrl]
        raise ValueError(
            f"q must be strictly positive on the grid; "
            f"q(x=({x[0]:g}, {x[1]:g}), u=({u[0]:g}, {u[1]:g})) = {q_col[j]:g}"
        )
    n_col = system.n_columns
    stat = stationarity_matrix(system, degree)
    A_eq = np.empty((1 + len(stat), n_col))
    A_eq[0] = 1.0
    A_eq[1:] = stat
    b_eq = np.zeros(1 + len(stat))
    b_eq[0] = 1.0
    rows = []
    sources = []
    for g, sense in constraints:
        if sense not in ("le", "eq"):
            raise ValueError("constraint sense must be 'le' or 'eq'")
        rows.append((sample_integrand(g, system), sense))
        sources.append(g)
    return MeasureLP(
        system=system,
        A_eq=A_eq,
        b_eq=b_eq,
        constraint_rows=rows,
        objective_p=p_col,
        objective_q=q_col,
        test_degree=degree,
        p_source=p,
        q_source=q,
        constraint_sources=sources,
    )


@dataclass
class OptimalMeasure:
    """Nonnegative column weights summing to one, with realized averages."""

    system: DiscretizedSystem
    weights: np.ndarray
    mu_p: float
    mu_q: float
    mu_constraints: np.ndarray
    support: np.ndarray
    support_threshold: float

    @classmethod
    def from_weights(cls, lp, weights, support_threshold=None):
        w = np.asarray(weights, dtype=float)
        if np.any(w < -1e-10):
            raise ValueError("measure weights must be nonnegative")
        w = np.maximum(w, 0.0)
        total = w.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"measure weights sum to {total}, expected 1")
        resid = float(np.max(np.abs(lp.A_eq @ w - lp.b_eq)))
        if resid > 1e-6:
            raise ValueError(f"stationarity residual {resid:g} too large")
        if support_threshold is None:
            support_threshold = 1e-7 * float(w.max())
        support = np.nonzero(w > support_threshold)[0]
        mu_c = np.array([row @ w for row, _ in lp.constraint_rows])
        return cls(
            system=lp.system,
            weights=w,
            mu_p=float(lp.objective_p @ w),
            mu_q=float(lp.objective_q @ w),
            mu_constraints=mu_c,
            support=support,
            support_threshold=support_threshold,
        )

    def average(self, g):
        """Discrete analogue of the long-run average of ``g``: sum w * g."""
        return float(sample_integrand(g, self.system) @ self.weights)

    def cell_masses(self):
        """Total weight per spatial cell, shape (n_cells,)."""
        return self.weights.reshape(self.system.grid.n_cells, self.system.n_u).sum(axis=1)

    def control_barycenters(self):
        """Relaxed control per occupied cell: ubar_i = sum_j u_j w_ij / mass_i.

        Returns (occupied_cell_indices, ubar) where ubar has one row per
        occupied cell; |ubar| <= 1 since controls lie in the unit disk.
        """
        w = self.weights.reshape(self.system.grid.n_cells, self.system.n_u)
        mass = w.sum(axis=1)
        occupied = np.nonzero(mass > self.support_threshold)[0]
        ubar = (w[occupied] @ self.system.controls) / mass[occupied, None]
        return occupied, ubar

    def cell_dynamics(self):
        """Conditional average of the dynamics samples per occupied cell."""
        w = self.weights.reshape(self.system.grid.n_cells, self.system.n_u)
        mass = w.sum(axis=1)
        occupied = np.nonzero(mass > self.support_threshold)[0]
        f = np.einsum("cj,cjk->ck", w[occupied], self.system.dynamics[occupied])
        return occupied, f / mass[occupied, None]


def realization_point(measure, g):
    """mu(g) for the given measure; the discrete (1/T) integral of g."""
    return measure.average(g)
