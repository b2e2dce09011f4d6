"""Fractional objectives over the measure polytope.

``solve_ratio`` minimizes or maximizes mu(p)/mu(q) by Dinkelbach iteration:
repeatedly minimize the linearized cost mu(p) - v mu(q) and update v to the
achieved ratio until the linearized optimum vanishes.  The measure polytope
is assembled once; every iteration reuses the same rows with a new cost and
a warm-started basis, so the loop typically needs only a handful of pivots
after the first solve.

``pinned_sweep`` handles objectives that are not quasi-concave in the
realized averages: it pins selected averages to lattice values with equality
rows, solves the ratio problem on each slice, and evaluates a user function
of the pinned values and the slice optimum.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import simplex
from .discretize import MeasureLP, OptimalMeasure, sample_integrand
from .simplex import InfeasibleError, NoConvergenceError, StandardLP


@dataclass
class RatioProblem:
    lp: MeasureLP
    sense: str = "maximize"
    dinkelbach_tol: float = 1e-9
    max_iters: int = 50

    def __post_init__(self):
        if self.sense not in ("minimize", "maximize"):
            raise ValueError("sense must be 'minimize' or 'maximize'")


@dataclass
class RatioSolution:
    value: float
    measure: OptimalMeasure
    iterations: list  # (t, v_t, r_t) in the user's sense convention
    active_constraints: list
    lp_iterations: int = 0
    basis: np.ndarray = None  # final simplex basis, for warm restarts
    duals: np.ndarray = None  # final dual values per row


def to_standard(mlp, extra_rows=()):
    """MeasureLP -> StandardLP: equality block, constraint rows, extra rows."""
    base = StandardLP(
        A=mlp.A_eq,
        b=mlp.b_eq,
        c=np.zeros(mlp.n_columns),
    )
    rows = [(row, sense, 0.0) for row, sense in mlp.constraint_rows]
    rows += list(extra_rows)
    if rows:
        return simplex.augment(base, rows)
    return base


def _dinkelbach(std, p_cols, q_cols, tol, max_iters, sign):
    """Minimize (sign*p)/q over the standard LP; returns (w, trace, iters).

    ``sign`` is +1 for minimization of p/q and -1 for maximization; the
    trace records (t, v_t, r_t) with v_t in the user's sense.
    """
    n = len(p_cols)
    n_total = std.shape[1]
    pad = np.zeros(n_total - n)
    p_int = np.concatenate([sign * p_cols, pad])
    q_full = np.concatenate([q_cols, pad])

    sol = simplex.solve(std, cost=np.zeros(n_total))
    if sol.status == "infeasible":
        raise InfeasibleError("constrained measure polytope is empty")
    total_iters = sol.iterations
    w = sol.x
    v = float(p_int @ w) / float(q_full @ w)
    basis = sol.basis

    trace = []
    prev_v = None
    for t in range(max_iters):
        sol = simplex.solve(std, cost=p_int - v * q_full, start_basis=basis)
        if sol.status != "optimal":
            raise NoConvergenceError(f"linearized LP returned {sol.status}")
        total_iters += sol.iterations
        r = sol.objective
        trace.append((t, sign * v, r))
        # standard Dinkelbach monotonicity: r_t <= 0 and v nonincreasing
        if r > 1e-7 * (1.0 + abs(v)):
            raise NoConvergenceError(
                f"Dinkelbach residual {r:g} positive at iteration {t}"
            )
        if prev_v is not None and v > prev_v + 1e-9 * (1.0 + abs(prev_v)):
            raise NoConvergenceError(
                f"Dinkelbach value increased from {prev_v:g} to {v:g}"
            )
        w = sol.x
        basis = sol.basis
        if abs(r) <= tol:
            return w[:n], trace, total_iters, basis, sol.duals
        prev_v = v
        v = float(p_int @ w) / float(q_full @ w)
    raise NoConvergenceError(
        f"Dinkelbach did not converge in {max_iters} iterations; trace {trace}"
    )


def solve_ratio(prob):
    """Optimize mu(p)/mu(q) subject to the assembled averaged constraints."""
    mlp = prob.lp
    std = to_standard(mlp)
    sign = 1.0 if prob.sense == "minimize" else -1.0
    w, trace, iters, basis, duals = _dinkelbach(
        std, mlp.objective_p, mlp.objective_q, prob.dinkelbach_tol, prob.max_iters, sign
    )
    measure = OptimalMeasure.from_weights(mlp, w)
    active = [
        k
        for k, (mu_c, (_, sense)) in enumerate(zip(measure.mu_constraints, mlp.constraint_rows))
        if (sense == "eq") or abs(mu_c) <= 1e-7
    ]
    value = measure.mu_p / measure.mu_q
    return RatioSolution(
        value=value,
        measure=measure,
        iterations=trace,
        active_constraints=active,
        lp_iterations=iters,
        basis=basis,
        duals=duals,
    )


@dataclass
class FaceSupport:
    """Uniform weights over the near-optimal (face) columns of a ratio solve.

    Not a feasible measure in general; it exists to feed curve extraction,
    which only needs per-cell conditional directions along the support band.
    Duck-types the fields extraction reads from OptimalMeasure.
    """

    system: object
    weights: np.ndarray
    support_threshold: float


def face_support(mlp, solution, sense="maximize", face_tol=1e-6):
    """Identify the optimal face's columns from the final reduced costs.

    A basic optimal measure has at most row-count atoms; the face usually
    carries the whole band of cells traversed by the optimal curve.  One
    pricing pass with the final duals marks every column whose reduced cost
    for the converged Dinkelbach objective is within ``face_tol`` of zero
    (relative to the cost scale).
    """
    sign = 1.0 if sense == "minimize" else -1.0
    v = solution.measure.mu_p / solution.measure.mu_q
    c = sign * (mlp.objective_p - v * mlp.objective_q)
    y = solution.duals
    n_eq = mlp.A_eq.shape[0]
    reduced = c - (y[:n_eq] @ mlp.A_eq)
    for k, (row, _) in enumerate(mlp.constraint_rows):
        reduced -= y[n_eq + k] * row
    scale = 1.0 + float(np.max(np.abs(c)))
    face = reduced <= face_tol * scale
    weights = np.where(face, 1.0, 0.0)
    total = weights.sum()
    if total == 0:
        weights = solution.measure.weights.copy()
        total = weights.sum()
    weights = weights / total
    return FaceSupport(
        system=mlp.system, weights=weights, support_threshold=0.5 / total
    )


@dataclass
class PinnedSweepResult:
    value: float
    point: tuple
    measure: OptimalMeasure
    evaluations: list = field(default_factory=list)  # (point, V, mu_p, mu_q)
    infeasible_points: list = field(default_factory=list)


def pin_range(mlp, pin, std=None):
    """Feasible range of mu(pin) over the constrained polytope (two LPs)."""
    std = to_standard(mlp) if std is None else std
    col = sample_integrand(pin, mlp.system)
    pad = np.zeros(std.shape[1] - len(col))
    full = np.concatenate([col, pad])
    lo = simplex.solve(std, cost=full)
    hi = simplex.solve(std, cost=-full)
    if lo.status == "infeasible" or hi.status == "infeasible":
        raise InfeasibleError("constrained measure polytope is empty")
    if lo.status != "optimal" or hi.status != "optimal":
        raise NoConvergenceError("pin range probe failed")
    return lo.objective, -hi.objective


def pinned_sweep(mlp, pins, V, lattice=None, sense="minimize", points_per_pin=41,
                 dinkelbach_tol=1e-9, max_iters=50):
    """Sweep equality pins mu(pin_k) = c_k over a lattice and optimize V.

    ``V(c, mu_p, mu_q)`` maps the pinned averages (a tuple) and the slice's
    ratio-optimal averages to the objective value.  On each lattice point the
    ratio mu(p)/mu(q) is optimized in the given sense with the pins added as
    equality rows; the lattice point optimizing V (same sense) wins, ties to
    the earliest point.  When ``lattice`` is None the feasible range of each
    pin is probed with two auxiliary LPs and split into ``points_per_pin``
    values.
    """
    if sense not in ("minimize", "maximize"):
        raise ValueError("sense must be 'minimize' or 'maximize'")
    pin_cols = [sample_integrand(g, mlp.system) for g in pins]
    base_std = to_standard(mlp)
    if lattice is None:
        lattice = []
        for g in pins:
            lo, hi = pin_range(mlp, g, base_std)
            lattice.append(np.linspace(lo, hi, points_per_pin))
    sign = 1.0 if sense == "minimize" else -1.0

    best = None
    evaluations = []
    infeasible = []
    if not pins:
        grid_iter = [()]
    else:
        grid_iter = itertools.product(*[np.asarray(v, dtype=float) for v in lattice])
    for point in grid_iter:
        extra = [(col, "eq", c) for col, c in zip(pin_cols, point)]
        std = to_standard(mlp, extra_rows=extra)
        try:
            w, _, _, _, _ = _dinkelbach(
                std, mlp.objective_p, mlp.objective_q, dinkelbach_tol, max_iters, sign
            )
        except InfeasibleError:
            infeasible.append(point)
            continue
        measure = OptimalMeasure.from_weights(mlp, w)
        value = float(V(point, measure.mu_p, measure.mu_q))
        evaluations.append((point, value, measure.mu_p, measure.mu_q))
        if best is None or sign * value < sign * best[0] - 1e-15:
            best = (value, point, measure)
    if best is None:
        raise InfeasibleError("every lattice point was infeasible")
    return PinnedSweepResult(
        value=best[0],
        point=best[1],
        measure=best[2],
        evaluations=evaluations,
        infeasible_points=infeasible,
    )
