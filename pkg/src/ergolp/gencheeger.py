"""Weighted (generalized) ratio of bulk to boundary integrals.

The objective maximizes the ratio of a weighted area integral of P over the
enclosed set to a weighted boundary integral of Q.  Along a positively
oriented parametrized boundary the numerator becomes the cycle average of
``P1(x) * u2`` where ``P1(x1, x2) = int_0^{x1} P(z, x2) dz``, so the pipeline
reduces to the plain ratio engine with a numerically integrated weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as expr_mod
from .curves import StationaryPoint, extract_curve
from .discretize import assemble, build_system, evaluate_integrand
from .geometry import ControlGrid
from .ratio import RatioProblem, face_support, solve_ratio


def adaptive_simpson(f, a, b, tol=1e-10, max_depth=40):
    """Adaptive Simpson quadrature of a scalar function on [a, b]."""

    def simpson(fa, fm, fb, a_, b_):
        return (b_ - a_) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a_, b_, fa, fm, fb, whole, eps, depth):
        m = 0.5 * (a_ + b_)
        lm, rm = 0.5 * (a_ + m), 0.5 * (m + b_)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, a_, m)
        right = simpson(fm, frm, fb, m, b_)
        if depth >= max_depth or abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return recurse(a_, m, fa, flm, fm, left, eps / 2.0, depth + 1) + recurse(
            m, b_, fm, frm, fb, right, eps / 2.0, depth + 1
        )

    if a == b:
        return 0.0
    fa, fb = f(a), f(b)
    fm = f(0.5 * (a + b))
    whole = simpson(fa, fm, fb, a, b)
    return recurse(a, b, fa, fm, fb, whole, tol, 0)


def antiderivative_p1(P, x, tol=1e-10):
    """``int_0^{x1} P(z, x2) dz`` by adaptive Simpson to absolute tolerance."""
    if isinstance(P, str):
        P = expr_mod.parse(P)
    x1, x2 = float(x[0]), float(x[1])

    def f(z):
        return float(evaluate_integrand(P, z, x2, 0.0, 0.0))

    return adaptive_simpson(f, 0.0, x1, tol=tol)


def p1_on_grid(P, system, tol=1e-10):
    """P1 at every cell center, integrating incrementally along grid rows."""
    if isinstance(P, str):
        P = expr_mod.parse(P)
    centers = system.grid.centers
    iy = system.grid.indices[:, 1]
    out = np.empty(len(centers))
    for row in np.unique(iy):
        sel = np.nonzero(iy == row)[0]
        sel = sel[np.argsort(centers[sel, 0])]
        x2 = centers[sel[0], 1]

        def f(z, x2=x2):
            return float(evaluate_integrand(P, z, x2, 0.0, 0.0))

        # march outward from 0 in each direction so segments stay short
        order = np.concatenate(
            [sel[centers[sel, 0] >= 0], sel[centers[sel, 0] < 0][::-1]]
        )
        prev_pos = (0.0, 0.0)
        prev_neg = (0.0, 0.0)
        for i in order:
            x1 = centers[i, 0]
            prev_x, prev_val = prev_pos if x1 >= 0 else prev_neg
            val = prev_val + adaptive_simpson(f, prev_x, x1, tol=tol)
            out[i] = val
            if x1 >= 0:
                prev_pos = (x1, val)
            else:
                prev_neg = (x1, val)
    return out


@dataclass
class GeneralizedCheegerResult:
    solution: object  # RatioSolution
    curve: object  # PeriodicCurve or StationaryPoint
    stationary_warning: bool
    mu_q: float


def solve_generalized(domain, P, Q, nx, ny, n_u, degree=8, q_override=False,
                      eta=1e-6, dinkelbach_tol=1e-9, p1_tol=1e-10, extract=True):
    """Maximize mu(P1(x) u2) / mu(Q) on the domain and extract the curve.

    ``P`` must be positive on the grid.  ``Q`` must be positive as well
    unless ``q_override`` is set (control-dependent Q with only its periodic
    integrals bounded below); the returned measure's mu(Q) is then checked
    against ``eta`` after the fact.
    """
    system = build_system(domain, nx, ny, ControlGrid(n_u))
    if isinstance(P, str):
        P = expr_mod.parse(P)
    if isinstance(Q, str):
        Q = expr_mod.parse(Q)
    p_vals = np.asarray(
        evaluate_integrand(
            P, system.grid.centers[:, 0], system.grid.centers[:, 1], 0.0, 0.0
        ),
        dtype=float,
    )
    p_vals = np.broadcast_to(p_vals, (system.grid.n_cells,))
    if np.any(p_vals <= 0):
        k = int(np.argmin(p_vals))
        x = system.grid.centers[k]
        raise ValueError(f"P must be positive; P({x[0]:g}, {x[1]:g}) = {p_vals[k]:g}")
    p1 = p1_on_grid(P, system, tol=p1_tol)
    p_matrix = p1[:, None] * system.controls[None, :, 1]
    mlp = assemble(
        system, p_matrix, Q, degree=degree, check_q_positive=not q_override
    )
    sol = solve_ratio(RatioProblem(lp=mlp, sense="maximize", dinkelbach_tol=dinkelbach_tol))
    mu_q = sol.measure.mu_q
    if q_override and mu_q <= eta:
        raise ValueError(f"mu(Q) = {mu_q:g} not bounded away from zero (eta {eta:g})")
    curve = None
    if extract:
        curve = extract_curve(face_support(mlp, sol, sense="maximize"))
    stationary = isinstance(curve, StationaryPoint)
    return GeneralizedCheegerResult(
        solution=sol, curve=curve, stationary_warning=stationary, mu_q=mu_q
    )


def plain_cheeger_lp(domain, nx, ny, n_u, degree=8):
    """Measure LP for the unweighted problem: maximize mu(x1 * u2), q = 1."""
    system = build_system(domain, nx, ny, ControlGrid(n_u))
    return assemble(system, "x1*u2", "1", degree=degree)


def solve_cheeger(domain, nx, ny, n_u, degree=8, dinkelbach_tol=1e-9, extract=True):
    """Plain area-to-perimeter ratio on the domain; returns result + curve."""
    mlp = plain_cheeger_lp(domain, nx, ny, n_u, degree=degree)
    sol = solve_ratio(RatioProblem(lp=mlp, sense="maximize", dinkelbach_tol=dinkelbach_tol))
    curve = None
    if extract:
        curve = extract_curve(face_support(mlp, sol, sense="maximize"))
    return GeneralizedCheegerResult(
        solution=sol,
        curve=curve,
        stationary_warning=isinstance(curve, StationaryPoint),
        mu_q=sol.measure.mu_q,
    )
