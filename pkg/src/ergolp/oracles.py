"""Ground truth independent of the LP pipeline.

Convex-domain Cheeger constants come from the inner-parallel-body equation
|Omega_{-r}| = pi r^2, whose unique root r* equals the maximal
area-to-perimeter ratio; the Cheeger set itself is the inner body inflated
back by r* (straight edges joined by corner arcs).  The scalar benchmark
problems are embedded in the planar engine on a one-cell-high strip whose
sample points span [-1, 1] inclusive, and the double-well mass-constrained
minimizer has a closed-form two-atom answer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .discretize import DiscretizedSystem, assemble
from .geometry import (
    ConvexPolygon,
    Disk,
    Rectangle,
    SpatialGrid,
    UnsupportedDomainError,
    inner_parallel_area,
    inner_parallel_polygon,
)


@dataclass(frozen=True)
class CheegerOracle:
    domain: object
    r_star: float

    @property
    def v_star(self):
        return self.r_star

    @property
    def h_star(self):
        return 1.0 / self.r_star


def cheeger_constant(domain):
    """(r*, v*, h*) for a convex domain by bisection on |Omega_{-r}| - pi r^2.

    The offset function is strictly decreasing on (0, inradius], positive at
    0+ and negative at sqrt(area/pi), so the root is unique; bisection runs
    to 1e-12 in r.
    """
    if not getattr(domain, "is_convex", False):
        raise UnsupportedDomainError("Cheeger oracle needs a convex domain")
    area = domain.area()
    lo, hi = 0.0, math.sqrt(area / math.pi)

    def phi(r):
        return inner_parallel_area(domain, r) - math.pi * r * r

    if phi(hi) >= 0:
        raise ValueError("degenerate domain: no sign change for the offset equation")
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        if phi(mid) > 0:
            lo = mid
        else:
            hi = mid
    r_star = 0.5 * (lo + hi)
    oracle = CheegerOracle(domain=domain, r_star=r_star)
    return oracle.r_star, oracle.v_star, oracle.h_star


def cheeger_area_perimeter(domain, r_star=None):
    """Exact area and perimeter of the Cheeger set, via the Steiner formula."""
    if r_star is None:
        r_star, _, _ = cheeger_constant(domain)
    if isinstance(domain, Disk):
        return math.pi * domain.radius**2, 2 * math.pi * domain.radius
    poly = domain.as_polygon() if isinstance(domain, Rectangle) else domain
    inner = inner_parallel_polygon(poly, r_star)
    if len(inner) < 3:
        raise ValueError("inner body degenerate at r*")
    inner_poly = ConvexPolygon(inner)
    area = inner_poly.area() + inner_poly.perimeter() * r_star + math.pi * r_star**2
    per = inner_poly.perimeter() + 2 * math.pi * r_star
    return area, per


def cheeger_set_boundary(domain, n_samples=1024, r_star=None):
    """Positively oriented closed polyline of the Cheeger set boundary.

    Returns ``n_samples`` points, uniformly spaced in arc length; the closing
    edge back to the first point is implicit.
    """
    if r_star is None:
        r_star, _, _ = cheeger_constant(domain)
    if isinstance(domain, Disk):
        t = 2 * math.pi * np.arange(n_samples) / n_samples
        return domain.radius * np.column_stack([np.cos(t), np.sin(t)])
    poly = domain.as_polygon() if isinstance(domain, Rectangle) else domain
    inner = inner_parallel_polygon(poly, r_star)
    if len(inner) < 3:
        raise ValueError("inner body degenerate at r*")
    v = inner
    k = len(v)
    edges = np.roll(v, -1, axis=0) - v
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    # outward unit normal of each inner edge (interior is left of the edge)
    normals = np.column_stack([edges[:, 1], -edges[:, 0]]) / lengths[:, None]
    pts = []
    for i in range(k):
        nxt = (i + 1) % k
        pts.append(v[i] + r_star * normals[i])
        pts.append(v[nxt] + r_star * normals[i])
        a0 = math.atan2(normals[i][1], normals[i][0])
        a1 = math.atan2(normals[nxt][1], normals[nxt][0])
        sweep = (a1 - a0) % (2 * math.pi)
        arc_n = max(2, int(math.ceil(sweep / (2 * math.pi) * 4 * n_samples)))
        ang = a0 + sweep * np.arange(1, arc_n)[:, None] / arc_n
        pts.extend(v[nxt] + r_star * np.column_stack([np.cos(ang), np.sin(ang)]))
    dense = np.array([np.asarray(p).ravel() for p in pts])
    return _resample_closed(dense, n_samples)


def _resample_closed(points, n):
    seg = np.roll(points, -1, axis=0) - points
    ell = np.hypot(seg[:, 0], seg[:, 1])
    s = np.concatenate([[0.0], np.cumsum(ell)])
    total = s[-1]
    target = total * np.arange(n) / n
    x = np.interp(target, s, np.concatenate([points[:, 0], points[:1, 0]]))
    y = np.interp(target, s, np.concatenate([points[:, 1], points[:1, 1]]))
    return np.column_stack([x, y])


def double_well_oracle(mass):
    """Singular-limit answer for the mass-constrained double well (1-u^2)^2.

    The optimal long-run measure concentrates at the two wells: value 0,
    weight lambda = (1 - mass)/2 at -1 and 1 - lambda at +1.
    """
    if not -1 < mass < 1:
        raise ValueError("mass must lie strictly between -1 and 1")
    lam = (1.0 - mass) / 2.0
    return 0.0, lam, np.array([-1.0, 1.0])


# ---------------------------------------------------------------------------
# Scalar benchmark embedding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarProblem:
    """Scalar dynamics x' = u on [-1, 1] embedded as a one-cell-high strip.

    Samples are nx points spanning [-1, 1] inclusive (the strip's bounding
    box is padded by half a cell so the mid-cell convention lands samples
    exactly on the endpoints).  Controls are +e1, -e1, and the zero vector,
    whose mixtures realize every scalar control in [-1, 1].
    """

    nx: int
    system: DiscretizedSystem
    domain: Rectangle
    half_height: float


def scalar_problem(nx=41, include_zero_control=True):
    if nx < 3:
        raise ValueError("nx >= 3 required")
    h = 2.0 / (nx - 1)
    domain = Rectangle(width=2.0 + h, height=h)
    xs = np.linspace(-1.0, 1.0, nx)
    centers = np.column_stack([xs, np.zeros(nx)])
    cell_rows = np.full((nx, 1), -1, dtype=int)
    cell_rows[:, 0] = np.arange(nx)
    grid = SpatialGrid(
        nx=nx,
        ny=1,
        bbox=((-1.0 - h / 2, 1.0 + h / 2), (-h / 2, h / 2)),
        cell_size=(h, h),
        centers=centers,
        indices=np.column_stack([np.arange(nx), np.zeros(nx, dtype=int)]),
        cell_rows=cell_rows,
    )
    controls = [(1.0, 0.0), (-1.0, 0.0)]
    if include_zero_control:
        controls.append((0.0, 0.0))
    controls = np.array(controls)
    dyn = np.broadcast_to(controls[None, :, :], (nx, len(controls), 2)).copy()
    system = DiscretizedSystem(grid=grid, controls=controls, dynamics=dyn, domain=domain)
    return ScalarProblem(nx=nx, system=system, domain=domain, half_height=h / 2)


def scalar_lp(p, q="1", constraints=(), nx=41, degree=8, include_zero_control=True):
    """Assemble the measure LP for a scalar benchmark on the strip embedding."""
    prob = scalar_problem(nx=nx, include_zero_control=include_zero_control)
    return assemble(prob.system, p, q, constraints=constraints, degree=degree)


def double_well_lp(mass, nx=41, degree=8):
    """Measure LP for the mass-constrained double-well energy.

    Objective integrand (1-x^2)^2 + u^2/2 with the equality constraint
    mu(x) = mass, encoded as mu(x - mass) = 0.
    """
    p = "(1 - x1^2)^2 + u1^2/2"
    constraint = (f"x1 - ({mass})", "eq")
    return scalar_lp(p, "1", constraints=[constraint], nx=nx, degree=degree)
