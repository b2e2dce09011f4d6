"""Planar constraint sets, control direction grids, and spatial discretization.

Four domain shapes are supported: axis-aligned rectangles and disks centered
at the origin, convex polygons with counterclockwise vertices, and implicit
regions ``g(x1, x2) <= 0`` with a user-supplied finite bounding box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as expr_mod

_EPS = 1e-12


class UnsupportedDomainError(ValueError):
    pass


class EmptyGridError(ValueError):
    pass


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned ``width x height`` rectangle centered at the origin."""

    width: float
    height: float

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("rectangle dimensions must be strictly positive")

    is_convex = True

    def contains(self, x1, x2):
        return (np.abs(x1) <= self.width / 2 + _EPS) & (np.abs(x2) <= self.height / 2 + _EPS)

    def bounding_box(self):
        return (-self.width / 2, self.width / 2), (-self.height / 2, self.height / 2)

    def area(self):
        return self.width * self.height

    def diameter(self):
        return math.hypot(self.width, self.height)

    def project(self, x):
        w, h = self.width / 2, self.height / 2
        return np.array([min(max(x[0], -w), w), min(max(x[1], -h), h)])

    def as_polygon(self):
        w, h = self.width / 2, self.height / 2
        return ConvexPolygon(np.array([[-w, -h], [w, -h], [w, h], [-w, h]]))


@dataclass(frozen=True)
class Disk:
    """Disk of the given radius centered at the origin."""

    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("disk radius must be strictly positive")

    is_convex = True

    def contains(self, x1, x2):
        return np.hypot(x1, x2) <= self.radius + _EPS

    def bounding_box(self):
        r = self.radius
        return (-r, r), (-r, r)

    def area(self):
        return math.pi * self.radius**2

    def diameter(self):
        return 2 * self.radius

    def project(self, x):
        r = math.hypot(x[0], x[1])
        if r <= self.radius:
            return np.asarray(x, dtype=float)
        return np.asarray(x, dtype=float) * (self.radius / r)


@dataclass(frozen=True)
class ConvexPolygon:
    """Convex polygon; vertices counterclockwise, no repeats."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        object.__setattr__(self, "vertices", v)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise ValueError("polygon needs at least 3 planar vertices")
        e = np.roll(v, -1, axis=0) - v
        if np.any(np.hypot(e[:, 0], e[:, 1]) <= _EPS):
            raise ValueError("repeated consecutive vertices")
        cross = e[:, 0] * np.roll(e, -1, axis=0)[:, 1] - e[:, 1] * np.roll(e, -1, axis=0)[:, 0]
        scale = float(np.max(np.abs(v))) + 1.0
        if np.any(cross < -1e-9 * scale**2) or not np.any(cross > 1e-9 * scale**2):
            raise ValueError("vertices must be counterclockwise and convex")

    is_convex = True

    def _edges(self):
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        t = w - v
        length = np.hypot(t[:, 0], t[:, 1])
        # interior lies to the left of each directed edge
        normals = np.column_stack([-t[:, 1], t[:, 0]]) / length[:, None]
        return v, normals

    def contains(self, x1, x2):
        v, normals = self._edges()
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        d = (
            normals[:, 0] * (x1[..., None] - v[:, 0])
            + normals[:, 1] * (x2[..., None] - v[:, 1])
        )
        out = np.all(d >= -1e-9, axis=-1)
        return out if out.shape else bool(out)

    def bounding_box(self):
        v = self.vertices
        return (float(v[:, 0].min()), float(v[:, 0].max())), (
            float(v[:, 1].min()),
            float(v[:, 1].max()),
        )

    def area(self):
        return _shoelace(self.vertices)

    def perimeter(self):
        e = np.roll(self.vertices, -1, axis=0) - self.vertices
        return float(np.hypot(e[:, 0], e[:, 1]).sum())

    def diameter(self):
        v = self.vertices
        d = v[:, None, :] - v[None, :, :]
        return float(np.hypot(d[..., 0], d[..., 1]).max())

    def project(self, x):
        x = np.asarray(x, dtype=float)
        if self.contains(x[0], x[1]):
            return x
        v = self.vertices
        w = np.roll(v, -1, axis=0)
        e = w - v
        t = np.clip(
            ((x - v) * e).sum(axis=1) / np.maximum((e * e).sum(axis=1), 1e-300), 0, 1
        )
        candidates = v + t[:, None] * e
        d = np.hypot(candidates[:, 0] - x[0], candidates[:, 1] - x[1])
        return candidates[int(np.argmin(d))]


@dataclass(frozen=True)
class ImplicitDomain:
    """Closed region ``g(x1, x2) <= 0`` inside an explicit bounding box."""

    expression: object
    bbox: tuple

    def __post_init__(self):
        if isinstance(self.expression, str):
            object.__setattr__(self, "expression", expr_mod.parse(self.expression))
        (x0, x1), (y0, y1) = self.bbox
        if not all(map(math.isfinite, (x0, x1, y0, y1))) or x1 <= x0 or y1 <= y0:
            raise ValueError("implicit domain needs a finite, nonempty bounding box")

    is_convex = False

    def contains(self, x1, x2):
        try:
            g = expr_mod.evaluate(self.expression, (np.asarray(x1, float), np.asarray(x2, float)))
        except expr_mod.EvalError as err:
            raise expr_mod.EvalError(
                f"implicit domain evaluation failed at x=({x1}, {x2}): {err}",
                self.expression,
            ) from err
        return g <= 1e-12

    def bounding_box(self):
        return self.bbox

    def diameter(self):
        (x0, x1), (y0, y1) = self.bbox
        return math.hypot(x1 - x0, y1 - y0)


def _shoelace(v):
    x, y = v[:, 0], v[:, 1]
    return float(0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def clip_halfplane(points, normal, offset):
    """Keep the part of a convex polygon with ``normal . x >= offset``."""
    if len(points) == 0:
        return points
    out = []
    k = len(points)
    d = points @ normal - offset
    for i in range(k):
        a, b = points[i], points[(i + 1) % k]
        da, db = d[i], d[(i + 1) % k]
        if da >= -_EPS:
            out.append(a)
        if (da > _EPS and db < -_EPS) or (da < -_EPS and db > _EPS):
            t = da / (da - db)
            out.append(a + t * (b - a))
    return np.array(out) if out else np.empty((0, 2))


def inner_parallel_polygon(polygon, r):
    """Vertices of ``{x : dist(x, boundary) >= r}`` for a convex polygon.

    Returned polygon may be empty (fewer than 3 vertices survive the clip).
    """
    pts = polygon.vertices
    v, normals = polygon._edges()
    for i in range(len(v)):
        pts = clip_halfplane(pts, normals[i], normals[i] @ v[i] + r)
        if len(pts) < 3:
            return np.empty((0, 2))
    return pts


def inner_parallel_area(domain, r):
    """Area of the inner parallel body at offset ``r`` (0 when empty)."""
    if r < 0:
        raise ValueError("offset must be nonnegative")
    if isinstance(domain, Rectangle):
        return max(0.0, domain.width - 2 * r) * max(0.0, domain.height - 2 * r)
    if isinstance(domain, Disk):
        return math.pi * max(0.0, domain.radius - r) ** 2
    if isinstance(domain, ConvexPolygon):
        pts = inner_parallel_polygon(domain, r)
        return _shoelace(pts) if len(pts) >= 3 else 0.0
    raise UnsupportedDomainError("inner parallel area requires a convex domain")


@dataclass(frozen=True)
class ControlGrid:
    """``n_u`` unit direction vectors, equally spaced on the circle."""

    n_u: int
    directions: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.directions is None:
            theta = 2 * math.pi * np.arange(self.n_u) / self.n_u
            object.__setattr__(
                self, "directions", np.column_stack([np.cos(theta), np.sin(theta)])
            )
        d = np.asarray(self.directions, dtype=float)
        if len(d) != self.n_u or self.n_u < 1:
            raise ValueError("direction count mismatch")
        if np.any(np.abs(np.hypot(d[:, 0], d[:, 1]) - 1.0) > 1e-12):
            raise ValueError("directions must be unit vectors")
        if len(np.unique(np.round(d, 12), axis=0)) != self.n_u:
            raise ValueError("directions must be pairwise distinct")


@dataclass(frozen=True)
class SpatialGrid:
    """Cell centers of a uniform bounding-box grid that lie inside the domain.

    ``cell_rows`` maps lattice position (ix, iy) to the row in ``centers``,
    with -1 for cells whose center falls outside the domain.
    """

    nx: int
    ny: int
    bbox: tuple
    cell_size: tuple
    centers: np.ndarray
    indices: np.ndarray
    cell_rows: np.ndarray

    @property
    def n_cells(self):
        return len(self.centers)


def build_spatial_grid(domain, nx, ny):
    """Uniform ``nx x ny`` cell grid over the bounding box, filtered by membership.

    Cell centers follow the mid-cell convention: center (i, j) sits at
    ``bbox_min + (i + 1/2) * h``.
    """
    if nx < 2 or ny < 2:
        raise ValueError("grid needs nx, ny >= 2")
    (x0, x1), (y0, y1) = domain.bounding_box()
    hx, hy = (x1 - x0) / nx, (y1 - y0) / ny
    xs = x0 + hx * (np.arange(nx) + 0.5)
    ys = y0 + hy * (np.arange(ny) + 0.5)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    inside = np.asarray(domain.contains(X.ravel(), Y.ravel())).reshape(nx, ny)
    ii, jj = np.nonzero(inside)
    if len(ii) == 0:
        raise EmptyGridError("no cell centers inside the domain")
    centers = np.column_stack([X[ii, jj], Y[ii, jj]])
    cell_rows = np.full((nx, ny), -1, dtype=int)
    cell_rows[ii, jj] = np.arange(len(ii))
    return SpatialGrid(
        nx=nx,
        ny=ny,
        bbox=((x0, x1), (y0, y1)),
        cell_size=(hx, hy),
        centers=centers,
        indices=np.column_stack([ii, jj]),
        cell_rows=cell_rows,
    )
