"""Periodic-curve extraction from optimal measures, and alternating schedules.

Extraction rebuilds the relaxed vector field from the measure's conditional
control barycenters (bilinear between occupied cells, nearest-occupied
fallback where corners are missing; a basic LP measure has at most
row-count atoms, so the fallback carries most of the tracing), integrates it
with classical RK4, and declares closure when the trajectory returns to
within one cell of its start.

Schedules realize a convex combination of stationary/periodic pieces by
cyclically dwelling on each piece with linearly growing dwell times and
steering between pieces in bounded time.  Verification is segment-analytic:
dwell integrals come from precomputed per-period profiles and steering
integrals from cached path quadrature, so horizons of many thousands of
rounds cost microseconds per round.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .discretize import evaluate_integrand


class ExtractionError(RuntimeError):
    pass


class NonClosingError(ExtractionError):
    pass


class SteeringError(RuntimeError):
    pass


class ConstructionError(ValueError):
    pass


@dataclass
class StationaryPoint:
    """Fixed point of the relaxed dynamics; schedules give it period 1."""

    point: np.ndarray
    control: np.ndarray

    @property
    def period(self):
        return 1.0

    @property
    def start(self):
        return self.point

    def average(self, g):
        return float(
            evaluate_integrand(
                g, self.point[0], self.point[1], self.control[0], self.control[1]
            )
        )


@dataclass
class PeriodicCurve:
    """Closed trajectory sampled at uniform time step ``dt`` (open list: the
    final sample precedes the return to ``samples[0]``)."""

    samples: np.ndarray
    controls: np.ndarray
    dt: float
    closure_error: float = 0.0

    @property
    def period(self):
        return len(self.samples) * self.dt

    @property
    def start(self):
        return self.samples[0]

    def values(self, g):
        return np.asarray(
            evaluate_integrand(
                g,
                self.samples[:, 0],
                self.samples[:, 1],
                self.controls[:, 0],
                self.controls[:, 1],
            ),
            dtype=float,
        )

    def average(self, g):
        """Cycle average (1/T) closed-integral of g, periodic trapezoid rule."""
        return float(np.mean(self.values(g)))

    def shifted(self, offset):
        """Rotate the time origin by ``offset`` samples."""
        return PeriodicCurve(
            samples=np.roll(self.samples, -offset, axis=0),
            controls=np.roll(self.controls, -offset, axis=0),
            dt=self.dt,
            closure_error=self.closure_error,
        )


class RelaxedField:
    """Conditional-average dynamics of an optimal measure as a vector field.

    Bilinear interpolation applies wherever all four surrounding cells are
    occupied (dense support bands); elsewhere the field blends the four
    nearest occupied cells by inverse squared distance.  A basic LP measure
    has at most row-count atoms, so the blended regime carries most of the
    tracing; single-nearest fallback would wedge boundary-hugging flows.
    """

    def __init__(self, measure):
        system = measure.system
        grid = system.grid
        self.grid = grid
        w = measure.weights.reshape(grid.n_cells, system.n_u)
        mass = w.sum(axis=1)
        occupied = np.nonzero(mass > measure.support_threshold)[0]
        if len(occupied) == 0:
            raise ExtractionError("measure support is empty")
        scale = mass[occupied, None]
        self.occupied = occupied
        self.occupied_centers = grid.centers[occupied]
        self.occupied_f = (
            np.einsum("cj,cjk->ck", w[occupied], system.dynamics[occupied]) / scale
        )
        self.occupied_ubar = (w[occupied] @ system.controls) / scale
        # lattice -> occupied-row lookup
        self.slot = np.full((grid.nx, grid.ny), -1, dtype=int)
        idx = grid.indices[occupied]
        self.slot[idx[:, 0], idx[:, 1]] = np.arange(len(occupied))
        self.masses = mass[occupied]

    def seed(self):
        """Center of the highest-mass occupied cell."""
        return self.occupied_centers[int(np.argmax(self.masses))].copy()

    def _blend_nearest(self, x, table):
        """Inverse-distance blend with forward-cone anisotropy.

        An atom's influence extends along its own drift direction (the curve
        runs that way), so the metric shrinks the along-drift component ahead
        of the atom and stays isotropic behind it.  Atoms with negligible
        drift count isotropically.
        """
        dx = x[0] - self.occupied_centers[:, 0]
        dy = x[1] - self.occupied_centers[:, 1]
        f = self.occupied_f
        speed = np.hypot(f[:, 0], f[:, 1])
        ok = speed > 0.5
        par = np.zeros_like(dx)
        par[ok] = (dx[ok] * f[ok, 0] + dy[ok] * f[ok, 1]) / speed[ok]
        ahead = par > 0
        perp2 = dx * dx + dy * dy - par * par
        d2 = np.where(ahead, perp2 + 0.1 * par * par, dx * dx + dy * dy)
        # mass scales influence: dwell time proportions shape the curve
        w = self.masses / (d2 + 1e-30) ** 2
        return (w @ table) / w.sum()

    def _gather(self, x, table):
        (x0, _), (y0, _) = self.grid.bbox
        hx, hy = self.grid.cell_size
        gx = (x[0] - x0) / hx - 0.5
        gy = (x[1] - y0) / hy - 0.5
        ix, iy = int(math.floor(gx)), int(math.floor(gy))
        tx, ty = gx - ix, gy - iy
        val = np.zeros(2)
        for di, dj, w in (
            (0, 0, (1 - tx) * (1 - ty)),
            (1, 0, tx * (1 - ty)),
            (0, 1, (1 - tx) * ty),
            (1, 1, tx * ty),
        ):
            ci, cj = ix + di, iy + dj
            if not (0 <= ci < self.grid.nx and 0 <= cj < self.grid.ny):
                return self._blend_nearest(x, table)
            s = self.slot[ci, cj]
            if s < 0:
                return self._blend_nearest(x, table)
            val += w * table[s]
        return val

    def __call__(self, x):
        return self._gather(x, self.occupied_f)

    def control(self, x):
        return self._gather(x, self.occupied_ubar)


def extract_curve(measure, close_tol=None, max_steps=1_000_000, stationary_tol=1e-6):
    """Trace the periodic curve or stationary point encoded by a measure.

    RK4 with dt = min(hx, hy)/4 from the highest-weight cell; closure is
    declared when the trajectory returns within ``close_tol`` (default one
    cell) of the start after at least 10 steps.
    """
    field_fn = RelaxedField(measure)
    grid = measure.system.grid
    hx, hy = grid.cell_size
    dt = min(hx, hy) / 4.0
    if close_tol is None:
        close_tol = max(hx, hy)
    x = field_fn.seed()
    if float(np.hypot(*field_fn(x))) < stationary_tol:
        return StationaryPoint(point=x, control=field_fn.control(x))
    domain_contains = _domain_membership(measure)
    exit_tol = max(hx, hy)
    pts = [x.copy()]
    ctl = [field_fn.control(x)]
    for step in range(1, max_steps + 1):
        k1 = field_fn(x)
        k2 = field_fn(x + 0.5 * dt * k1)
        k3 = field_fn(x + 0.5 * dt * k2)
        k4 = field_fn(x + dt * k3)
        x_new = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not domain_contains(x_new):
            # boundary-hugging flows may graze outside between support atoms;
            # project back (sliding along the boundary), fail on a real escape
            projected = _project_step(measure.system.domain, domain_contains, x, x_new)
            if float(np.hypot(*(x_new - projected))) > exit_tol:
                raise ExtractionError(
                    f"trajectory left the domain at ({x_new[0]:.6g}, {x_new[1]:.6g})"
                )
            x_new = projected
        x = x_new
        err = float(np.hypot(*(x - pts[0])))
        if step >= 10 and err <= close_tol:
            return PeriodicCurve(
                samples=np.array(pts),
                controls=np.array(ctl),
                dt=dt,
                closure_error=err,
            )
        pts.append(x.copy())
        ctl.append(field_fn.control(x))
    raise NonClosingError(f"no closure within {max_steps} steps")


def _clip_to_domain(contains, x_inside, x_outside, iters=40):
    """Last point on the segment [x_inside, x_outside] still in the domain."""
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if contains(x_inside + mid * (x_outside - x_inside)):
            lo = mid
        else:
            hi = mid
    return x_inside + lo * (x_outside - x_inside)


def _project_step(domain, contains, x_from, x_to):
    """Feasible endpoint for a step that exits: project, or clip and slide.

    Domains with an exact ``project`` use it directly.  Otherwise (implicit
    regions) the step is clipped to the boundary crossing and the leftover
    motion is replayed tangentially, using a finite-difference normal of the
    membership indicator.
    """
    if domain is not None and hasattr(domain, "project"):
        return np.asarray(domain.project(x_to), dtype=float)
    c = _clip_to_domain(contains, x_from, x_to)
    rest = x_to - c
    norm = float(np.hypot(*rest))
    if norm < 1e-15:
        return c
    n = _boundary_normal(contains, c, scale=max(norm, 1e-9))
    if n is not None:
        tangential = rest - max(float(rest @ n), 0.0) * n
        x_slid = c + tangential
        if contains(x_slid):
            return x_slid
        return _clip_to_domain(contains, c, x_slid)
    return c


def _boundary_normal(contains, c, scale):
    """Outward unit normal near boundary point ``c`` from membership probes."""
    h = 0.5 * scale
    gx = float(contains(c + [h, 0.0])) - float(contains(c - [h, 0.0]))
    gy = float(contains(c + [0.0, h])) - float(contains(c - [0.0, h]))
    # membership decreases outward, so the gradient of the indicator points in
    g = np.array([-gx, -gy])
    norm = float(np.hypot(*g))
    if norm < 1e-15:
        return None
    return g / norm


def _domain_membership(measure):
    domain = measure.system.domain
    if domain is not None:
        return lambda x: bool(domain.contains(x[0], x[1]))
    grid = measure.system.grid
    (x0, x1), (y0, y1) = grid.bbox
    margin = max(grid.cell_size)

    def contains(x):
        # no domain recorded: fall back to the bbox with a one-cell margin
        return (x0 - margin <= x[0] <= x1 + margin) and (y0 - margin <= x[1] <= y1 + margin)

    return contains


def is_jordan(samples):
    """True when no two non-adjacent sampled segments properly intersect."""
    pts = np.asarray(samples, dtype=float)
    n = len(pts)
    if n < 4:
        return True
    a = pts
    b = np.roll(pts, -1, axis=0)

    def orient(p, q, r):
        return (q[..., 0] - p[..., 0]) * (r[..., 1] - p[..., 1]) - (
            q[..., 1] - p[..., 1]
        ) * (r[..., 0] - p[..., 0])

    for i in range(n - 2):
        j0 = i + 2
        j1 = n - 1 if i == 0 else n  # segment n-1 is adjacent to segment 0
        if j0 >= j1:
            continue
        A, B = a[i], b[i]
        C, D = a[j0:j1], b[j0:j1]
        d1 = orient(A[None, :], B[None, :], C) * orient(A[None, :], B[None, :], D)
        d2 = orient(C, D, A[None, :].repeat(len(C), 0)) * orient(
            C, D, B[None, :].repeat(len(C), 0)
        )
        if np.any((d1 < 0) & (d2 < 0)):
            return False
    return True


def polyline_distance(points, polyline_pts):
    """Distance from each point to a closed polyline (min over segments)."""
    p = np.asarray(points, dtype=float)
    a = np.asarray(polyline_pts, dtype=float)
    b = np.roll(a, -1, axis=0)
    ab = b - a
    denom = np.maximum(np.einsum("sk,sk->s", ab, ab), 1e-300)
    ap = p[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("psk,sk->ps", ap, ab) / denom, 0.0, 1.0)
    proj = a[None, :, :] + t[..., None] * ab[None, :, :]
    d = np.hypot(p[:, None, 0] - proj[..., 0], p[:, None, 1] - proj[..., 1])
    return d.min(axis=1)


def hausdorff_distance(curve_a, curve_b):
    """Symmetric Hausdorff distance between two closed polylines."""
    return max(
        float(polyline_distance(curve_a, curve_b).max()),
        float(polyline_distance(curve_b, curve_a).max()),
    )


# ---------------------------------------------------------------------------
# Alternating schedules
# ---------------------------------------------------------------------------


@dataclass
class SteerPath:
    path: np.ndarray  # (k, 2) polyline sampled at uniform arc length
    duration: float


@dataclass
class AlternatingSchedule:
    pieces: list
    weights: np.ndarray
    steering_bound: float
    mode: str  # "averaged" or "cumulative"
    n_rounds: int
    g1: object = None
    shift_offset: int = 0
    padding: float = None
    domain: object = None

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ConstructionError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "weights", w)

    def dwell_times(self, round_index):
        """Dwell duration per piece in the given 1-based round."""
        n = round_index
        if self.mode == "averaged":
            return [n * lam for lam in self.weights]
        t1 = self.pieces[0].period
        d1 = t1 * math.ceil(self.padding / t1) + t1 * math.ceil(self.weights[0] * n / t1)
        if len(self.pieces) == 1:
            return [d1]
        t2 = self.pieces[1].period
        d2 = t2 * max(0, math.ceil(self.weights[1] * n / t2 - 1))
        return [d1, d2]


def steer_straight(start, end, domain=None, step=None):
    """Unit-speed straight segment; errors if it leaves the domain."""
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    dist = float(np.hypot(*(end - start)))
    if dist < 1e-14:
        return SteerPath(path=np.array([start, end]), duration=0.0)
    if step is None:
        step = max(dist / 256.0, 1e-9)
    k = max(2, int(math.ceil(dist / step)) + 1)
    t = np.linspace(0.0, 1.0, k)
    path = start[None, :] + t[:, None] * (end - start)[None, :]
    if domain is not None:
        inside = np.asarray(domain.contains(path[:, 0], path[:, 1]))
        if not np.all(inside):
            bad = path[np.argmin(inside)]
            raise SteeringError(
                f"straight steering blocked at ({bad[0]:.6g}, {bad[1]:.6g})"
            )
    return SteerPath(path=path, duration=dist)


def synthesize_schedule(pieces, weights, domain=None, g1=None, t_k=None,
                        n_rounds=50, m_g=None):
    """Build the cyclic itinerary realizing ``sum_j weights_j * piece_j``.

    Without ``g1`` the itinerary is the plain averaged alternation: round n
    dwells ``n * weights[j]`` on piece j, steering between pieces in time at
    most ``t_k``.  With ``g1`` (single cumulative constraint, at most two
    pieces) the first piece is time-shifted so its running integral of
    ``g1 - mean`` stays nonpositive, dwells are padded by
    ``alpha = 2 * m_g * t_k / (-mu_1(g1))`` worth of whole periods, and whole
    periods only are dwelt, so the running integral of g1 never crosses zero.
    """
    weights = np.asarray(weights, dtype=float)
    if len(weights) != len(pieces):
        raise ConstructionError("one weight per piece required")
    if t_k is None:
        if domain is None:
            raise ConstructionError("need t_k or a domain to bound steering time")
        t_k = domain.diameter()

    if g1 is None:
        return AlternatingSchedule(
            pieces=list(pieces),
            weights=weights,
            steering_bound=t_k,
            mode="averaged",
            n_rounds=n_rounds,
            domain=domain,
        )

    if len(pieces) > 2:
        raise ConstructionError("cumulative constraint needs at most two pieces")
    mu1 = pieces[0].average(g1)
    shift = 0
    if isinstance(pieces[0], PeriodicCurve):
        # shift the time origin to the maximum of the running integral of
        # g1 - mu1, making the shifted partial integrals nonpositive
        vals = pieces[0].values(g1) - mu1
        cum = np.concatenate([[0.0], np.cumsum(vals) * pieces[0].dt])
        shift = int(np.argmax(cum[:-1]))
        pieces = [pieces[0].shifted(shift)] + list(pieces[1:])
    if len(pieces) == 2:
        mu2 = pieces[1].average(g1)
        if not (mu1 < 0 < mu2):
            raise ConstructionError(
                f"two-piece cumulative construction needs mu1(g1) < 0 < mu2(g1); "
                f"got {mu1:g}, {mu2:g}"
            )
    elif mu1 > 0:
        raise ConstructionError(f"single piece must satisfy mu(g1) <= 0; got {mu1:g}")
    if m_g is None:
        m_g = max(abs(_profile_bound(p, g1)) for p in pieces)
    alpha = 0.0
    if mu1 < 0:
        alpha = 2.0 * m_g * t_k / (-mu1)
    return AlternatingSchedule(
        pieces=list(pieces),
        weights=weights,
        steering_bound=t_k,
        mode="cumulative",
        n_rounds=n_rounds,
        g1=g1,
        shift_offset=shift,
        padding=alpha,
        domain=domain,
    )


def _profile_bound(piece, g):
    if isinstance(piece, StationaryPoint):
        return abs(piece.average(g))
    return float(np.max(np.abs(piece.values(g))))


class _PieceProfile:
    """Per-period prefix integrals of one integrand along one piece."""

    def __init__(self, piece, g):
        self.period = piece.period
        if isinstance(piece, StationaryPoint):
            self.constant = piece.average(g)
            self.total = self.constant * self.period
            self.cum = None
        else:
            vals = piece.values(g)
            self.constant = None
            self.cum = np.concatenate([[0.0], np.cumsum(vals) * piece.dt])
            self.dt = piece.dt
            self.total = float(self.cum[-1])
            self.prefix_max = np.maximum.accumulate(self.cum)

    def partial(self, t):
        """Integral over [0, t] within one period, 0 <= t <= period."""
        if self.constant is not None:
            return self.constant * t
        pos = t / self.dt
        i = min(int(math.floor(pos)), len(self.cum) - 2)
        frac = pos - i
        return float(self.cum[i] + frac * (self.cum[i + 1] - self.cum[i]))

    def max_partial(self, t):
        """Max over s in [0, t] of the integral over [0, s], t <= period."""
        if self.constant is not None:
            return max(0.0, self.constant * t)
        pos = t / self.dt
        i = min(int(math.floor(pos)), len(self.cum) - 2)
        return float(max(self.prefix_max[i], self.partial(t)))

    def dwell(self, duration):
        """(integral, max partial integral) over a dwell of given duration."""
        k = int(math.floor(duration / self.period + 1e-12))
        rem = duration - k * self.period
        if rem < 1e-12:
            rem = 0.0
        total = k * self.total + self.partial(rem)
        # candidates: best whole-period boundary plus one period's max, then tail
        best = -math.inf
        if k > 0:
            period_max = (
                max(0.0, self.total) if self.constant is not None else self.prefix_max[-1]
            )
            r_best = (k - 1) * self.total if self.total > 0 else 0.0
            best = r_best + period_max
        tail = k * self.total + self.max_partial(rem) if rem > 0 else -math.inf
        return total, max(best, tail, 0.0)


class _SteerCache:
    """Quadrature of the integrands along straight steers, keyed by endpoints."""

    def __init__(self, g_list, domain):
        self.g_list = g_list
        self.domain = domain
        self.cache = {}

    def get(self, start, end):
        key = (round(start[0], 12), round(start[1], 12), round(end[0], 12), round(end[1], 12))
        if key not in self.cache:
            seg = steer_straight(start, end, self.domain)
            if seg.duration == 0.0:
                self.cache[key] = (0.0, [(0.0, 0.0)] * len(self.g_list))
            else:
                path = seg.path
                t = np.linspace(0.0, seg.duration, len(path))
                direction = (np.asarray(end) - np.asarray(start)) / seg.duration
                stats = []
                for g in self.g_list:
                    vals = np.asarray(
                        evaluate_integrand(
                            g, path[:, 0], path[:, 1], direction[0], direction[1]
                        ),
                        dtype=float,
                    )
                    vals = np.broadcast_to(vals, len(path))
                    cum = np.concatenate(
                        [[0.0], np.cumsum((vals[1:] + vals[:-1]) / 2 * np.diff(t))]
                    )
                    stats.append((float(cum[-1]), float(cum.max())))
                self.cache[key] = (seg.duration, stats)
        return self.cache[key]


@dataclass
class ScheduleReport:
    round_times: np.ndarray
    running_averages: np.ndarray  # (n_rounds, n_g)
    targets: np.ndarray
    final_averages: np.ndarray
    final_distance: np.ndarray
    max_cumulative_g1: float = None
    piece_averages: np.ndarray = None


def verify_schedule(schedule, g_list):
    """Simulate the itinerary segment-analytically and report running averages.

    For cumulative mode the exact supremum over all T of the running integral
    of g1 is tracked (g1 is prepended to ``g_list`` if absent).
    """
    g_all = list(g_list)
    track_g1 = None
    if schedule.mode == "cumulative":
        track_g1 = 0
        g_all = [schedule.g1] + g_all
    pieces = schedule.pieces
    profiles = [[_PieceProfile(p, g) for g in g_all] for p in pieces]
    steers = _SteerCache(g_all, schedule.domain)
    n_g = len(g_all)

    time_now = 0.0
    integrals = np.zeros(n_g)
    max_cum = 0.0
    round_times = []
    averages = []

    def do_steer(a, b):
        nonlocal time_now, max_cum
        duration, stats = steers.get(a, b)
        for k in range(n_g):
            total, prefix_max = stats[k]
            if k == track_g1:
                max_cum = max(max_cum, integrals[k] + prefix_max)
            integrals[k] += total
        time_now += duration

    for n in range(1, schedule.n_rounds + 1):
        dwells = schedule.dwell_times(n)
        for j, piece in enumerate(pieces):
            d = dwells[j]
            for k in range(n_g):
                total, prefix_max = profiles[j][k].dwell(d)
                if k == track_g1:
                    max_cum = max(max_cum, integrals[k] + prefix_max)
                integrals[k] += total
            time_now += d
            if len(pieces) > 1:
                nxt = pieces[(j + 1) % len(pieces)]
                end = _dwell_end_point(piece, d)
                do_steer(end, np.asarray(nxt.start, dtype=float))
        round_times.append(time_now)
        averages.append(integrals / max(time_now, 1e-300))

    piece_avg = np.array([[_PieceProfile(p, g).total / p.period for g in g_all] for p in pieces])
    targets = schedule.weights @ piece_avg
    averages = np.array(averages)
    report = ScheduleReport(
        round_times=np.array(round_times),
        running_averages=averages[:, (1 if track_g1 == 0 else 0):],
        targets=targets[(1 if track_g1 == 0 else 0):],
        final_averages=averages[-1, (1 if track_g1 == 0 else 0):],
        final_distance=np.abs(
            averages[-1, (1 if track_g1 == 0 else 0):]
            - targets[(1 if track_g1 == 0 else 0):]
        ),
        max_cumulative_g1=(max_cum if track_g1 is not None else None),
        piece_averages=piece_avg[:, (1 if track_g1 == 0 else 0):],
    )
    return report


def _dwell_end_point(piece, duration):
    if isinstance(piece, StationaryPoint):
        return np.asarray(piece.point, dtype=float)
    phase = duration % piece.period
    idx = int(round(phase / piece.dt)) % len(piece.samples)
    return piece.samples[idx]


def measure_to_stationary_pieces(measure, dynamics_tol=1e-6):
    """Cluster an atomic measure into stationary pieces (cells with ~zero
    relaxed dynamics) and their weights.  Raises if any occupied cell moves.
    """
    occupied, f = measure.cell_dynamics()
    _, ubar = measure.control_barycenters()
    speeds = np.hypot(f[:, 0], f[:, 1])
    if np.any(speeds > dynamics_tol):
        k = int(np.argmax(speeds))
        raise ConstructionError(
            f"cell {occupied[k]} has relaxed speed {speeds[k]:g}; "
            "only stationary decompositions are supported here"
        )
    masses = measure.cell_masses()[occupied]
    weights = masses / masses.sum()
    centers = measure.system.grid.centers[occupied]
    pieces = [
        StationaryPoint(point=centers[i].copy(), control=ubar[i].copy())
        for i in range(len(occupied))
    ]
    return pieces, weights
