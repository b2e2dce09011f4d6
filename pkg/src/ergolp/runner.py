"""Pipeline orchestration: parsed config in, summary and artifacts out.

Each mode runs assemble -> optimize -> (extract | schedule | sweep), collects
a RunSummary, and optionally writes the measure CSV, curve CSV, iteration
trace CSV, and an SVG overlay.  All numeric formatting is fixed so repeated
runs of the same config produce identical artifact bytes (wall time is
reported but not part of the deterministic payload).
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import expr as expr_mod
from .config import ConfigError, RunConfig, parse_values
from .curves import (
    PeriodicCurve,
    StationaryPoint,
    extract_curve,
    is_jordan,
    hausdorff_distance,
    measure_to_stationary_pieces,
    synthesize_schedule,
    verify_schedule,
)
from .discretize import assemble, build_system
from .geometry import ControlGrid
from .gencheeger import solve_cheeger, solve_generalized
from .oracles import (
    cheeger_constant,
    cheeger_set_boundary,
    double_well_lp,
    double_well_oracle,
    scalar_problem,
)
from .ratio import RatioProblem, pinned_sweep, solve_ratio
from .svg import emit_svg, write_svg


@dataclass
class RunSummary:
    mode: str
    values: dict = field(default_factory=dict)  # ordered name -> number/str
    wall_time: float = 0.0

    def lines(self):
        out = [f"mode = {self.mode}"]
        for key, val in self.values.items():
            if isinstance(val, float):
                out.append(f"{key} = {val:.12g}")
            else:
                out.append(f"{key} = {val}")
        out.append(f"wall_time = {self.wall_time:.3f}")
        return out

    def text(self):
        return "\n".join(self.lines()) + "\n"


def _fmt_float(v):
    return repr(float(v))


def write_measure_csv(path, measure):
    grid = measure.system.grid
    n_u = measure.system.n_u
    rows = ["i,j,x1,x2,u1,u2,weight"]
    nonzero = np.nonzero(measure.weights > 0.0)[0]
    for col in nonzero:
        cell, j = divmod(int(col), n_u)
        x = grid.centers[cell]
        u = measure.system.controls[j]
        rows.append(
            f"{cell},{j},{_fmt_float(x[0])},{_fmt_float(x[1])},"
            f"{_fmt_float(u[0])},{_fmt_float(u[1])},{_fmt_float(measure.weights[col])}"
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")


def read_measure_csv(path):
    """Reload a measure CSV; returns (cells, controls, weights) arrays."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        if not header.startswith("i,j,"):
            raise ValueError("not a measure CSV")
        data = [line.strip().split(",") for line in fh if line.strip()]
    arr = np.array(data, dtype=float)
    return arr[:, 2:4], arr[:, 4:6], arr[:, 6]


def write_curve_csv(path, curve, piece_index=0):
    rows = ["t,x1,x2,u1,u2,piece_index"]
    if isinstance(curve, StationaryPoint):
        rows.append(
            f"{_fmt_float(0.0)},{_fmt_float(curve.point[0])},{_fmt_float(curve.point[1])},"
            f"{_fmt_float(curve.control[0])},{_fmt_float(curve.control[1])},{piece_index}"
        )
    else:
        for k in range(len(curve.samples)):
            t = k * curve.dt
            x = curve.samples[k]
            u = curve.controls[k]
            rows.append(
                f"{_fmt_float(t)},{_fmt_float(x[0])},{_fmt_float(x[1])},"
                f"{_fmt_float(u[0])},{_fmt_float(u[1])},{piece_index}"
            )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")


def write_trace_csv(path, trace):
    rows = ["t,v_t,r_t"] + [
        f"{t},{_fmt_float(v)},{_fmt_float(r)}" for t, v, r in trace
    ]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")


def _curve_stats(curve, summary):
    if curve is None:
        return
    if isinstance(curve, StationaryPoint):
        summary.values["curve.kind"] = "stationary"
        summary.values["curve.x1"] = float(curve.point[0])
        summary.values["curve.x2"] = float(curve.point[1])
        return
    summary.values["curve.kind"] = "periodic"
    summary.values["curve.period"] = curve.period
    summary.values["curve.closure_error"] = curve.closure_error
    summary.values["curve.samples"] = len(curve.samples)
    summary.values["curve.jordan"] = str(bool(is_jordan(curve.samples))).lower()


def _measure_stats(solution, summary):
    m = solution.measure
    summary.values["measure.mu_p"] = m.mu_p
    summary.values["measure.mu_q"] = m.mu_q
    summary.values["measure.support_size"] = len(m.support)
    for k, mu_c in enumerate(m.mu_constraints, 1):
        summary.values[f"constraint.{k}.mu"] = float(mu_c)
    summary.values["dinkelbach.iterations"] = len(solution.iterations)
    summary.values["dinkelbach.final_residual"] = solution.iterations[-1][2]
    summary.values["lp.iterations"] = solution.lp_iterations


def _system_for(cfg):
    if cfg.get("grid.scalar", "false").lower() in ("true", "1", "yes"):
        prob = scalar_problem(nx=cfg.get_int("grid.nx", 41))
        return prob.system, prob.domain
    domain = cfg.domain()
    system = build_system(
        domain,
        cfg.get_int("grid.nx"),
        cfg.get_int("grid.ny"),
        ControlGrid(cfg.get_int("grid.n_u")),
    )
    return system, domain


def _solve_ratio_mode(cfg):
    system, domain = _system_for(cfg)
    mlp = assemble(
        system,
        cfg.require("objective.p"),
        cfg.get("objective.q", "1"),
        constraints=cfg.constraints(),
        degree=cfg.get_int("test_degree", 8),
    )
    prob = RatioProblem(
        lp=mlp,
        sense=cfg.get("objective.sense", "minimize"),
        dinkelbach_tol=cfg.get_float("dinkelbach_tol", 1e-9),
        max_iters=cfg.get_int("max_iters", 50),
    )
    return solve_ratio(prob), system, domain


def run_config(cfg, svg_path=None, csv_dir=None):
    """Execute the configured mode; returns (RunSummary, artifacts dict)."""
    t0 = time.perf_counter()
    mode = cfg.mode
    summary = RunSummary(mode=mode)
    art = {"measure": None, "curve": None, "schedule": None, "oracle_boundary": None,
           "domain": None, "trace": None, "sweep": None}

    if mode in ("cheeger", "generalized_cheeger"):
        domain = cfg.domain()
        nx, ny = cfg.get_int("grid.nx"), cfg.get_int("grid.ny")
        n_u = cfg.get_int("grid.n_u")
        degree = cfg.get_int("test_degree", 8)
        if mode == "cheeger":
            result = solve_cheeger(
                domain, nx, ny, n_u, degree=degree,
                dinkelbach_tol=cfg.get_float("dinkelbach_tol", 1e-9),
            )
        else:
            result = solve_generalized(
                domain, cfg.require("P"), cfg.require("Q"), nx, ny, n_u,
                degree=degree, q_override=cfg.get("q_override", "false") == "true",
                dinkelbach_tol=cfg.get_float("dinkelbach_tol", 1e-9),
            )
        sol = result.solution
        summary.values["value"] = sol.value
        _measure_stats(sol, summary)
        _curve_stats(result.curve, summary)
        if result.stationary_warning:
            summary.values["warning"] = "stationary optimum (expected a closed curve)"
        if mode == "cheeger" and getattr(domain, "is_convex", False):
            r_star, v_star, h_star = cheeger_constant(domain)
            summary.values["oracle.r_star"] = r_star
            summary.values["oracle.h_star"] = h_star
            summary.values["oracle.delta"] = sol.value - v_star
            art["oracle_boundary"] = cheeger_set_boundary(domain, 2048, r_star=r_star)
            if isinstance(result.curve, PeriodicCurve):
                summary.values["curve.hausdorff_to_oracle"] = hausdorff_distance(
                    result.curve.samples, art["oracle_boundary"]
                )
        art.update(measure=sol.measure, curve=result.curve, domain=domain,
                   trace=sol.iterations)

    elif mode == "ratio":
        sol, system, domain = _solve_ratio_mode(cfg)
        summary.values["value"] = sol.value
        _measure_stats(sol, summary)
        curve = None
        try:
            curve = extract_curve(sol.measure)
            _curve_stats(curve, summary)
        except Exception as err:  # extraction is best-effort in ratio mode
            summary.values["curve.error"] = str(err)
        art.update(measure=sol.measure, curve=curve, domain=domain, trace=sol.iterations)

    elif mode == "double_well":
        mass = cfg.get_float("mass")
        v_oracle, lam_oracle, wells = double_well_oracle(mass)
        mlp = double_well_lp(mass, nx=cfg.get_int("grid.nx", 41),
                             degree=cfg.get_int("test_degree", 8))
        sol = solve_ratio(RatioProblem(lp=mlp, sense="minimize",
                                       dinkelbach_tol=cfg.get_float("dinkelbach_tol", 1e-9)))
        summary.values["value"] = sol.value
        _measure_stats(sol, summary)
        masses = sol.measure.cell_masses()
        centers = sol.measure.system.grid.centers
        lam = float(masses[np.argmin(np.abs(centers[:, 0] + 1.0))])
        summary.values["lambda_at_minus_one"] = lam
        summary.values["oracle.value"] = v_oracle
        summary.values["oracle.lambda"] = lam_oracle
        summary.values["oracle.delta"] = sol.value - v_oracle
        art.update(measure=sol.measure, domain=mlp.system.domain, trace=sol.iterations)

    elif mode == "schedule":
        sol, system, domain = _solve_ratio_mode(cfg)
        summary.values["value"] = sol.value
        _measure_stats(sol, summary)
        pieces, weights = measure_to_stationary_pieces(sol.measure)
        g1 = cfg.get("schedule.g1")
        constraints = cfg.constraints()
        if g1 is None and constraints and constraints[0][1] == "le":
            g1 = constraints[0][0]
        if g1 is not None:
            order = np.argsort([p.average(g1) for p in pieces])
            pieces = [pieces[i] for i in order]
            weights = weights[order]
        schedule = synthesize_schedule(
            pieces, weights, domain=domain, g1=g1,
            n_rounds=cfg.get_int("schedule.rounds", 50),
        )
        g_list = [cfg.require("objective.p")] + [g for g, _ in constraints]
        report = verify_schedule(schedule, g_list)
        summary.values["schedule.mode"] = schedule.mode
        summary.values["schedule.pieces"] = len(pieces)
        summary.values["schedule.rounds"] = schedule.n_rounds
        summary.values["schedule.steering_bound"] = schedule.steering_bound
        if schedule.padding is not None:
            summary.values["schedule.padding"] = schedule.padding
        if report.max_cumulative_g1 is not None:
            summary.values["schedule.max_cumulative_g1"] = report.max_cumulative_g1
        for k, (avg, target) in enumerate(zip(report.final_averages, report.targets)):
            summary.values[f"schedule.avg_{k}"] = float(avg)
            summary.values[f"schedule.target_{k}"] = float(target)
        art.update(measure=sol.measure, schedule=schedule, domain=domain,
                   trace=sol.iterations)

    elif mode == "pinned_sweep":
        system, domain = _system_for(cfg)
        mlp = assemble(
            system,
            cfg.require("objective.p"),
            cfg.get("objective.q", "1"),
            constraints=cfg.constraints(),
            degree=cfg.get_int("test_degree", 8),
        )
        pin_blocks = cfg.numbered("pin")
        if not pin_blocks:
            raise ConfigError("pinned_sweep needs at least one pin block")
        pins = [b["expr"] for b in pin_blocks]
        lattice = [
            parse_values(b["values"]) if "values" in b else None for b in pin_blocks
        ]
        if any(v is None for v in lattice):
            lattice = None
        v_names = [f"c{k+1}" for k in range(len(pins))] + ["mp", "mq"]
        v_expr = expr_mod.parse(cfg.require("sweep.V"), variables=v_names)

        def V(point, mu_p, mu_q):
            env = {f"c{k+1}": point[k] for k in range(len(point))}
            env["mp"] = mu_p
            env["mq"] = mu_q
            return float(expr_mod.evaluate_env(v_expr, env))

        result = pinned_sweep(
            mlp, pins, V, lattice=lattice,
            sense=cfg.get("objective.sense", "minimize"),
            points_per_pin=cfg.get_int("sweep.points", 41),
        )
        summary.values["value"] = result.value
        for k, c in enumerate(result.point, 1):
            summary.values[f"sweep.c{k}"] = float(c)
        summary.values["sweep.evaluated"] = len(result.evaluations)
        summary.values["sweep.infeasible"] = len(result.infeasible_points)
        art.update(measure=result.measure, domain=domain, sweep=result)

    else:
        raise ConfigError(f"unhandled mode {mode!r}")

    summary.wall_time = time.perf_counter() - t0
    _write_artifacts(cfg, summary, art, svg_path=svg_path, csv_dir=csv_dir)
    return summary, art


def _write_artifacts(cfg, summary, art, svg_path=None, csv_dir=None):
    svg_path = svg_path or cfg.get("output.svg")
    csv_dir = csv_dir or cfg.get("output.csv_dir")
    summary_path = cfg.get("output.summary")
    if summary_path:
        os.makedirs(os.path.dirname(summary_path) or ".", exist_ok=True)
        with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(summary.text())
    if csv_dir:
        os.makedirs(csv_dir, exist_ok=True)
        if art["measure"] is not None:
            write_measure_csv(os.path.join(csv_dir, "measure.csv"), art["measure"])
        if art["curve"] is not None:
            write_curve_csv(os.path.join(csv_dir, "curve.csv"), art["curve"])
        if art["schedule"] is not None:
            for j, piece in enumerate(art["schedule"].pieces):
                write_curve_csv(
                    os.path.join(csv_dir, f"piece_{j}.csv"), piece, piece_index=j
                )
        if art["trace"] is not None:
            write_trace_csv(os.path.join(csv_dir, "iterations.csv"), art["trace"])
        if art["sweep"] is not None:
            rows = ["point,V,mu_p,mu_q"]
            for point, val, mp, mq in art["sweep"].evaluations:
                pt = ";".join(_fmt_float(c) for c in point)
                rows.append(f"{pt},{_fmt_float(val)},{_fmt_float(mp)},{_fmt_float(mq)}")
            with open(os.path.join(csv_dir, "sweep.csv"), "w", encoding="utf-8",
                      newline="\n") as fh:
                fh.write("\n".join(rows) + "\n")
    if svg_path and art["domain"] is not None:
        os.makedirs(os.path.dirname(svg_path) or ".", exist_ok=True)
        text = emit_svg(
            art["domain"],
            measure=art["measure"],
            curve=art["curve"],
            oracle_boundary=art["oracle_boundary"],
            schedule=art["schedule"],
        )
        write_svg(svg_path, text)
