"""Long-run average-cost planar control via occupational-measure LPs.

The engine discretizes the state-control space of ``dx/dt = f(x, u)`` on a
compact planar set, assembles a linear program over probability weights whose
equality rows encode stationarity against polynomial test functions, and
optimizes fractional objectives ``mu(p)/mu(q)`` with averaged constraints.
Optimal measures are turned back into periodic curves or alternating
schedules, and analytic oracles (convex Cheeger sets, scalar benchmarks,
the mass-constrained double well) provide independent ground truth.
"""

from .curves import (
    AlternatingSchedule,
    PeriodicCurve,
    StationaryPoint,
    extract_curve,
    hausdorff_distance,
    is_jordan,
    measure_to_stationary_pieces,
    synthesize_schedule,
    verify_schedule,
)
from .discretize import (
    DiscretizedSystem,
    MeasureLP,
    OptimalMeasure,
    assemble,
    build_system,
    realization_point,
    sample_integrand,
)
from .expr import EvalError, ParseError, evaluate, parse, pretty
from .gencheeger import (
    antiderivative_p1,
    solve_cheeger,
    solve_generalized,
)
from .geometry import (
    ControlGrid,
    ConvexPolygon,
    Disk,
    ImplicitDomain,
    Rectangle,
    SpatialGrid,
    build_spatial_grid,
    inner_parallel_area,
)
from .oracles import (
    cheeger_constant,
    cheeger_set_boundary,
    double_well_lp,
    double_well_oracle,
    scalar_lp,
    scalar_problem,
)
from .ratio import (
    RatioProblem,
    RatioSolution,
    pinned_sweep,
    solve_ratio,
)
from .simplex import (
    InfeasibleError,
    LPSolution,
    NoConvergenceError,
    StandardLP,
    UnboundedError,
    solve,
    solve_with_extra_rows,
)

__version__ = "0.1.0"
