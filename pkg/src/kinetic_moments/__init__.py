"""Entropy-based and regularized moment closures for slab-geometry kinetics."""
from .closure import (
    ClosureContext,
    entropy_flux_j,
    entropy_h,
    flux,
    flux_jacobian,
    realizability_probe,
    relative_entropy,
    source,
)
from .dual import (
    DualSolveReport,
    SolverConfig,
    Status,
    dual_gradient,
    dual_objective,
    solve_dual,
    solve_dual_at_zero,
    solve_dual_batch,
)
from .entropy import BoseEinstein, Burg, EntropyModel, MaxwellBoltzmann, get_entropy
from .estimator import EntropyClosure
from .exceptions import ClosureError, DomainViolation, GridMismatch, OverflowGuard
from .kernel import (
    VelocityBasis,
    ansatz_density,
    build_basis,
    dual_hessian_kernel,
    eval_basis,
    moments_of_multiplier,
)
from .sweep import SweepRecord, emit_table, run_sweep
from .transport import (
    GridState,
    RunConfig,
    build_initial_condition,
    error_metrics,
    observed_order,
    rk4_step,
    run_simulation,
    semidiscrete_rhs,
)

__version__ = "0.1.0"
