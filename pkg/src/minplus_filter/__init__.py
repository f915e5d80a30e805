"""Set-valued state estimation with min-of-quadratics value functions."""

from .approx import (
    FunctionTable,
    MajorantFit,
    ScalarQuadratic,
    balanced_anchors,
    equispaced,
    fit_majorant,
    lift_scalar,
    scale_fit,
)
from .errors import (
    ConfigError,
    FitError,
    InvalidArgumentError,
    InvalidModelError,
    MinPlusError,
    UnboundedBelowError,
)
from .filtering import (
    FilterState,
    OutputChannel,
    dynamics_step,
    dynamics_step_single,
    filter_step,
    init_state,
    linear_channel,
    measurement_step,
    optimal_disturbance,
    run_filter,
)
from .kernels import backend
from .minplus import (
    MinQuadFunction,
    PruneConfig,
    eval_min,
    extract_estimate,
    global_min,
    lattice,
    prune_exact,
    prune_topk,
    set_estimate,
)
from .model import (
    ContinuousModel,
    ReverseDynamics,
    SimulationRecord,
    SqcBudget,
    discretize_reverse_euler,
    simulate_forward,
    sqc_consumption,
)
from .oracle import GridSpec, grid_dp, information_filter
from .quadform import (
    Ellipsoid,
    QuadraticForm,
    dominates,
    evaluate,
    from_initial_condition,
    minimizer,
    sublevel_ellipsoid,
)

__version__ = "0.1.0"
