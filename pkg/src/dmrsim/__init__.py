"""dmrsim: simulation and analytics for the double mean-reverting
stochastic volatility system and its Skorokhod-reflected variant."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    CorrelationSpec,
    ExternalParams,
    GridSpec,
    InternalParams,
    ModelParams,
    ReflectionSpec,
    ValidationReport,
    cholesky_factor,
    params_from_dict,
    params_from_json,
    params_to_dict,
    validate,
)
from .analytics import (  # noqa: F401
    BoundaryClassification,
    BoundaryVerdict,
    DensityRegime,
    MomentCurve,
    ScanReport,
    StationaryDensity,
    TestFunction,
    ckls_normalizer,
    classify_boundary,
    find_negativity_radius,
    generator_apply,
    linear_explicit_solution,
    lyapunov_negativity_scan,
    mean_internal,
    moment_curve,
    quadratic_lyapunov,
    scale_function,
    second_moment_cir,
    second_moment_linear,
    stationary_density,
    stationary_variance_cir,
)
from .sde import (  # noqa: F401
    ComparisonPair,
    PathBundle,
    ReflectedPath,
    RngStream,
    brownian_path,
    regulator_from_running_max,
    simulate_comparison_pair,
    simulate_internal,
    simulate_internal_from_driver,
    simulate_reflected,
    simulate_system,
    simulate_system_reflected,
    step_full_truncation,
)
from .experiments import (  # noqa: F401
    EVIDENCE_SWEEP,
    McEstimate,
    OccupancyReport,
    STANDARD_SWEEP,
    boundary_evidence_study,
    comparison_violation_study,
    density_fit_study,
    estimate_moment,
    explicit_consistency_study,
    moment_plateau_study,
    occupancy_near_origin,
    occupancy_study,
    reflected_mean_reversion_study,
    reflected_sup_moment_check,
    terminal_power,
    terminal_value,
)
