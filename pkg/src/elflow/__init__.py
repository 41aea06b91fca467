"""Length-penalized elastic flow of planar curves sliding on the x-axis.

The package evolves open curves whose endpoints are attached to (and
slide along) the x-axis by the L2 gradient flow of the bending energy
plus a length penalty, computes the matching critical points directly
by shooting, and post-processes runs into dissipation / convergence-rate
diagnostics.
"""

from .geometry import (
    DiscreteCurve,
    GeometryCache,
    bounding_box,
    build_cache,
    discrete_ibp_defect,
    hausdorff_distance,
    resample_uniform,
)
from .energy import (
    GradientData,
    VariationReport,
    energy,
    first_variation,
    gradient,
    second_variation,
    verify_variation,
)
from .flow import (
    FlowConfig,
    FlowResult,
    FlowState,
    FlowTrace,
    StopReason,
    check_admissible,
    run,
    step,
)
from .elastica import (
    ElasticaKind,
    ElasticaSolution,
    ShootingParams,
    classify,
    integrate_shooting,
    residual_vector,
    solve,
    solve_all,
)
from .diagnostics import (
    ConvergenceReport,
    compactness_report,
    convergence_report,
    decay_rate_fit,
    dissipation_report,
    fit_lojasiewicz,
)

__version__ = "0.1.0"

__all__ = [
    "DiscreteCurve", "GeometryCache", "bounding_box", "build_cache",
    "discrete_ibp_defect", "hausdorff_distance", "resample_uniform",
    "GradientData", "VariationReport", "energy", "first_variation",
    "gradient", "second_variation", "verify_variation",
    "FlowConfig", "FlowResult", "FlowState", "FlowTrace", "StopReason",
    "check_admissible", "run", "step",
    "ElasticaKind", "ElasticaSolution", "ShootingParams", "classify",
    "integrate_shooting", "residual_vector", "solve", "solve_all",
    "ConvergenceReport", "compactness_report", "convergence_report",
    "decay_rate_fit", "dissipation_report", "fit_lojasiewicz",
]
