"""Path-integral feature attributions with error-bound-optimized sampling.

The library side: differentiable toy models, three attribution paths, a
left-Riemann attribution engine, derivative-profile estimation, and schedule
optimization. The harness side wires these into a config-driven experiment
pipeline with a CLI (`pathattr`).
"""

from .errors import (
    ConfigError,
    DegenerateInputError,
    DomainError,
    NumericalError,
    PathAttrError,
    ShapeError,
)
from .models import (
    CountingModel,
    DifferentiableModel,
    GaussianBumpModel,
    InputVector,
    LinearModel,
    QuadraticModel,
    TanhMLP,
    gradient_check,
    tiny_mlp,
)
from .paths import (
    BlurPath,
    BlurPathConfig,
    LinearPath,
    Path,
    PiecewiseLinearPath,
    blur_image,
    blur_path,
    default_blur_config,
    gaussian_kernel,
    guided_path,
    linear_path,
)
from .riemann import AlphaSchedule, AttributionMap, attribute, integrand, left_riemann
from .schedule_opt import (
    DerivativeProfile,
    OptimizedSchedule,
    PowellResult,
    ProbeMatrix,
    error_bound,
    estimate_profile,
    grid_search_schedule,
    optimize_schedule,
    powell_minimize,
    probe_matrix,
    unconstrained_to_schedule,
)
from .metrics import (
    InsertionCurve,
    aggregate,
    completeness_error,
    insertion_score,
    normalized_insertion_score,
)
from .harness import (
    ExperimentConfig,
    SyntheticDatasetSpec,
    generate_dataset,
    parse_experiment_config,
    run_all,
    run_calibration,
    run_evaluation,
    run_generate,
    schedule_half_deviation,
)

__version__ = "0.1.0"

__all__ = [
    "AlphaSchedule",
    "AttributionMap",
    "BlurPath",
    "BlurPathConfig",
    "ConfigError",
    "CountingModel",
    "DegenerateInputError",
    "DerivativeProfile",
    "DifferentiableModel",
    "DomainError",
    "ExperimentConfig",
    "GaussianBumpModel",
    "InputVector",
    "InsertionCurve",
    "LinearModel",
    "LinearPath",
    "NumericalError",
    "OptimizedSchedule",
    "Path",
    "PathAttrError",
    "PiecewiseLinearPath",
    "PowellResult",
    "ProbeMatrix",
    "QuadraticModel",
    "ShapeError",
    "SyntheticDatasetSpec",
    "TanhMLP",
    "aggregate",
    "attribute",
    "blur_image",
    "blur_path",
    "completeness_error",
    "default_blur_config",
    "error_bound",
    "estimate_profile",
    "gaussian_kernel",
    "generate_dataset",
    "gradient_check",
    "grid_search_schedule",
    "guided_path",
    "insertion_score",
    "integrand",
    "left_riemann",
    "linear_path",
    "normalized_insertion_score",
    "optimize_schedule",
    "parse_experiment_config",
    "powell_minimize",
    "probe_matrix",
    "run_all",
    "run_calibration",
    "run_evaluation",
    "run_generate",
    "schedule_half_deviation",
    "tiny_mlp",
    "unconstrained_to_schedule",
]
