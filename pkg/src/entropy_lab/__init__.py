"""Perelman λ-entropy on conformal metrics of S² and S²×S².

Modules
-------
sphere
    Zonal collocation grids, conformal metrics and round-sphere tensor
    calculus.
entropy
    The λ minimizer, the soliton tensor and first variations.
variation
    Second variations at the round metrics and the Kähler-side operators.
flow
    Normalized Kähler-Ricci flow with a Möbius gauge.
experiments, cli
    Scenario configs, artifacts and the ``entropy-lab`` command.
"""

from .entropy import (
    EntropyProfile,
    VariationDirection,
    fd_lambda_derivative,
    first_variation,
    solve_minimizer,
    soliton_tensor,
    w_functional,
)
from .errors import (
    AliasingError,
    ConfigurationError,
    ConstraintError,
    DegenerateDirectionError,
    EntropyLabError,
    NoHarmonicFormError,
    SolverError,
    StepRejectedError,
    UnsupportedBackgroundError,
)
from .flow import FlowConfig, extremum_audit, gauge_fix, run_to_convergence
from .sphere import (
    CollocationGrid,
    ConformalMetric,
    Convention,
    ScalarField,
    SymTensorField,
    build_grid,
    default_grid,
    gauss_curvature,
    scalar_curvature,
)
from .variation import (
    QuadraticFormReport,
    kernel_basis,
    linearized_f_response,
    modal_table,
    stability_form,
    riemannian_L,
    second_variation_fixed_class,
    second_variation_general,
)

__version__ = "0.1.0"
