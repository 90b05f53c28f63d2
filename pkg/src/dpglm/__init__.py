"""Differentially private learning of linear predictors with GLM losses.

The package provides the training procedures (noisy projected gradient
descent, regularized output perturbation, a random-projection method),
private model selection (confidence boosting and grid search over the
radius), the privacy primitives they calibrate against, synthetic instance
generators with exact risk oracles, an experiment harness with a CLI, and
scikit-learn style estimator wrappers.
"""

from .core import (
    JlMatrix,
    jl_apply,
    jl_dim_required,
    jl_lift,
    jl_sample,
    project_ball,
    sample_gaussian_vector,
    sample_laplace,
)
from .data import Dataset, load_dataset, save_dataset
from .losses import (
    GlmLoss,
    absolute_loss,
    check_self_bounding,
    empirical_grad,
    empirical_risk,
    lipschitz_on_ball,
    loss_bound_on_ball,
    loss_grad,
    loss_value,
    scaled_squared_loss,
    squared_loss,
)
from .mechanisms import (
    NON_PRIVATE,
    PrivacyBudget,
    gaussian_sigma2_noisy_gd,
    gaussian_sigma2_output_perturbation,
    gem_guarantee_bound,
    gem_select,
    report_noisy_max,
)
from .optim import (
    ErmSolverError,
    TrainedModel,
    empirical_argument_stability,
    jl_method,
    model_from_json,
    model_to_json,
    noisy_gd,
    noisy_sgd,
    output_perturbation,
    regularized_erm_solve,
)
from .rng import RngHandle
from .schedules import (
    OptimizerSchedule,
    flagship_grid_size,
    jl_embedding_dim,
    jl_lipschitz_schedule,
    jl_smooth_schedule,
    output_perturbation_lambda,
    schedule_noisy_gd,
)
from .selection import (
    BaseAlgorithm,
    boost,
    delta_noisy_gd,
    delta_output_perturbation,
    flagship_pipeline,
    grid_report_csv,
    make_base_algorithm,
    private_grid_search,
    validation_penalty,
)
from .instances import (
    PopulationOracle,
    beta_mean_abs_deviation_mc,
    beta_mean_abs_deviation_theory,
    comparator_residual_exact,
    comparator_residual_mc,
    design_rank,
    gen_lipschitz_hard,
    gen_regression,
    gen_smooth_hard,
    lipschitz_hard_auto_params,
    smooth_hard_auto_params,
)
from .estimators import (
    AdaptiveGridSearchGLM,
    JLProjection,
    JohnsonLindenstraussGLM,
    NoisyGradientDescentGLM,
    OutputPerturbationGLM,
)

__version__ = "0.1.0"
