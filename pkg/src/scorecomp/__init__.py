"""Score composition over V x F latent matrices: oracle models, posterior-mean
denoisers, row/column composition and an Euler sampler with rollback steps."""

from .compose import (
    CompositionConfig,
    ConditionSet,
    LatentMatrix,
    apply_conditions,
    compose_scores_convex,
    compose_scores_thm1,
    exact_matrix_direction,
    matrix_direction,
)
from .denoise import (
    Denoiser,
    FunctionDenoiser,
    GaussianDenoiser,
    GmmDenoiser,
    IdentityDenoiser,
    ode_direction,
    oracle_denoisers,
    score_of,
)
from .models import (
    DegenerateModelError,
    GaussianModel,
    GmmModel,
    MatrixGaussianModel,
    PivotTreeSpec,
    build_pivot_tree,
    marginal,
    partial_covariance,
    random_pivot_tree_spec,
)
from .sampler import SamplerRun, pf_ode_sample, sample_matrix, sample_matrix_batch, vrs_renoise
from .schedule import SigmaSchedule, karras_sigmas, perturb

__version__ = "0.1.0"

__all__ = [
    "CompositionConfig",
    "ConditionSet",
    "DegenerateModelError",
    "Denoiser",
    "FunctionDenoiser",
    "GaussianDenoiser",
    "GaussianModel",
    "GmmDenoiser",
    "GmmModel",
    "IdentityDenoiser",
    "LatentMatrix",
    "MatrixGaussianModel",
    "PivotTreeSpec",
    "SamplerRun",
    "SigmaSchedule",
    "apply_conditions",
    "build_pivot_tree",
    "compose_scores_convex",
    "compose_scores_thm1",
    "exact_matrix_direction",
    "karras_sigmas",
    "marginal",
    "matrix_direction",
    "ode_direction",
    "oracle_denoisers",
    "partial_covariance",
    "perturb",
    "pf_ode_sample",
    "random_pivot_tree_spec",
    "sample_matrix",
    "sample_matrix_batch",
    "score_of",
    "vrs_renoise",
]
