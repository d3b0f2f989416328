"""Joint shrinkage priors for the variance parameters of latent Gaussian
models, organized as a tree of total variances and variance proportions.

The main entry points:

- :func:`build_prior` turns a model formula, data and a tree description
  into a ready-to-use joint prior object.
- :func:`sample_prior`, :func:`print_text` and :func:`summary_text`
  visualize and sample the prior itself.
- :func:`run_mcmc` and :func:`posterior_summaries` run desk-scale
  posterior inference on the same object.
- :func:`make_bundle` / :func:`load_bundle` serialize a whole analysis,
  and :func:`create_app` serves it over HTTP.
"""

from .assembly import (
    AssemblyError,
    HDJointPrior,
    PriorSample,
    VarianceChoice,
    WeightChoice,
    build_prior,
    prior_block,
    print_text,
    sample_prior,
    summary_text,
)
from .bundle import (
    BundleError,
    build_from_bundle,
    load_bundle,
    make_bundle,
    save_bundle,
)
from .elicitation import (
    ElicitationError,
    Guide,
    GuideError,
    find_pc_prior_param,
)
from .formula import FormulaError, ModelSpec, parse_formula
from .inference import (
    InferenceError,
    InferenceResult,
    SamplerSettings,
    conditional_latent_draws,
    extract_posterior_effect,
    posterior_density_grid,
    posterior_summaries,
    posterior_text,
    prior_density_grid,
    run_mcmc,
)
from .kernels import PriorConstructionError, dirichlet_concentration, split_distance
from .tree import TreeError, parse_tree, render_tree

__version__ = "0.1.0"

__all__ = [
    "AssemblyError",
    "BundleError",
    "ElicitationError",
    "FormulaError",
    "Guide",
    "GuideError",
    "HDJointPrior",
    "InferenceError",
    "InferenceResult",
    "ModelSpec",
    "PriorConstructionError",
    "PriorSample",
    "SamplerSettings",
    "TreeError",
    "VarianceChoice",
    "WeightChoice",
    "build_from_bundle",
    "build_prior",
    "conditional_latent_draws",
    "create_app",
    "dirichlet_concentration",
    "extract_posterior_effect",
    "find_pc_prior_param",
    "load_bundle",
    "make_bundle",
    "parse_formula",
    "parse_tree",
    "posterior_density_grid",
    "posterior_summaries",
    "posterior_text",
    "print_text",
    "prior_block",
    "prior_density_grid",
    "render_tree",
    "run_mcmc",
    "sample_prior",
    "save_bundle",
    "split_distance",
    "summary_text",
]


def create_app(session_dir: str | None = None):
    """Build the HTTP service application (imported lazily so the core
    package works without the service dependencies installed)."""
    from .service import create_app as _create_app

    return _create_app(session_dir)
