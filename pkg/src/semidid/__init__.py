"""Semi-parametric inverse-probability-weighted difference-in-differences.

Estimates the average treatment effect on the treated from repeated
cross-sections: four probit models give the probability of each
group-by-period cell, their ratios weight the outcome, and a bootstrap
over the whole chain supplies standard errors.
"""
__version__ = "0.1.0"

from .core import (CELLS, Dataset, DesignConfig, DesignError, Observation, ValidationError,
                   build_dataset, cell_means)
from .probit import (DegenerateResponseError, ProbitError, ProbitFit, SeparationError,
                     fit_probit, predict_probit, probit_nll, std_normal_cdf)
from .propensity import (PropensityFit, TrimReport, estimate_cell_probabilities,
                         overlap_diagnostics, trim)
from .atet import AtetEstimate, EstimationError, estimate_atet, ipw_weight, ipw_weights, simple_did
from .inference import (BootstrapError, InferenceResult, bootstrap_inference, t_test_pvalue)
from .dgp import SimConfig, generate, monte_carlo

__all__ = [
    "CELLS", "Dataset", "DesignConfig", "DesignError", "Observation", "ValidationError",
    "build_dataset", "cell_means", "DegenerateResponseError", "ProbitError", "ProbitFit",
    "SeparationError", "fit_probit", "predict_probit", "probit_nll", "std_normal_cdf",
    "PropensityFit", "TrimReport", "estimate_cell_probabilities", "overlap_diagnostics", "trim",
    "AtetEstimate", "EstimationError", "estimate_atet", "ipw_weight", "ipw_weights",
    "simple_did", "BootstrapError", "InferenceResult", "bootstrap_inference", "t_test_pvalue",
    "SimConfig", "generate", "monte_carlo",
]
