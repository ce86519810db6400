"""Exact conditional tests for Segre-Veronese configurations via sorting Markov bases."""

from .configuration import (
    Configuration,
    Constraint,
    SegreVeroneseSpec,
    build_matrices,
    enumerate_cells,
    validate_spec,
)
from .groebner import generate_groebner_basis, normal_form, sort_interleave
from .models import compile_model, model_from_dict
from .stats import chi2_survival, fit_mle, pearson_chi2

__version__ = "0.1.0"

__all__ = [
    "Configuration",
    "Constraint",
    "SegreVeroneseSpec",
    "build_matrices",
    "enumerate_cells",
    "validate_spec",
    "generate_groebner_basis",
    "normal_form",
    "sort_interleave",
    "compile_model",
    "model_from_dict",
    "chi2_survival",
    "fit_mle",
    "pearson_chi2",
]
