"""Global sensitivity analysis toolkit: input distributions, designs, screening,
regression measures, Sobol' indices, polynomial surrogates and exploration datasets."""
from __future__ import annotations

from .distributions import InputSpace, TruncGumbel, TruncNormal, Triangular, Uniform
from .metamodel import Metamodel, fit_polynomial, sobol_via_metamodel
from .models import EvaluationSet, Model, builtin, evaluate, flood_model, flood_space
from .regression import regression_indices
from .sampling import lhs, monte_carlo, morris_trajectories, saltelli_design
from .screening import morris
from .sobol import SobolResult, estimate_sobol, sobol_analysis

__version__ = "0.1.0"

__all__ = [
    "EvaluationSet", "InputSpace", "Metamodel", "Model", "SobolResult", "Triangular", "TruncGumbel",
    "TruncNormal", "Uniform", "builtin", "estimate_sobol", "evaluate", "fit_polynomial", "flood_model",
    "flood_space", "lhs", "monte_carlo", "morris", "morris_trajectories", "regression_indices",
    "saltelli_design", "sobol_analysis", "sobol_via_metamodel",
]
