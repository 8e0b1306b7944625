"""Exponential dichotomies and Fredholm properties of ``-d/dt + A(t)`` and its discrete reduction.

The most used names are re-exported here; the submodules hold the rest.
"""

__version__ = "0.1.0"

from . import config, errors  # noqa: E402
from .config import Tolerances, tolerances  # noqa: E402
from .dichotomy import (  # noqa: E402
    DichotomyRecord,
    continuous_record,
    halfline_dichotomy,
    user_record,
    verify_dichotomy,
)
from .errors import DichotomyLabError  # noqa: E402
from .evolution import (  # noqa: E402
    ContinuousCoefficients,
    DiscreteSequence,
    PiecewiseConstantPerturbed,
    propagate,
)
from .flows import (  # noqa: E402
    SelfadjointPath,
    commensurability_check,
    index_for_family,
    perturbation_invariance,
    piecewise_pipeline,
    random_vanishing_perturbation,
    spectral_flow,
)
from .fredholm import (  # noqa: E402
    FredholmNumbers,
    assemble_truncated_D,
    dichotomy_theorem_verify,
    index_of_D,
    kernel_basis,
    left_inverse_Dplus,
    node_operator,
    pair_vs_node_crosscheck,
)
from .problems import get_problem, list_problems  # noqa: E402
from .reduction import SampledFunction, WeightFunction, map_R, map_S, verify_correspondence  # noqa: E402
from .subspace import (  # noqa: E402
    Projector,
    Subspace,
    eigen_projection,
    fredholm_pair,
    relative_dimension,
    riesz_projection,
)

__all__ = [
    "__version__", "config", "errors", "Tolerances", "tolerances", "DichotomyLabError",
    "DichotomyRecord", "continuous_record", "halfline_dichotomy", "user_record", "verify_dichotomy",
    "ContinuousCoefficients", "DiscreteSequence", "PiecewiseConstantPerturbed", "propagate",
    "SelfadjointPath", "commensurability_check", "index_for_family", "perturbation_invariance",
    "piecewise_pipeline", "random_vanishing_perturbation", "spectral_flow",
    "FredholmNumbers", "assemble_truncated_D", "dichotomy_theorem_verify", "index_of_D",
    "kernel_basis", "left_inverse_Dplus", "node_operator", "pair_vs_node_crosscheck",
    "get_problem", "list_problems",
    "SampledFunction", "WeightFunction", "map_R", "map_S", "verify_correspondence",
    "Projector", "Subspace", "eigen_projection", "fredholm_pair", "relative_dimension",
    "riesz_projection",
]
