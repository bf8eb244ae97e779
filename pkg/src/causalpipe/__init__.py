"""Graph-based causal effect identification, estimation and refutation."""

__version__ = "0.1.0"

from .dataset import Dataset, SyntheticSpec, generate_linear_dataset, load_csv
from .errors import CausalError
from .estimation import EffectEstimate, EstimationConfig, estimate_effect
from .graph import CausalGraph, d_separated
from .identification import Estimand, IdentificationResult, identify_effect
from .parsing import parse_dot, parse_gml
from .refutation import RefutationResult, RefuterConfig, run_refuters

__all__ = [
    "CausalError",
    "CausalGraph",
    "Dataset",
    "EffectEstimate",
    "Estimand",
    "EstimationConfig",
    "IdentificationResult",
    "RefutationResult",
    "RefuterConfig",
    "SyntheticSpec",
    "d_separated",
    "estimate_effect",
    "generate_linear_dataset",
    "identify_effect",
    "load_csv",
    "parse_dot",
    "parse_gml",
    "run_refuters",
]
