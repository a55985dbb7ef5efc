"""Higher-order Fréchet derivatives of matrix functions via multiple operator integrals."""

from .errors import FrechetMoiError
from .experiments import (
    CommutativeModel,
    DiagonalModel,
    ExperimentReport,
    commutative_counterexample,
    list_experiments,
    mollifier_convergence,
    necessity_probe,
    norm_bound_probe,
    rank_one_check,
)
from .frechet import (
    DerivativeReport,
    differentiability_report,
    frechet_derivative,
    gateaux_fd,
    taylor_expand,
)
from .moi import MoiRequest, MultilinearResult, moi_evaluate, moi_symmetrized, taylor_remainder
from .scalar_fn import (
    Mollifier,
    ScalarFunction,
    builtin,
    divided_difference,
    eval_derivative,
    mollify,
    uc_modulus,
)
from .spectral import (
    SchattenIndex,
    SpectralData,
    apply_function,
    decompose,
    random_hermitian,
    schatten_norm,
)

__all__ = [
    "apply_function",
    "builtin",
    "commutative_counterexample",
    "CommutativeModel",
    "decompose",
    "DerivativeReport",
    "DiagonalModel",
    "differentiability_report",
    "divided_difference",
    "eval_derivative",
    "ExperimentReport",
    "frechet_derivative",
    "FrechetMoiError",
    "gateaux_fd",
    "list_experiments",
    "moi_evaluate",
    "moi_symmetrized",
    "MoiRequest",
    "Mollifier",
    "mollifier_convergence",
    "mollify",
    "MultilinearResult",
    "necessity_probe",
    "norm_bound_probe",
    "random_hermitian",
    "rank_one_check",
    "ScalarFunction",
    "schatten_norm",
    "SchattenIndex",
    "SpectralData",
    "taylor_expand",
    "taylor_remainder",
    "uc_modulus",
]

__version__ = "0.1.0"
