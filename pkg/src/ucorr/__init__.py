"""uCorr: a nonparametric dependence coefficient from trees that tell a sample apart from its permutations."""
__version__ = "0.1.0"

from .estimators import SecondOrderTree, UCorr
from .forest import ForestConfig, ScoreTable, compute_rho, ucorr
from .inference import Method, NullParams, TestResult, mann_whitney_test, null_variance, p_value_analytic, ucorr_test
from .rank_space import RawSample
from ._validation import ValidationError

__all__ = [
    "ForestConfig", "Method", "NullParams", "RawSample", "ScoreTable", "SecondOrderTree", "TestResult",
    "UCorr", "ValidationError", "compute_rho", "mann_whitney_test", "null_variance", "p_value_analytic",
    "ucorr", "ucorr_test",
]
