"""Stable O(Np)-O(Np^2) algebra with symmetric semiseparable-plus-diagonal
matrices in the Givens-vector representation, applied to kernel-based
regularized system identification."""

from .errors import (
    AllEvaluationsFailed,
    DegenerateDiagonal,
    DegenerateReference,
    GivsepError,
    NotPositiveDefinite,
    SingularYW,
)
from .kernels import InputSignal, KernelSpec
from .reps import (
    DiagVec,
    GRMatrix,
    GvRCholesky,
    GvRMatrix,
    InvCholRep,
    TimeGrid,
    gr_to_dense,
    gr_to_gvr,
    gvr_to_dense,
)
from .sysid import CriterionReport, IdentProblem, LTISystem

__version__ = "0.1.0"

__all__ = [
    "AllEvaluationsFailed", "DegenerateDiagonal", "DegenerateReference",
    "GivsepError", "NotPositiveDefinite", "SingularYW",
    "InputSignal", "KernelSpec",
    "DiagVec", "GRMatrix", "GvRCholesky", "GvRMatrix", "InvCholRep",
    "TimeGrid", "gr_to_dense", "gr_to_gvr", "gvr_to_dense",
    "CriterionReport", "IdentProblem", "LTISystem",
    "__version__",
]
