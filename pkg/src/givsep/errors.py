"""Exception types shared across the package."""


class GivsepError(Exception):
    """Base class for all givsep-specific errors."""


class NotPositiveDefinite(GivsepError):
    """The matrix handed to a Cholesky routine is not numerically positive definite.

    Carries the (0-based) row index at which the pivot failed and the
    offending radicand value.
    """

    def __init__(self, index, radicand, context=""):
        self.index = index
        self.radicand = radicand
        self.context = context
        msg = (
            f"leading minor of order {index + 1} is not positive definite "
            f"(radicand {radicand:.6e})"
        )
        if context:
            msg = f"{msg} [{context}]"
        super().__init__(msg)


class SingularYW(GivsepError):
    """Y'W - I_p in the generator-based inverse-factor formula is numerically singular."""

    def __init__(self, cond):
        self.cond = cond
        super().__init__(
            f"Y'W - I is numerically singular (condition estimate {cond:.6e} > 1e15); "
            "the generator-based inverse Cholesky representation is unreliable"
        )


class DegenerateDiagonal(GivsepError):
    """A diagonal entry required to be strictly positive is zero or negative."""

    def __init__(self, index, value):
        self.index = index
        self.value = value
        super().__init__(
            f"diagonal entry d[{index}] = {value:.6e} is not strictly positive"
        )


class DegenerateReference(GivsepError):
    """The reference impulse response is constant, so the fit metric is undefined."""


class AllEvaluationsFailed(GivsepError):
    """Every hyper-parameter grid point raised; no starting point for the local search."""
