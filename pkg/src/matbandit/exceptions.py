"""Exception types raised by the estimators and the experiment runner."""


class DegenerateFactorError(ValueError):
    """A factor Gram matrix is (numerically) singular."""


class EstimatorDivergenceError(FloatingPointError):
    """An estimate produced a non-finite value."""


class PropensityError(ValueError):
    """A propensity is outside the range an estimator can divide by."""


class TrialError(RuntimeError):
    """Failure inside a trial, annotated with the step at which it happened."""

    def __init__(self, step, cause):
        super().__init__(f"step {step}: {type(cause).__name__}: {cause}")
        self.step = step
        self.cause = cause
