class NumericalFailure(RuntimeError):
    """A solver could not meet its accuracy contract."""


class PropagatorAccuracyError(NumericalFailure):
    pass


class StepLimitExceeded(NumericalFailure):
    pass


class NotBracketedError(ValueError):
    """A root/threshold search was started on an interval that does not bracket the target."""

    def __init__(self, message: str, lo_value: float, hi_value: float):
        super().__init__(f"{message} (objective at bounds: {lo_value:.12g}, {hi_value:.12g})")
        self.lo_value = lo_value
        self.hi_value = hi_value
