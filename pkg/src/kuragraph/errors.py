"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    pass


class UnsupportedOperation(NotImplementedError):
    pass


class AssumptionsNotMet(ValueError):
    """Raised when a stability statement is requested for a density that is
    not even, continuous and nonincreasing on the positive half-line."""


class NumericalFailure(RuntimeError):
    pass


class ConfigError(ValueError):
    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
