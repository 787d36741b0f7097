"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid scenario or experiment configuration."""


class InfeasibleError(RuntimeError):
    """The requested operating point cannot be met with the given power budget."""


class NumericalError(RuntimeError):
    """A numerical routine failed to produce a trustworthy result."""


class SolverError(NumericalError):
    """A conic solve did not return an optimal solution."""

    def __init__(self, message, status=None, iteration=None):
        self.status = status
        self.iteration = iteration
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        if status is not None:
            message = f"{message} [status={status}]"
        super().__init__(message)
