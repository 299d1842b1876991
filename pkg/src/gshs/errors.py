"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A solver lost probability mass, diverged, or failed to converge."""
