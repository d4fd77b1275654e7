"""Exception types shared across the package."""


class KoopeqError(Exception):
    """Base class for package-specific failures."""


class ConfigError(KoopeqError):
    """Invalid configuration or precondition violation at the harness level."""


class DivergenceError(KoopeqError):
    """Numerical blow-up during integration or rollout.

    Carries the step index (rollouts) or simulation time (integration)
    at which the guard tripped.
    """

    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time


class UndefinedFrequencyError(KoopeqError):
    """Dominant-mode amplitude too small to define a wave frequency."""
