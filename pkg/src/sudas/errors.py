"""Exception types raised across the package."""


class ConfigError(ValueError):
    """Invalid scenario or solver configuration.

    ``key`` holds the dotted path of the offending entry when known
    (e.g. ``"scenario.n_streams"``).
    """

    def __init__(self, message, key=None):
        self.key = key
        if key is not None:
            message = f"{key}: {message}"
        super().__init__(message)


class NumericalInputError(ValueError):
    """Channel data contains NaN or inf."""


class NumericalError(ArithmeticError):
    """A matrix that must be inverted is numerically singular."""


class RankError(ValueError):
    """More streams requested than the channel rank supports."""


class UnboundedError(ArithmeticError):
    """A power update has no finite maximizer (zero dual price)."""


class SolverError(RuntimeError):
    """Dual search could not bracket the power budget."""
