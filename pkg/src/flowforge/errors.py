"""Exception types shared across the package."""


class FlowForgeError(Exception):
    """Base class for all package errors."""


class InputError(FlowForgeError, ValueError):
    """Malformed or dimensionally inconsistent input."""


class ConfigError(FlowForgeError, ValueError):
    """Invalid experiment configuration (unknown/missing fields, bad values)."""


class DivergenceError(FlowForgeError, RuntimeError):
    """A trajectory left the admissible region (state norm above cutoff).

    Carries the index of the first offending step in ``step``.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class FitError(FlowForgeError, RuntimeError):
    """Least-squares fit failed (rank-deficient design matrix)."""

    def __init__(self, message, cond=None):
        super().__init__(message)
        self.cond = cond


class SolvabilityError(FlowForgeError, RuntimeError):
    """A coefficient system could not be solved to tolerance.

    Carries the coordinate ``j``, constraint multi-index ``k`` and the
    singular values of the offending matrix.
    """

    def __init__(self, message, j=None, k=None, singular_values=None):
        super().__init__(message)
        self.j = j
        self.k = k
        self.singular_values = singular_values


class SingularBlockError(FlowForgeError, RuntimeError):
    """A coupling block's scale vanished on the requested input."""

    def __init__(self, message, block_index=None, coordinate=None):
        super().__init__(message)
        self.block_index = block_index
        self.coordinate = coordinate


class PreconditionError(FlowForgeError, ValueError):
    """A documented operation precondition failed."""
