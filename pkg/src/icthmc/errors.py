"""Exception types shared across the package."""


class InputError(ValueError):
    """Malformed or inconsistent input (dimension mismatch, bad payload, ...)."""


class ValidationError(InputError):
    """One or more model/query invariants are violated.

    ``issues`` holds one human-readable line per violated invariant.
    """

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(self.issues))


class ConvergenceError(RuntimeError):
    """Step doubling did not reach the requested tolerance."""

    def __init__(self, message, gap, steps):
        super().__init__(message)
        self.gap = gap
        self.steps = steps


class UndefinedUpdateError(RuntimeError):
    """The observations have zero upper probability (or density)."""

    def __init__(self, message, regime):
        super().__init__(message)
        self.regime = regime


class GuardExceededError(InputError):
    """An enumeration would be too large to carry out."""
