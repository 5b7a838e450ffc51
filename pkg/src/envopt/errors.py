"""Exception types shared across the package."""


class EnvoptError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(EnvoptError, ValueError):
    """Rejected input: domain violations, malformed data, shape mismatches."""


class CapabilityError(EnvoptError, TypeError):
    """Requested operation is not defined for this kind/family combination."""


class MonotonicityError(EnvoptError, RuntimeError):
    """An update step increased the objective it was contracted to decrease."""

    def __init__(self, step: str, before: float, after: float):
        self.step = step
        self.before = before
        self.after = after
        super().__init__(
            f"step {step!r} increased the objective from {before!r} to {after!r}"
        )


class ConvergenceError(EnvoptError, RuntimeError):
    """A fit failed to converge and strict mode was requested."""
