"""Exception types raised across the toolkit."""


class VirSDDError(Exception):
    """Base class for all toolkit errors."""


class DomainError(VirSDDError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DelayRangeError(VirSDDError, ValueError):
    """A delay evaluator produced a non-finite or out-of-range value."""


class UnsupportedFamilyError(VirSDDError, TypeError):
    """The operation is not defined for this delay family or parameter set."""


class OutOfDomainError(DomainError):
    """History lookup outside ``[t0 - h, t_last]``."""


class StepFailureError(VirSDDError, RuntimeError):
    """The in-step fixed-point iteration did not converge."""

    def __init__(self, t, residual):
        self.t = t
        self.residual = residual
        super().__init__(
            f"fixed-point iteration failed at t={t:.17g} (residual {residual:.3e})"
        )


class BlowupError(VirSDDError, RuntimeError):
    """The numerical state became non-finite."""

    def __init__(self, t):
        self.t = t
        super().__init__(f"non-finite state at t={t:.17g}")


class HypothesisError(VirSDDError, ValueError):
    """A parameter hypothesis needed for the interior equilibrium fails."""

    def __init__(self, name, lhs, rhs):
        self.name = name
        self.lhs = lhs
        self.rhs = rhs
        super().__init__(f"hypothesis {name} violated: {lhs:.10g} > {rhs:.10g} is false")


class ConfigError(VirSDDError, ValueError):
    """Malformed run configuration."""

    def __init__(self, message, line=None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
