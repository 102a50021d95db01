"""Exception types shared across the package."""


class ChargePlanError(Exception):
    """Base class for all package-specific errors."""


class ModelError(ChargePlanError):
    """A physical model was given parameters outside its valid regime."""


class InstanceFormatError(ChargePlanError):
    """An instance or config file failed to parse or validate.

    Carries enough context (file, line, field) to locate the problem.
    """

    def __init__(self, message, *, path=None, line=None, field=None):
        parts = []
        if path is not None:
            parts.append(str(path))
        if line is not None:
            parts.append(f"line {line}")
        if field is not None:
            parts.append(f"field '{field}'")
        prefix = ": ".join(parts)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.path = path
        self.line = line
        self.field = field


class InfeasibleRouteError(ChargePlanError):
    """No route satisfies the budget constraint (not even the direct return)."""


class MissionOver(ChargePlanError):
    """Raised when the residual energy budget leaves no room to plan anything."""
