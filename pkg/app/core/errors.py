"""Exception hierarchy shared by the services, routers and the CLI.

Everything derives from ``ValueError`` so callers that only know the generic
"bad input" contract keep working.
"""
from typing import Optional, Sequence


class LSystemError(ValueError):
    """Base class for all domain errors."""


class QuadratureError(LSystemError):
    def __init__(self, message: str, achieved_error: float):
        super().__init__(f"{message} (achieved error estimate {achieved_error:.3e})")
        self.achieved_error = achieved_error


class PoleError(LSystemError):
    """An evaluator hit a denominator inside the pole exclusion radius."""

    def __init__(self, z: complex, where: str, node: Optional[int] = None):
        location = f" at node {node}" if node is not None else ""
        super().__init__(f"pole of {where} at z={z!r}{location}")
        self.z = z
        self.where = where
        self.node = node


class ConventionViolation(LSystemError):
    pass


class NormalizationMismatch(LSystemError):
    def __init__(self, measured: float, required: float):
        super().__init__(
            f"normalization mismatch: measured L={measured:.17g}, "
            f"required (1-kappa)/(1+kappa)={required:.17g}"
        )
        self.measured = measured
        self.required = required


class RoleMismatch(LSystemError):
    pass


class InadmissibleParameter(LSystemError):
    def __init__(self, message: str, admissible: Sequence[str] = ()):
        if admissible:
            message = f"{message}; admissible: {', '.join(admissible)}"
        super().__init__(message)
        self.admissible = tuple(admissible)


class ConsistencyError(LSystemError):
    pass


class NoComparablePoints(LSystemError):
    pass


class ModelSizeError(LSystemError):
    pass
