"""
Exception and warning types shared by every qsphere module.

Everything raised on purpose derives from QSphereError so the CLI and the
FastAPI service can catch one class and map it to an exit code / HTTP status.
"""
from typing import Any, List, Optional


class QSphereError(Exception):
    """Root of all qsphere failures."""

    # HTTP status the service reports for this failure
    status_code = 422


class ConfigError(QSphereError):
    pass


# ==============================
# Domain / argument errors
# ==============================

class DomainError(QSphereError, ValueError):
    """Argument outside the domain where a formula is defined."""


class BranchError(DomainError):
    pass


class PoleError(DomainError):
    """Evaluation at the pole of a fractional linear map."""


class NotSelfDual(DomainError):
    pass


class NegativeDeterminant(DomainError):
    pass


class NotSkewSymmetric(DomainError):
    pass


# ==============================
# Numerical failures
# ==============================

class QuadratureFailure(QSphereError):
    """Adaptive quadrature did not reach the requested tolerance.

    The best estimate and its error bound are kept so callers can decide
    whether to use them anyway.
    """

    status_code = 500

    def __init__(self, message: str, estimate: Any = None, error: Optional[float] = None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class SolveFailure(QSphereError):
    status_code = 500


class EigensolverFailure(QSphereError):
    status_code = 500


class PairingFailure(QSphereError):
    status_code = 500

    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message)
        self.residual = residual


# ==============================
# Batch / harness failures
# ==============================

class BatchFailure(QSphereError):
    status_code = 500

    def __init__(self, message: str, failures: Optional[List[dict]] = None):
        super().__init__(message)
        self.failures = failures or []


class EmptyHistogram(QSphereError):
    pass


# ==============================
# Warnings
# ==============================

class BranchProximity(UserWarning):
    """Integration contour passes close to the branch point at gamma = 1."""


class AccuracyWarning(UserWarning):
    """Argument outside the documented accuracy envelope."""
