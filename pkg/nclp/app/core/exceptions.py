"""
Exception hierarchy shared by all lab services
"""

from typing import Optional


class LabError(Exception):
    """Base class of every error raised by the lab"""


class DomainError(LabError, ValueError):
    """An input lies outside the domain of an operation"""


class NotHermitianError(DomainError):
    def __init__(self, asymmetry: float, tol: float):
        self.asymmetry = asymmetry
        self.tol = tol
        super().__init__(f"Matrix is not Hermitian: asymmetry {asymmetry:.3e} > {tol:.3e}")


class NotPositiveError(DomainError):
    def __init__(self, min_eigenvalue: float, tol: float):
        self.min_eigenvalue = min_eigenvalue
        self.tol = tol
        super().__init__(
            f"Matrix is not positive semidefinite: smallest eigenvalue {min_eigenvalue:.3e} < -{tol:.3e}"
        )


class DimensionMismatchError(LabError, ValueError):
    def __init__(self, left: int, right: int):
        self.left = left
        self.right = right
        super().__init__(f"Dimension mismatch: {left} vs {right}")


class EigenSolverError(LabError):
    def __init__(self, message: str, residual: Optional[float] = None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)


class QuadratureError(LabError):
    """Quadrature self-test failure or ill-conditioned resolvent"""


class ContourError(LabError):
    def __init__(self, message: str, margin: float):
        self.margin = margin
        super().__init__(f"{message} (margin {margin:.3e})")


class ExpectationError(LabError):
    """Invalid conditional expectation data"""


class NonCommutativeRangeError(ExpectationError):
    """The operation needs a conditional expectation with commutative range"""


class GeneratorError(LabError):
    """Generator construction or invariant failure"""


class ResolventError(LabError):
    def __init__(self, message: str, condition: float):
        self.condition = condition
        super().__init__(f"{message} (condition estimate {condition:.3e})")


class InvariantViolation(LabError):
    """A numerical assertion of a check did not hold"""

    def __init__(self, check: str, value: float, threshold: float, detail: str = ""):
        self.check = check
        self.value = value
        self.threshold = threshold
        message = f"{check}: value {value:.6e} violates threshold {threshold:.6e}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class ConfigError(LabError, ValueError):
    """Invalid campaign configuration or command-line operands"""
