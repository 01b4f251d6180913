"""
Exception types shared by the extension library
All of them derive from builtin exceptions so callers can catch broadly
"""

from typing import Optional


class DimensionError(ValueError):
    """Shapes, bases or grids of the operands do not match"""


class AdmissibilityError(ValueError):
    """A perturbation factor is not in the required kernel"""

    def __init__(self, message: str, index: int, kind: str = 'range'):
        super().__init__(f"{message} ({kind} function #{index})")
        self.index = index
        self.kind = kind


class UnsupportedRepresentationError(NotImplementedError):
    """The operation needs a closed form that the operand does not carry"""


class SpecError(ValueError):
    """Semantically invalid spec document"""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        location = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(f"{location}{message}")
        self.line = line
        self.column = column
        self.reason = message


class SpecSyntaxError(SpecError):
    """Malformed spec or boundary-condition text"""


class ClassificationError(ValueError):
    """Boundary matrix cannot be classified (rank deficient)"""


class SingularSystemError(RuntimeError):
    """A small matching system has no unique solution"""

    def __init__(self, message: str, multiplier: complex):
        super().__init__(f"{message} (multiplier {multiplier:.6g})")
        self.multiplier = multiplier


class EigenConvergenceError(RuntimeError):
    """Eigen-decomposition failed or a pair exceeds the residual tolerance"""

    def __init__(self, message: str, index: int):
        super().__init__(f"{message} (eigenpair #{index})")
        self.index = index
