"""Exception hierarchy shared across the package."""


class NFoldError(Exception):
    """Base class for all package-specific errors."""


class ParseError(NFoldError, ValueError):
    """Malformed expression or model-file text.

    Carries ``position`` (character offset) when raised by the tokenizer
    or the recursive-descent parser.
    """

    def __init__(self, message, position=None):
        super().__init__(message if position is None
                         else f"{message} (at position {position})")
        self.position = position


class EvaluationError(NFoldError, ArithmeticError):
    """Evaluation failed at a point (singularity or non-finite result)."""

    def __init__(self, message, point=None):
        super().__init__(message if point is None
                         else f"{message} (at q = {point})")
        self.point = point


class QuadratureError(EvaluationError):
    """Adaptive quadrature of an integral node did not converge."""


class SMatrixError(NFoldError):
    """Finite-matrix extraction failed (vanishing denominators or a
    failed entry-constancy certificate)."""


class CollocationError(NFoldError):
    """Collocation solve rejected: ill-conditioned system or the basis is
    not invariant under the Hamiltonian."""

    def __init__(self, message, condition_number=None, residual=None):
        super().__init__(message)
        self.condition_number = condition_number
        self.residual = residual


class GridError(NFoldError):
    """Grid eigensolver precondition failed (non-real potential,
    unresolvable level request, inconsistent domain)."""


class ModelError(NFoldError):
    """Model construction rejected (invalid inputs such as a vanishing
    first-order supercharge coefficient or h' identically zero)."""
