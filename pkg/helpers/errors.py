"""
errors.py: Exception hierarchy shared by the analyzer.
Validation problems map to CLI exit code 2, numeric failures to exit code 3.
"""

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3


class SirfError(Exception):
    """Base class for every error raised by the analyzer."""

    exit_code = EXIT_NUMERIC


class ValidationError(SirfError, ValueError):
    """Input or precondition failure (bad spec file, bad parameter, bad state)."""

    exit_code = EXIT_VALIDATION


class ExprSyntaxError(ValidationError):
    """
    Raised by the expression parser.

    Attributes:
        offset (int): Byte offset in the source text where parsing failed.
        expected (frozenset): Tokens that would have been accepted there.
    """

    def __init__(self, message, offset, expected=()):
        self.offset = offset
        self.expected = frozenset(expected)
        detail = f" (expected one of: {', '.join(sorted(self.expected))})" if self.expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class UnknownIdentifierError(ValidationError):
    """An identifier that is neither R, k, pi nor a known function."""

    def __init__(self, name, offset):
        self.name = name
        self.offset = offset
        super().__init__(f"Unknown identifier '{name}' at offset {offset}")


class SpecFileError(ValidationError):
    """A model spec file or report that does not match its schema."""


class NumericError(SirfError, ArithmeticError):
    """A failure while computing (domain violation, underflow, broken construction)."""

    exit_code = EXIT_NUMERIC


class ExprDomainError(NumericError):
    """
    Evaluation left the domain of an elementary function.

    Attributes:
        node: The expression node whose evaluation failed.
    """

    def __init__(self, message, node=None):
        self.node = node
        suffix = f" in '{node}'" if node is not None else ""
        super().__init__(f"{message}{suffix}")


class PoleError(NumericError):
    """Evaluation of g too close to its pole at (k-1)/k."""


class StepUnderflowError(NumericError):
    """The adaptive integrator could not meet its tolerance above the minimum step."""


class ConstructionError(NumericError):
    """A scenario model failed its post-construction validation."""


class InvarianceViolation(NumericError):
    """A trajectory left the invariant simplex by more than the tolerance."""
