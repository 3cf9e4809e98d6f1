class DomainError(ValueError):
    """A precondition of a numerical operation was violated."""


class ConvergenceError(ArithmeticError):
    """A truncated series hit its term cap before reaching tolerance."""


class ValidationFailure(RuntimeError):
    """One or more acceptance criteria failed."""


# CLI exit codes
EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_CONVERGENCE = 3
