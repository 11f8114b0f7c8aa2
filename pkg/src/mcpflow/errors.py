"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid argument, malformed input file, or inconsistent catalog."""


class SolverError(ArithmeticError):
    """The optimizer produced a non-finite loss or iterate."""
