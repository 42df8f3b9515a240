"""Exception hierarchy.

Each class carries the CLI exit code it maps to, so the command line layer
can translate failures without a lookup table.
"""


class BosonicError(Exception):
    exit_code = 1


class ContractViolation(BosonicError, ValueError):
    """An input broke a documented precondition (shape, Hermiticity, ...)."""

    exit_code = 3


class NumericalError(BosonicError, ArithmeticError):
    exit_code = 1


class PhysicalityError(ContractViolation):
    """An oracle's declared energy profile is not usable (non-finite, decreasing)."""


class CertificateFailure(BosonicError):
    """A measured quantity violated one of the truncation inequalities."""

    exit_code = 2


class TheoremViolation(CertificateFailure):
    """A sampled distance exceeded the guaranteed accuracy."""


class ConfigurationError(BosonicError):
    exit_code = 3


class ConvergenceFailure(BosonicError):
    """Solovay-Kitaev recursion stopped contracting."""

    exit_code = 2


class ResourceLimitError(BosonicError):
    exit_code = 4
