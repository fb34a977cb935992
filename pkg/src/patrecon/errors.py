"""Exception types shared across the package.

Each class carries an ``exit_code`` so the command line front end can map
failures onto its documented exit statuses without string matching.
"""


class PatError(Exception):
    exit_code = 1


class InvalidInput(PatError, ValueError):
    """Arguments that violate an operation's preconditions."""

    exit_code = 2


class ConstraintViolation(PatError, ValueError):
    """A mathematically required constraint does not hold (e.g. wavelet regularity r <= s)."""

    exit_code = 3


class MemoryBudgetExceeded(PatError, MemoryError):
    exit_code = 4

    def __init__(self, requested: int, budget: int, what: str = "allocation"):
        self.requested = requested
        self.budget = budget
        super().__init__(
            f"{what} needs {requested / 2**30:.3f} GiB which exceeds the "
            f"memory budget of {budget / 2**30:.3f} GiB"
        )


class GmresBreakdown(PatError, ArithmeticError):
    """Raised when the operator produces non-finite output during GMRES."""


class PatbError(PatError, IOError):
    """Base class for malformed PATB files; ``code`` identifies the failure."""

    code = "patb"
    exit_code = 2


class BadMagic(PatbError):
    code = "bad_magic"


class VersionMismatch(PatbError):
    code = "version_mismatch"


class WrongKind(PatbError):
    code = "wrong_kind"


class Truncated(PatbError):
    code = "truncated"
