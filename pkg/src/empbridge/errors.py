"""Exception hierarchy.

Two families matter to callers: ``InputError`` (bad data, bad flags, bad
file; CLI exit code 2) and ``DegeneracyError`` (the statistics broke down on
valid input; CLI exit code 1).
"""


class EmpbridgeError(Exception):
    """Base class for all package errors."""


class InputError(EmpbridgeError):
    """Invalid input: malformed files, bad columns, out-of-range arguments."""


class DegeneracyError(EmpbridgeError):
    """Statistical degeneracy: the test is undefined for this input."""


class NotPositiveDefinite(DegeneracyError):
    """A matrix required to be SPD failed its Cholesky factorization."""


class RankDeficient(DegeneracyError):
    """The design matrix does not have full column rank."""


class DegenerateResiduals(DegeneracyError):
    """All residuals are zero; the bridge is undefined."""


class SingularCovariance(DegeneracyError):
    """The grid covariance matrix Q is numerically singular."""


class MissingOrderKey(InputError):
    """An ordering operation was requested but no order key is present."""


class OutOfDomain(InputError):
    """A function argument lies outside its domain."""


class InvalidDegrees(InputError):
    """Requested degrees of freedom outside the valid range 1..n-1."""


class InvalidDataset(InputError):
    """Dataset construction failed validation."""


class InvalidSpec(InputError):
    """A simulation model specification is inconsistent."""


class UnsupportedSpec(InputError):
    """No closed-form theoretical kernel is implemented for this spec."""


class ParseError(InputError):
    """CSV structure error, with row/column location where known."""


class NonNumericField(ParseError):
    """A CSV field failed to parse as a finite number."""


class DuplicateColumn(ParseError):
    """The CSV header repeats a column name."""
