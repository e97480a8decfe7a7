"""Exception hierarchy shared by all porelab modules.

The CLI maps these onto exit codes: ParameterError -> 1, DataError -> 2,
ConvergenceError -> 3.
"""


class PorelabError(Exception):
    """Base class for all porelab errors."""


class ParameterError(PorelabError):
    """An argument violates a documented precondition."""


class DataError(PorelabError):
    """Input data is malformed, inconsistent or non-finite."""


class FormatError(DataError):
    """A record file is unreadable: bad magic, version, truncation, checksum."""


class ConvergenceError(PorelabError):
    """The solver diverged or exhausted its iteration budget.

    Carries the iteration count and, for budget exhaustion, the partial
    velocity field so callers can inspect or log it.
    """

    def __init__(self, message, iteration=None, partial_field=None):
        super().__init__(message)
        self.iteration = iteration
        self.partial_field = partial_field
