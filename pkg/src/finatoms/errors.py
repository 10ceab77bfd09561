"""Exception hierarchy shared by all finatoms modules.

Exit codes follow the CLI contract: 2 for parse errors, 3 for
precondition violations, 4 for internal invariant failures.
"""


class FinatomsError(Exception):
    exit_code = 4


class ParseError(FinatomsError):
    exit_code = 2

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DuplicateObservation(ParseError):
    pass


class NonPositivePrice(ParseError):
    pass


class PreconditionError(FinatomsError):
    exit_code = 3


class TooFewSeries(PreconditionError):
    pass


class SeedMasked(PreconditionError):
    pass


class HistoryTooShort(PreconditionError):
    pass


class EmptyMatrix(PreconditionError):
    pass


class AtomNotFromMatrix(PreconditionError):
    pass


class UnknownAtom(PreconditionError):
    pass


class NoStrongAtoms(PreconditionError):
    pass


class BadThresholds(PreconditionError):
    pass


class InvalidSpec(PreconditionError):
    pass


class InternalInvariantError(FinatomsError):
    exit_code = 4
