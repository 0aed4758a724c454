"""Exception types shared across the package."""


class LiftedError(Exception):
    """Base class for all errors raised by this package."""

    category = "error"


class StructuralError(LiftedError):
    """A value does not fit the shape it is combined with."""

    category = "structural"


class PreconditionError(LiftedError):
    """An operator was applied where its preconditions do not hold.

    ``enabler`` names the operator that would make the call legal, when known.
    """

    category = "precondition"

    def __init__(self, message, enabler=None, detail=None):
        super().__init__(message)
        self.enabler = enabler
        self.detail = detail


class InputError(LiftedError):
    category = "input"


class ParseError(InputError):
    category = "parse"

    def __init__(self, message, line=None, column=None):
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)
        self.line = line
        self.column = column


class SizeError(LiftedError):
    """The ground model is larger than the configured cap."""

    category = "size"


class NumericError(LiftedError):
    category = "numeric"
