"""Exception hierarchy shared by every wsumq module."""


class WsumqError(Exception):
    """Base class; the CLI maps these to exit status 1."""


class ParseError(WsumqError):
    def __init__(self, message, line=None, column=None, expected=()):
        self.line = line
        self.column = column
        self.expected = tuple(expected)
        where = f"{line}:{column}: " if line is not None else ""
        hint = f" (expected {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{where}{message}{hint}")


class ValidationError(WsumqError):
    pass


class UnknownBuiltin(WsumqError):
    pass


class UnboundVariable(WsumqError):
    pass


class UnknownSymbol(WsumqError):
    pass


class IterationBoundExceeded(WsumqError):
    pass


class PreconditionUnsatisfiable(WsumqError):
    pass


class ArityCapExceeded(WsumqError):
    pass


class DimensionMismatch(WsumqError):
    pass


class UnsupportedWeight(WsumqError):
    pass
