"""Exception hierarchy shared by all modules."""


class SfstError(Exception):
    """Base class for all library errors."""


class FormatError(SfstError, ValueError):
    """Malformed text input (automaton, symbol table, corpus, counts)."""

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where += str(source)
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class AutomatonError(SfstError, ValueError):
    """An automaton violates a structural invariant."""


class EmptyLanguageError(AutomatonError):
    """No accepting path survives."""


class SymbolTableMismatch(SfstError, ValueError):
    pass


class CoverageError(SfstError):
    """The source puts mass on a string the target topology rejects."""

    def __init__(self, message, witness=None):
        self.witness = witness
        super().__init__(message)


class ConvergenceError(SfstError, ArithmeticError):
    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)


class CyclicError(SfstError):
    """An acyclic input was required."""


class CountError(SfstError, ValueError):
    """Counts are inconsistent (large negatives, bad alignment)."""


class SampleTruncated(SfstError):
    def __init__(self, message, prefix=None):
        self.prefix = prefix
        super().__init__(message)
