"""Exception hierarchy.

``DataError`` covers problems with the input (the CLI maps these to exit
code 2); ``NumericalError`` covers estimation failures (exit code 3).
"""


class StructestError(Exception):
    def __reduce__(self):
        return (type(self), getattr(self, "_init_args", self.args))


class DataError(StructestError):
    pass


class NumericalError(StructestError):
    pass


class EmptyCell(DataError):
    def __init__(self, indicator, group):
        self._init_args = (indicator, group)
        self.indicator = indicator
        self.group = group
        super().__init__(
            f"no non-missing observations for indicator {indicator!r} in group {group!r}"
        )


class InsufficientGroups(DataError):
    pass


class StratumTooSmall(DataError):
    def __init__(self, label, reason=""):
        self._init_args = (label, reason)
        self.label = label
        msg = f"stratum {label!r} cannot be tested"
        super().__init__(f"{msg}: {reason}" if reason else msg)


class InvalidSpec(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        self._init_args = (message, row, column)
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class MissingColumn(ParseError):
    pass


class NonNumericIndicator(ParseError):
    pass


class IoError(StructestError, OSError):
    pass


class Unsupported(StructestError):
    pass


class DegenerateInitialization(NumericalError):
    pass


class AllMeansZero(DegenerateInitialization):
    pass


class ZeroDenominator(NumericalError):
    def __init__(self, kind, index):
        self._init_args = (kind, index)
        self.kind = kind
        self.index = index
        super().__init__(f"zero denominator in {kind} update at index {index}")


class NotConverged(NumericalError):
    def __init__(self, fit, tol):
        self._init_args = (fit, tol)
        self.fit = fit
        super().__init__(
            f"alternating fit did not reach tol={tol:g} in {fit.iterations} iterations"
        )


class ZeroFullVariance(NumericalError):
    pass


class ZeroReference(NumericalError):
    pass
