"""Exception hierarchy.

Input problems derive from :class:`InputError`; numerical breakdowns from
:class:`NumericalError`. The CLI maps these to exit codes 2 and 3.
"""


class MOGPError(Exception):
    pass


class InputError(MOGPError, ValueError):
    pass


class NumericalError(MOGPError, ArithmeticError):
    pass


class DimensionMismatch(InputError):
    pass


class ChannelOutOfRange(InputError):
    pass


class UnsupportedDimension(InputError):
    pass


class NonUniformGrid(InputError):
    pass


class TooFewPoints(InputError):
    pass


class DegenerateInput(InputError):
    pass


class MalformedRow(InputError):
    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}")
        self.line = line


class EmptyFile(InputError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class NonFiniteEvaluation(NumericalError):
    pass


class AllRestartsFailed(NumericalError):
    pass
