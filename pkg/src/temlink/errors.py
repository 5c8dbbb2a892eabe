"""Exception hierarchy shared by all temlink modules."""


class TemlinkError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(TemlinkError, ValueError):
    pass


class InvalidInterval(InvalidArgument):
    pass


class InvalidFiringRecord(InvalidArgument):
    pass


class DimensionMismatch(InvalidArgument):
    pass


class BiasTooSmall(TemlinkError):
    """Encoder bias does not dominate the signal amplitude."""

    def __init__(self, bias, peak):
        self.bias = bias
        self.peak = peak
        super().__init__(f"bias {bias:g} must exceed sup|r(t)| = {peak:g}")


class InsufficientPilotSpikes(TemlinkError):
    pass


class InsufficientDataAnchor(TemlinkError):
    pass


class RankDeficiency(TemlinkError):
    """Weighted ZF system cannot be solved reliably."""

    def __init__(self, message, condition=float("inf")):
        self.condition = condition
        super().__init__(f"{message} (condition estimate {condition:.3g})")


class SearchSpaceTooLarge(TemlinkError):
    pass


class ConfigError(TemlinkError):
    pass
