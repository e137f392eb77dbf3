class NoAcquisition(RuntimeError):
    """The folded timestamp histogram shows no superframe periodicity."""


class TooFewTicks(RuntimeError):
    """Not enough clock ticks survive to build a timebase."""


class Infeasible(ValueError):
    """No code dimension meets the target block error rate."""


class DecodeFailure(RuntimeError):
    """Received word lies outside the decoding radius."""
