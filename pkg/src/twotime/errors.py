"""Exception types raised by the two-time toolkit."""


class TwoTimeError(Exception):
    """Base class for all package errors."""


class NonCommensurate(TwoTimeError, ValueError):
    pass


class NonPositive(TwoTimeError, ValueError):
    pass


class NonPositiveSigma(TwoTimeError, ValueError):
    pass


class NonPositiveSeparation(TwoTimeError, ValueError):
    pass


class QuadratureFailure(TwoTimeError, RuntimeError):
    pass


class OutOfGrid(TwoTimeError, IndexError):
    pass


class GridMismatch(TwoTimeError, ValueError):
    pass


class Overflow(TwoTimeError, OverflowError):
    pass


class DimensionTooLarge(TwoTimeError, ValueError):
    pass


class Diverged(TwoTimeError, RuntimeError):
    pass


class NonFinite(TwoTimeError, FloatingPointError):
    pass


class EndpointDependent(TwoTimeError, ValueError):
    """The energy limit varies with the sampled end points beyond tolerance."""

    def __init__(self, spread, W, fraction):
        self.spread = spread
        self.W = W
        self.fraction = fraction
        super().__init__(
            f"endpoint spread {spread:.3e} exceeds {fraction:.1%} of |W|={abs(W):.3e}")
