"""Exception types raised across the package."""


class CurvaturaError(Exception):
    """Base class for all package errors."""


class InvalidParameter(CurvaturaError, ValueError):
    pass


class UnsupportedExponents(CurvaturaError, ValueError):
    """Operation is only implemented for a specific (p, q) family member."""


class NoConvergence(CurvaturaError, RuntimeError):
    pass


class DegenerateNormalFrame(CurvaturaError, ValueError):
    """The two gradients are (numerically) linearly dependent."""


class TangentFrameDegenerate(CurvaturaError, ValueError):
    pass


class OutOfChart(CurvaturaError, ValueError):
    pass


class DegenerateCubic(CurvaturaError, ValueError):
    pass


class WindingAmbiguous(CurvaturaError, RuntimeError):
    pass


class NotAnUmbilic(CurvaturaError, ValueError):
    pass


class UmbilicGuard(CurvaturaError, ValueError):
    """The principal direction field is undefined (or too ill-conditioned) here."""


class TooCloseToPole(CurvaturaError, ValueError):
    pass


class RadialParallel(CurvaturaError, ValueError):
    pass


class WeldFailure(CurvaturaError, RuntimeError):
    pass


class CertificationFailure(CurvaturaError, RuntimeError):
    """A numerical or algebraic certificate did not hold."""
