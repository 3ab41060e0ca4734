"""Exception hierarchy shared by all gibbs_tree modules."""


class GibbsTreeError(Exception):
    """Base class for every error raised by this package."""


class DomainError(GibbsTreeError, ValueError):
    """An argument lies outside the domain the routine is defined on."""


class InvalidKernel(GibbsTreeError, ValueError):
    pass


class InvalidParams(GibbsTreeError, ValueError):
    pass


class NonFiniteIntegrand(GibbsTreeError, FloatingPointError):
    pass


class RuleMismatch(GibbsTreeError, ValueError):
    """A grid function was combined with a quadrature rule it is not bound to."""


class DegenerateNormalizer(GibbsTreeError, ZeroDivisionError):
    pass


class ZeroAtOrigin(GibbsTreeError, ZeroDivisionError):
    pass


class NotAFixedPoint(GibbsTreeError, ValueError):
    pass


class InvalidOrder(GibbsTreeError, ValueError):
    pass


class NoBracket(GibbsTreeError, RuntimeError):
    pass


class DenominatorUnderflow(GibbsTreeError, FloatingPointError):
    pass


class NotAdmissible(GibbsTreeError, ValueError):
    pass


class MissingRecord(GibbsTreeError, ValueError):
    pass


class NormalizationFailure(GibbsTreeError, RuntimeError):
    pass


class StationarityFailure(GibbsTreeError, RuntimeError):
    """The sampling densities failed the compatibility self-check."""
