"""Exception hierarchy.

Every domain failure derives from :class:`CalcError` so the CLI can map it
to exit code 1 without catching programming errors.
"""


class CalcError(Exception):
    """Base class for domain errors raised by the library."""


class NotExact(CalcError):
    """A polynomial handed to an inverse derivative is not a total derivative."""

    def __init__(self, message: str = "polynomial is not an exact total derivative", *, where: str | None = None):
        self.where = where
        if where:
            message = f"{message} [{where}]"
        super().__init__(message)


class InsufficientCutoff(CalcError):
    """An operand is not known to enough depth for the requested exactness."""


class SelfReferential(CalcError):
    """A substitution binding mentions one of the bound variables."""


class MissingFlow(CalcError):
    """A prolongation was requested without a flow for some variable."""


class ZeroPolynomial(CalcError):
    """The zero polynomial has no weight."""


class NegativeJ(CalcError, ValueError):
    """Binomial lower index must be non-negative."""


class BadIndex(CalcError, ValueError):
    """Operator indices outside their admissible range."""


class TooNonlocal(CalcError):
    """An operator with degrees below -1 cannot act exactly on a polynomial."""


class NonlinearPivot(CalcError):
    """The variable being solved for does not occur linearly with a numeric coefficient."""


class ParseError(CalcError, ValueError):
    """Malformed canonical text or interchange data."""
