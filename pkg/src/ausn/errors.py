"""Exception hierarchy shared across the package."""


class AusnError(Exception):
    """Base class for all errors raised by this package."""


class LayoutError(AusnError, ValueError):
    """A bit layout is malformed (width mismatch or field bounds)."""


class CodeError(AusnError, ValueError):
    """A code word does not fit its layout or violates a code invariant."""


class ValidationError(AusnError, ValueError):
    """Input data is non-finite, empty or otherwise unusable."""


class DegenerateTensorError(ValidationError):
    """The tensor has no nonzero element, so no scale exponent exists."""


class PayloadError(AusnError, ValueError):
    """A serialized payload is truncated or internally inconsistent."""


class FormatError(AusnError, ValueError):
    """A file header is malformed or describes an unsupported layout."""
