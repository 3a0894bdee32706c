"""Exception types shared across the package."""


class IdentificationError(Exception):
    """Base class for all errors raised by greybox_narx."""


class DataError(IdentificationError):
    """Input data cannot support the requested operation."""


class NumericalError(IdentificationError):
    """A computation is numerically ill-posed."""


class SeriesTooShort(DataError):
    pass


class SplitTooSmall(DataError):
    pass


class DegenerateStaticGain(NumericalError):
    """Output cluster coefficients sum to (almost) one; no unique steady state."""


class NotStaticPolynomial(NumericalError):
    """Structure contains clusters whose steady state is not polynomial in u."""


class RankDeficient(NumericalError):
    pass


class Diverged(NumericalError):
    pass


class ArchiveTooSmall(IdentificationError):
    pass


class ConfigError(IdentificationError):
    """Invalid pipeline configuration or missing referenced file."""
