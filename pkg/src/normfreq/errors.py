"""Exception types shared across the package."""


class NormfreqError(Exception):
    """Base class for all package-specific errors."""


class NotCoprimeError(NormfreqError):
    """Multiplicative order requested for a base not coprime to the modulus."""


class InvalidDigitError(NormfreqError):
    """A digit outside the alphabet {0, ..., g-1} was fed to a counter."""


class ShapeMismatchError(NormfreqError):
    """Two counters with different (g, k) cannot be merged."""


class DegenerateInputError(NormfreqError):
    """A fit was requested on data that cannot support one."""


class CapacityError(NormfreqError):
    """A sieve or table would exceed the configured memory budget."""


class UnknownFunctionError(NormfreqError):
    """A composition-chain token does not name a known base function."""


class CacheFormatError(NormfreqError):
    """A cache file failed magic/limit validation."""
