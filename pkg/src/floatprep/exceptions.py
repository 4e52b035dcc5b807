"""Exception hierarchy shared across the package and the service layer."""


class FloatprepError(Exception):
    """Base class for all package errors."""


class UnsupportedValueError(FloatprepError):
    """Value class outside the supported domain (zero, subnormal, infinite, NaN)."""


class UnsupportedDataError(FloatprepError):
    """Dataset that no transform parameter can handle (e.g. too wide, out of plan range)."""


class InfeasibleTransformError(FloatprepError):
    """No transform parameter satisfies the configured error bound."""


class UnadjustableError(FloatprepError):
    """Neither one-step neighbour of a product reaches the required trailing zeros."""


class LosslessInfeasibleError(FloatprepError):
    """Power-of-ten scaling would leave the exact-integer range of float32."""


class BoundViolationError(FloatprepError):
    """Recovered data exceeds the configured error bound; always a correctness failure."""


class CorruptBlobError(FloatprepError):
    """Compressed blob or archive fails magic/length validation."""


class ExternalCompressorError(FloatprepError):
    """Child-process compressor failed, timed out, or did not round-trip."""


class IngestError(FloatprepError):
    """CSV parse failure; carries row/column coordinates in the message."""


class ConfigError(FloatprepError):
    """Invalid run configuration (flags, backend command, column selection)."""
