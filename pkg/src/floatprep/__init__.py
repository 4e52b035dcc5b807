"""Error-bounded float32 preprocessing for better time-series compression."""

__version__ = "0.1.0"

from .addition import (
    AdditionPlan,
    apply_addition,
    invert_addition,
    plan_for_exponent,
    select_addition_parameter,
)
from .exceptions import (
    BoundViolationError,
    ConfigError,
    CorruptBlobError,
    ExternalCompressorError,
    FloatprepError,
    IngestError,
    InfeasibleTransformError,
    LosslessInfeasibleError,
    UnadjustableError,
    UnsupportedDataError,
    UnsupportedValueError,
)
from .floatbits import (
    CommonBitProfile,
    FloatAnatomy,
    common_bit_profile,
    compose,
    decompose,
    precision,
    step_by_ulp,
    trailing_zero_count,
)
from .lossless import ScalePlan, apply_scale, invert_scale, select_scale
from .metrics import (
    CompressionReport,
    ErrorBound,
    compression_ratio,
    delta_cr_percent,
    max_abs_error,
    max_rel_error,
    within_bound,
)
from .multiplication import (
    MultiplicationPlan,
    Pattern,
    Substitution,
    apply_multiplication,
    enumerate_substitutions,
    invert_multiplication,
    multiply_and_check,
    pattern_for,
    plan_for_multiplier,
    select_multiplication_parameter,
    verify_pattern,
)

__all__ = [
    "__version__",
    "AdditionPlan",
    "apply_addition",
    "invert_addition",
    "plan_for_exponent",
    "select_addition_parameter",
    "FloatprepError",
    "UnsupportedValueError",
    "UnsupportedDataError",
    "InfeasibleTransformError",
    "UnadjustableError",
    "LosslessInfeasibleError",
    "BoundViolationError",
    "CorruptBlobError",
    "ExternalCompressorError",
    "IngestError",
    "ConfigError",
    "CommonBitProfile",
    "FloatAnatomy",
    "common_bit_profile",
    "compose",
    "decompose",
    "precision",
    "step_by_ulp",
    "trailing_zero_count",
    "ScalePlan",
    "apply_scale",
    "invert_scale",
    "select_scale",
    "CompressionReport",
    "ErrorBound",
    "compression_ratio",
    "delta_cr_percent",
    "max_abs_error",
    "max_rel_error",
    "within_bound",
    "MultiplicationPlan",
    "Pattern",
    "Substitution",
    "apply_multiplication",
    "enumerate_substitutions",
    "invert_multiplication",
    "multiply_and_check",
    "pattern_for",
    "plan_for_multiplier",
    "select_multiplication_parameter",
    "verify_pattern",
]
