"""Bit-exact anatomy of IEEE 754 single-precision values.

Decomposition into sign/exponent/mantissa, precision of a binade, trailing
mantissa zeros, per-position bit agreement across a dataset, and one-ULP
stepping. Only finite *normal* values are accepted; zero, subnormals,
infinities and NaN are rejected so that every accepted word obeys

    value = (-1)^sign * 2^(E-127) * (1 + mantissa * 2^-23)

Rounding everywhere in this package is round-to-nearest, ties-to-even.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .exceptions import UnsupportedValueError

__all__ = [
    "BIAS",
    "MANTISSA_BITS",
    "MANTISSA_MASK",
    "FloatAnatomy",
    "CommonBitProfile",
    "as_float32",
    "float_to_bits",
    "bits_to_float",
    "decompose",
    "compose",
    "precision",
    "trailing_zero_count",
    "common_bit_profile",
    "step_by_ulp",
]

BIAS = 127
MANTISSA_BITS = 23
MANTISSA_MASK = (1 << MANTISSA_BITS) - 1
_EXP_MASK = 0xFF
_MIN_EXPONENT = -126
_MAX_EXPONENT = 127


def as_float32(value: float) -> float:
    """Coerce to the nearest float32 and return it as an exact Python float."""
    return float(np.float32(value))


def float_to_bits(value: float) -> int:
    """32-bit pattern of ``value`` after float32 coercion."""
    return struct.unpack("<I", struct.pack("<f", float(value)))[0]


def bits_to_float(bits: int) -> float:
    """Float32 value of a 32-bit pattern."""
    return float(struct.unpack("<f", struct.pack("<I", bits & 0xFFFFFFFF))[0])


def _classify(bits: int) -> str:
    exp = (bits >> MANTISSA_BITS) & _EXP_MASK
    mant = bits & MANTISSA_MASK
    if exp == _EXP_MASK:
        return "nan" if mant else "infinite"
    if exp == 0:
        return "zero" if mant == 0 else "subnormal"
    return "normal"


def _require_normal(value: float) -> int:
    bits = float_to_bits(value)
    kind = _classify(bits)
    if kind != "normal":
        raise UnsupportedValueError(f"unsupported value class: {kind} ({value!r})")
    return bits


@dataclass(frozen=True)
class FloatAnatomy:
    """Sign, biased exponent and 23-bit mantissa of one normal float32."""

    sign: int
    biased_exponent: int
    mantissa: int

    def __post_init__(self) -> None:
        if self.sign not in (0, 1):
            raise UnsupportedValueError(f"sign must be 0 or 1, got {self.sign}")
        if not 1 <= self.biased_exponent <= 254:
            raise UnsupportedValueError(
                f"biased exponent {self.biased_exponent} outside the normal range [1, 254]"
            )
        if not 0 <= self.mantissa <= MANTISSA_MASK:
            raise UnsupportedValueError(f"mantissa {self.mantissa} does not fit in 23 bits")

    @property
    def unbiased_exponent(self) -> int:
        return self.biased_exponent - BIAS

    @property
    def significand(self) -> int:
        """24-bit significand with the implicit leading one made explicit."""
        return (1 << MANTISSA_BITS) | self.mantissa

    @property
    def bits(self) -> int:
        return (self.sign << 31) | (self.biased_exponent << MANTISSA_BITS) | self.mantissa


def decompose(value: float) -> FloatAnatomy:
    """Split a finite normal float32 into its anatomy.

    Rejects 0.0, subnormal, infinite and NaN inputs; zero is handled
    out-of-band by callers.
    """
    bits = _require_normal(value)
    return FloatAnatomy(
        sign=bits >> 31,
        biased_exponent=(bits >> MANTISSA_BITS) & _EXP_MASK,
        mantissa=bits & MANTISSA_MASK,
    )


def compose(anatomy: FloatAnatomy) -> float:
    """Exact inverse of :func:`decompose`."""
    return bits_to_float(anatomy.bits)


def precision(unbiased_exponent: int) -> float:
    """Spacing of consecutive representable values in [2^e, 2^(e+1)]: 2^(e-23)."""
    if not _MIN_EXPONENT <= unbiased_exponent <= _MAX_EXPONENT:
        raise UnsupportedValueError(
            f"exponent {unbiased_exponent} outside the normal range "
            f"[{_MIN_EXPONENT}, {_MAX_EXPONENT}]"
        )
    return 2.0 ** (unbiased_exponent - MANTISSA_BITS)


def trailing_zero_count(value: float) -> int:
    """Number of consecutive zero bits at the mantissa's least-significant end.

    23 when the mantissa is all zeros (powers of two).
    """
    mantissa = _require_normal(value) & MANTISSA_MASK
    if mantissa == 0:
        return MANTISSA_BITS
    return (mantissa & -mantissa).bit_length() - 1


@dataclass(frozen=True)
class CommonBitProfile:
    """Per-position agreement over the 32 bit positions, most significant first.

    Position 0 is the sign, positions 1-8 the exponent, 9-31 the mantissa
    (m_1 .. m_23).
    """

    agreement: tuple[bool, ...]

    @property
    def agreeing_count(self) -> int:
        return sum(self.agreement)

    @property
    def sign_agrees(self) -> bool:
        return self.agreement[0]

    @property
    def exponent_agrees(self) -> bool:
        return all(self.agreement[1:9])

    @property
    def mantissa_agreement(self) -> tuple[bool, ...]:
        return self.agreement[9:]

    @property
    def mantissa_agreeing_count(self) -> int:
        return sum(self.agreement[9:])


def common_bit_profile(values: Iterable[float]) -> CommonBitProfile:
    """Classify each of the 32 bit positions as shared or differing.

    A position is shared when every value in the list carries the same bit
    there. Permutation-invariant and unaffected by duplicates.
    """
    patterns = [float_to_bits(v) for v in values]
    if not patterns:
        raise UnsupportedValueError("common_bit_profile requires a non-empty list")
    all_and = patterns[0]
    all_or = patterns[0]
    for p in patterns[1:]:
        all_and &= p
        all_or |= p
    same = ~(all_and ^ all_or)  # bit set where AND == OR, i.e. all values agree
    agreement = tuple(bool((same >> (31 - i)) & 1) for i in range(32))
    return CommonBitProfile(agreement)


def step_by_ulp(value: float, direction: int) -> float:
    """Adjacent representable value toward +inf (+1) or -inf (-1).

    Raises when the input is not finite normal or when the step leaves the
    normal range (into subnormals, zero, or infinity).
    """
    if direction not in (1, -1):
        raise UnsupportedValueError(f"direction must be +1 or -1, got {direction}")
    bits = _require_normal(value)
    # Positive floats order with their bit pattern; negative floats reverse.
    if value > 0:
        nxt = bits + direction
    else:
        nxt = bits - direction
    if _classify(nxt) != "normal" or (nxt >> 31) != (bits >> 31):
        raise UnsupportedValueError(
            f"stepping {value!r} by {direction} ULP leaves the normal range"
        )
    return bits_to_float(nxt)


# ---------------------------------------------------------------------------
# Vectorised helpers shared by the transforms and the built-in compressor.
# These operate on raw uint32 views and do not validate value classes.


def vec_biased_exponent(words: np.ndarray) -> np.ndarray:
    return (words >> np.uint32(MANTISSA_BITS)) & np.uint32(_EXP_MASK)


def vec_is_normal(words: np.ndarray) -> np.ndarray:
    exp = vec_biased_exponent(words)
    return (exp != 0) & (exp != _EXP_MASK)


def vec_trailing_zeros(words: np.ndarray) -> np.ndarray:
    """Trailing zero count of each word's mantissa (23 for a zero mantissa)."""
    mant = (words & np.uint32(MANTISSA_MASK)).astype(np.int64)
    out = np.full(words.shape, MANTISSA_BITS, dtype=np.int64)
    nz = mant != 0
    low = mant[nz] & -mant[nz]
    # log2 of an exact power of two is exact in float64 up to 2^52
    out[nz] = np.log2(low.astype(np.float64)).astype(np.int64)
    return out


def ensure_float32_series(values: Sequence[float] | np.ndarray) -> np.ndarray:
    """Round a series to float32, normalising -0.0 to +0.0."""
    arr = np.asarray(values, dtype=np.float32).copy()
    arr[arr == 0] = np.float32(0.0)
    return arr
