"""Multiplication transform: substitute each sample with a nearby value whose
product with an odd multiplier carries a long run of trailing zero mantissa
bits, and invert by plain division.

The substitution machinery rests on the repeating block of the binary
expansion of 1/m: a significand whose tail follows that block (at any
rotation) multiplies with m to an all-ones word that rounds onto a value with
a zero tail. Per-sample analysis patches the sample's mantissa with pattern
rotations at the position aligned with the first zero of the desired product
tail. The dataset-level search works directly on the grid of products with at
least Z trailing zeros, which also captures substitutions arising from the
patterns of the multiplier's odd factors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import Sequence

import numpy as np

from .exceptions import InfeasibleTransformError, UnadjustableError, UnsupportedDataError, UnsupportedValueError
from .floatbits import (
    MANTISSA_BITS,
    MANTISSA_MASK,
    decompose,
    ensure_float32_series,
    float_to_bits,
    step_by_ulp,
    trailing_zero_count,
    vec_is_normal,
    vec_trailing_zeros,
)
from .metrics import ErrorBound

__all__ = [
    "MULTIPLIER_RANGE",
    "Pattern",
    "Substitution",
    "MultiplicationPlan",
    "pattern_for",
    "verify_pattern",
    "enumerate_substitutions",
    "multiply_and_check",
    "plan_for_multiplier",
    "select_multiplication_parameter",
    "apply_multiplication",
    "invert_multiplication",
]

MULTIPLIER_RANGE = range(3, 62, 2)

_SIG_ONE = 1 << MANTISSA_BITS  # implicit-bit weight of a 24-bit significand
_SIG_TOP = 1 << (MANTISSA_BITS + 1)


@dataclass(frozen=True)
class Pattern:
    """Repeating mantissa block tied to one odd multiplier.

    ``block`` is the repeating block of the binary expansion of 1/m (length
    equal to the multiplicative order of 2 modulo m); ``canonical_hex`` is its
    rotation with 1 as most significant bit and the block's longest zero run
    at the tail.
    """

    m: int
    block: str
    canonical_hex: str

    @property
    def length(self) -> int:
        return len(self.block)

    @property
    def block_int(self) -> int:
        return int(self.block, 2)

    def rotations(self) -> list[int]:
        """All cyclic rotations of the block as integers."""
        L = self.length
        b = self.block_int
        full = (1 << L) - 1
        return [((b << k) | (b >> (L - k))) & full if k else b for k in range(L)]


def _multiplicative_order_of_two(m: int) -> int:
    order, v = 1, 2 % m
    while v != 1:
        v = (v * 2) % m
        order += 1
    return order


def _canonical_rotation(block_int: int, length: int) -> int:
    """Rotation with MSB one and maximal trailing zeros (largest value on ties)."""
    full = (1 << length) - 1
    best = -1
    best_key = (-1, -1)
    for k in range(length):
        r = ((block_int << k) | (block_int >> (length - k))) & full if k else block_int
        if r >> (length - 1) != 1:
            continue
        tz = (r & -r).bit_length() - 1
        if (tz, r) > best_key:
            best_key = (tz, r)
            best = r
    return best


def _derive_pattern(m: int) -> Pattern:
    length = _multiplicative_order_of_two(m)
    block_int = ((1 << length) - 1) // m
    canonical = _canonical_rotation(block_int, length)
    return Pattern(m=m, block=format(block_int, f"0{length}b"), canonical_hex=hex(canonical))


@lru_cache(maxsize=1)
def _pattern_table() -> dict[int, Pattern]:
    """Load the shipped pattern fixture and validate it against the algebra."""
    raw = json.loads(resources.files("floatprep.data").joinpath("patterns.json").read_text())
    table: dict[int, Pattern] = {}
    for key, hex_str in raw.items():
        m = int(key)
        canonical = int(hex_str, 16)
        length = canonical.bit_length()
        block_int = ((1 << length) - 1) // m
        if block_int * m != (1 << length) - 1:
            raise ValueError(f"pattern fixture corrupt for m={m}: no block of length {length}")
        pattern = Pattern(m=m, block=format(block_int, f"0{length}b"), canonical_hex=hex_str)
        if canonical not in pattern.rotations():
            raise ValueError(f"pattern fixture corrupt for m={m}: {hex_str} is not a rotation")
        table[m] = pattern
    return table


def _validate_multiplier(m: int) -> None:
    if m % 2 == 0 or not MULTIPLIER_RANGE.start <= m <= MULTIPLIER_RANGE.stop - 1:
        raise UnsupportedValueError(f"multiplier must be odd in [3, 61], got {m}")


def pattern_for(m: int) -> Pattern:
    """Pattern of an odd multiplier in [3, 61], from the shipped table."""
    _validate_multiplier(m)
    return _pattern_table()[m]


def derive_pattern(m: int) -> Pattern:
    """Recompute a multiplier's pattern from scratch (fixture regeneration)."""
    _validate_multiplier(m)
    return _derive_pattern(m)


def _rne_div(num: int, den: int) -> int:
    """Round-to-nearest-even of num/den for positive integers."""
    q, rem = divmod(num, den)
    if 2 * rem > den or (2 * rem == den and q & 1):
        q += 1
    return q


def verify_pattern(m: int, pattern: str) -> bool:
    """Check that a candidate pattern produces zero tails under multiplication.

    A 24-bit significand is filled with the pattern's periodic expansion at
    every rotation offset (rounded to nearest at the last bit), multiplied by
    m in exact integer arithmetic and rounded back to 24 significant bits;
    the pattern passes when some offset leaves at least 20 trailing zero
    mantissa bits. Fills that collapse to a bare power of two carry no
    pattern structure and are skipped. Patterns of the multiplier's odd
    factors pass alongside its own.
    """
    _validate_multiplier(m)
    if not pattern or len(pattern) > 60:
        raise UnsupportedValueError(f"pattern length must be in [1, 60], got {len(pattern)}")
    if set(pattern) - {"0", "1"}:
        raise UnsupportedValueError(f"pattern must be a bit string, got {pattern!r}")
    length = len(pattern)
    block = int(pattern, 2)
    if block == 0:
        return False
    full = (1 << length) - 1
    for k in range(length):
        rot = ((block << k) | (block >> (length - k))) & full if k else block
        if rot == 0:
            continue
        # periodic value 0.(rot), normalised into [1, 2)
        num, den = rot, full
        while num < den:
            num <<= 1
        while num >= 2 * den:
            den <<= 1
        fill = _rne_div(num << MANTISSA_BITS, den)
        if fill >= _SIG_TOP or fill & (fill - 1) == 0:
            continue  # carried out or collapsed to a power of two
        product = fill * m
        shift = product.bit_length() - (MANTISSA_BITS + 1)
        if shift > 0:
            word = _rne_div(product, 1 << shift)
            if word >= _SIG_TOP:
                word >>= 1
        else:
            word = product << (-shift)
        mant = word & MANTISSA_MASK
        zeros = MANTISSA_BITS if mant == 0 else (mant & -mant).bit_length() - 1
        if zeros >= 20:
            return True
    return False


@dataclass(frozen=True)
class Substitution:
    """One candidate replacement of a sample under a given multiplier."""

    original: float
    substituted: float
    product: float
    trailing_zeros: int
    abs_error: float
    rel_error: float


@dataclass(frozen=True)
class MultiplicationPlan:
    """Chosen multiplier, the dataset's common trailing zeros, and one
    substitution per sample (in dataset order)."""

    m: int
    min_common_zeros: int
    per_sample: tuple[Substitution, ...]


def multiply_and_check(y_candidate: float, m: int, required_zeros: int) -> float:
    """Post-multiplication one-ULP adjustment recovering a zero tail.

    Returns the candidate unchanged when it already has the required trailing
    zeros; otherwise tries both one-ULP neighbours and returns the first
    whose tail is long enough and whose division round trip closes.
    """
    _validate_multiplier(m)
    if not 0 <= required_zeros <= MANTISSA_BITS:
        raise UnsupportedValueError(f"required zeros must be in [0, 23], got {required_zeros}")
    y = float(np.float32(y_candidate))
    if trailing_zero_count(y) >= required_zeros:
        return y
    m32 = np.float32(m)
    for direction in (1, -1):
        try:
            neighbour = step_by_ulp(y, direction)
        except UnsupportedValueError:
            continue
        if trailing_zero_count(neighbour) < required_zeros:
            continue
        quotient = float(np.float32(np.float32(neighbour) / m32))
        if float(np.float32(np.float32(quotient) * m32)) == neighbour:
            return neighbour
    raise UnadjustableError(
        f"no one-ULP neighbour of {y!r} reaches {required_zeros} trailing zeros under m={m}"
    )


def _sig_from_fraction(value: Fraction, e_x: int) -> tuple[int, int] | None:
    """Round a significand value in [1, 2+eps) to 24 bits at exponent e_x.

    Returns (significand, exponent); carries into the next binade when the
    rounding overflows. None when the result leaves the normal range.
    """
    q = _rne_div(value.numerator << MANTISSA_BITS, value.denominator)
    exp = e_x
    if q >= _SIG_TOP:
        q >>= 1
        exp += 1
    if q < _SIG_ONE or exp > 127:
        return None
    return q, exp


def enumerate_substitutions(
    x: float, m: int, bound: ErrorBound | None = None
) -> list[Substitution]:
    """All pattern-patch substitutions of one sample under one multiplier.

    For each candidate product exponent (the product's own and its two
    neighbours) and each target tail length Z from 23 down to 1, the sample's
    significand is patched from the position aligned with the product's first
    tail bit, using every rotation offset of the multiplier's pattern
    (including offsets that conceptually begin left of the leading bit),
    rounded at the last mantissa bit. Candidates whose product round trip
    closes and whose error passes the bound are kept, deduplicated and sorted
    by (trailing zeros desc, absolute error asc, changed mantissa bits asc,
    substituted value asc). An empty result means the multiplier is
    infeasible for this sample under the bound.
    """
    _validate_multiplier(m)
    x32 = float(np.float32(x))
    if math.isnan(x32) or math.isinf(x32):
        raise UnsupportedValueError(f"unsupported value class: non-finite ({x!r})")
    if x32 == 0.0:
        return [Substitution(0.0, 0.0, 0.0, MANTISSA_BITS, 0.0, 0.0)]

    sign = -1.0 if x32 < 0 else 1.0
    mag = abs(x32)
    anatomy = decompose(mag)
    e_x = anatomy.unbiased_exponent
    sig24 = anatomy.significand
    pattern = pattern_for(m)
    L = pattern.length
    rotations = pattern.rotations()
    full = (1 << L) - 1
    m32 = np.float32(m)

    t = float(np.float32(np.float32(mag) * m32))
    if math.isinf(t):
        e_y0 = e_x + m.bit_length()
    else:
        e_y0 = decompose(t).unbiased_exponent

    if bound is None:
        limit_abs = math.inf
    elif bound.kind == "absolute":
        limit_abs = bound.limit
    else:
        limit_abs = bound.limit * mag

    found: dict[tuple[int, int], tuple] = {}
    mag_bits = float_to_bits(mag)

    for e_y in {max(-126, min(127, e)) for e in (e_y0 - 1, e_y0, e_y0 + 1)}:
        shift = e_y - e_x
        for zeros in range(MANTISSA_BITS, 0, -1):
            patch_pos = (MANTISSA_BITS + 1) - zeros - shift
            if patch_pos > MANTISSA_BITS:
                continue
            if patch_pos >= 1:
                prefix = Fraction(sig24 >> (MANTISSA_BITS + 1 - patch_pos), 1 << (patch_pos - 1))
            else:
                prefix = Fraction(0)
            for rot in rotations:
                if patch_pos < 1:
                    # Pattern conceptually starts left of the leading bit: the
                    # overhanging bits must be zeros followed by the implicit 1.
                    lead = 1 - patch_pos
                    if lead > L:
                        continue
                    if lead > 1 and rot >> (L - (lead - 1)) != 0:
                        continue
                    if (rot >> (L - lead)) & 1 != 1:
                        continue
                tail = Fraction(rot, full) * Fraction(2, 1) ** (1 - patch_pos)
                rounded = _sig_from_fraction(prefix + tail, e_x)
                if rounded is None:
                    continue
                q, exp = rounded
                xhat = float(np.ldexp(np.float64(q), exp - MANTISSA_BITS))
                y0 = float(np.float32(np.float32(xhat) * m32))
                if math.isinf(y0) or y0 == 0.0:
                    continue
                if trailing_zero_count(y0) >= zeros:
                    y = y0
                    if float(np.float32(np.float32(y) / m32)) != xhat:
                        continue
                else:
                    try:
                        y = multiply_and_check(y0, m, zeros)
                    except UnadjustableError:
                        continue
                    xhat = float(np.float32(np.float32(y) / m32))
                delta = abs(xhat - mag)
                if delta > limit_abs:
                    continue
                key = (float_to_bits(xhat), float_to_bits(y))
                if key not in found:
                    bit_distance = bin((mag_bits ^ key[0]) & MANTISSA_MASK).count("1")
                    found[key] = (
                        trailing_zero_count(y),
                        delta,
                        bit_distance,
                        xhat,
                        y,
                    )

    ordered = sorted(found.values(), key=lambda c: (-c[0], c[1], c[2], c[3]))
    return [
        Substitution(
            original=x32,
            substituted=sign * xhat,
            product=sign * y,
            trailing_zeros=tz,
            abs_error=delta,
            rel_error=delta / mag,
        )
        for tz, delta, _, xhat, y in ordered
    ]


# ---------------------------------------------------------------------------
# Dataset-level search. Works on the grid of products with >= Z trailing
# zeros: for positive floats those are exactly the bit patterns that are
# multiples of 2^Z, so snapping x*m to the grid enumerates every closed
# substitution, including the ones produced by factor patterns.


def _error_limits(mags: np.ndarray, bound: ErrorBound) -> np.ndarray:
    if bound.kind == "absolute":
        return np.full(mags.shape, float(bound.limit))
    return bound.limit * mags.astype(np.float64)


def _candidate_ok(
    mags: np.ndarray, m32: np.float32, y: np.ndarray, limits: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Validity mask, error, and quotient for grid candidates ``y``."""
    words = y.view(np.uint32)
    normal = vec_is_normal(words) & (words < np.uint32(0x80000000))
    xhat = (y / m32).astype(np.float32)
    closed = (xhat * m32).astype(np.float32) == y
    err = np.abs(xhat.astype(np.float64) - mags.astype(np.float64))
    return normal & closed & (err <= limits), err, xhat


def _grid_pair(t: np.ndarray, zeros: int) -> tuple[np.ndarray, np.ndarray]:
    bits = t.view(np.uint32)
    mask = np.uint32((1 << zeros) - 1)
    down = bits & ~mask
    up = down + np.uint32(1 << zeros)
    return down.view(np.float32), up.view(np.float32)


def _score_multiplier(
    mags: np.ndarray, m: int, bound: ErrorBound
) -> tuple[np.ndarray, np.ndarray] | None:
    """Per-sample max achievable trailing zeros and a witness product.

    None when some sample admits no bound-compliant substitution at all.
    """
    n = mags.size
    m32 = np.float32(m)
    t = (mags * m32).astype(np.float32)
    limits = _error_limits(mags, bound)
    best_z = np.zeros(n, dtype=np.int64)
    best_y = np.zeros(n, dtype=np.float32)
    open_idx = np.arange(n)
    for zeros in range(MANTISSA_BITS, 0, -1):
        if open_idx.size == 0:
            break
        sub_t = t[open_idx]
        sub_mags = mags[open_idx]
        sub_limits = limits[open_idx]
        down, up = _grid_pair(sub_t, zeros)
        ok_any = np.zeros(open_idx.size, dtype=bool)
        choice = np.zeros(open_idx.size, dtype=np.float32)
        for cand in (down, up):
            ok, err, _ = _candidate_ok(sub_mags, m32, cand, sub_limits)
            new = ok & ~ok_any
            choice[new] = cand[new]
            ok_any |= ok
        hit = open_idx[ok_any]
        best_z[hit] = zeros
        best_y[hit] = choice[ok_any]
        open_idx = open_idx[~ok_any]
    if open_idx.size:
        return None
    return best_z, best_y


def _assign_substitutions(
    mags: np.ndarray, m: int, zeros: int, bound: ErrorBound, fallback_y: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-sample product with >= ``zeros`` tail bits and the smallest error.

    Ties break on fewest changed mantissa bits, then the smaller substituted
    value. ``fallback_y`` (from scoring) guarantees every sample keeps at
    least one valid candidate.
    """
    m32 = np.float32(m)
    limits = _error_limits(mags, bound)
    best_y = fallback_y.copy()
    ok, err, xhat = _candidate_ok(mags, m32, best_y, limits)
    best_err = np.where(ok, err, np.inf)
    mag_bits = mags.view(np.uint32)

    def distance(xh: np.ndarray) -> np.ndarray:
        return np.bitwise_count((mag_bits ^ xh.view(np.uint32)) & np.uint32(MANTISSA_MASK))

    best_dist = np.where(ok, distance(xhat), np.iinfo(np.int64).max)
    best_xh = np.where(ok, xhat, np.float32(np.inf))

    t = (mags * m32).astype(np.float32)
    down, up = _grid_pair(t, zeros)
    step = np.uint32(1 << zeros)
    for offset in range(3):
        shift = np.uint32(offset) * step
        for cand_bits in (down.view(np.uint32) - shift, up.view(np.uint32) + shift):
            cand = cand_bits.view(np.float32)
            ok, err, xhat = _candidate_ok(mags, m32, cand, limits)
            dist = distance(xhat)
            better = ok & (
                (err < best_err)
                | ((err == best_err) & (dist < best_dist))
                | ((err == best_err) & (dist == best_dist) & (xhat < best_xh))
            )
            best_y[better] = cand[better]
            best_err[better] = err[better]
            best_dist[better] = dist[better]
            best_xh[better] = xhat[better]
    quotient = (best_y / m32).astype(np.float32)
    return best_y, quotient, best_err


def plan_for_multiplier(
    values: Sequence[float] | np.ndarray, m: int, bound: ErrorBound
) -> MultiplicationPlan:
    """Best plan for one specific multiplier, or raise when infeasible."""
    _validate_multiplier(m)
    data = ensure_float32_series(values)
    if data.size == 0:
        raise UnsupportedDataError("cannot plan an empty series")
    if not np.all(np.isfinite(data)):
        raise UnsupportedDataError("series contains non-finite values")

    unique, inverse = np.unique(data, return_inverse=True)
    mags = np.abs(unique)
    nonzero = mags != 0
    sub_mags = mags[nonzero].astype(np.float32)

    plan_z = MANTISSA_BITS
    if sub_mags.size:
        scored = _score_multiplier(sub_mags, m, bound)
        if scored is None:
            raise InfeasibleTransformError(
                f"multiplier {m} admits no bound-compliant substitution for every sample"
            )
        best_z, witness_y = scored
        plan_z = min(plan_z, int(best_z.min()))
        y, xhat, err = _assign_substitutions(sub_mags, m, plan_z, bound, witness_y)
        tz = vec_trailing_zeros(y.view(np.uint32))

    subs_by_unique: list[Substitution] = []
    cursor = 0
    for idx in range(unique.size):
        value = float(unique[idx])
        if not nonzero[idx]:
            subs_by_unique.append(Substitution(0.0, 0.0, 0.0, MANTISSA_BITS, 0.0, 0.0))
            continue
        sign = -1.0 if value < 0 else 1.0
        delta = float(err[cursor])
        subs_by_unique.append(
            Substitution(
                original=value,
                substituted=sign * float(xhat[cursor]),
                product=sign * float(y[cursor]),
                trailing_zeros=int(tz[cursor]),
                abs_error=delta,
                rel_error=delta / abs(value),
            )
        )
        cursor += 1

    per_sample = tuple(subs_by_unique[i] for i in inverse)
    common = min(s.trailing_zeros for s in per_sample)
    return MultiplicationPlan(m=m, min_common_zeros=common, per_sample=per_sample)


def select_multiplication_parameter(
    values: Sequence[float] | np.ndarray, bound: ErrorBound
) -> MultiplicationPlan:
    """Brute-force search over all odd multipliers in [3, 61].

    Scores each multiplier by the dataset's minimum of per-sample maximum
    achievable trailing zeros, keeps only multipliers where every sample has
    a bound-compliant substitution, and returns the plan of the best scorer
    (smaller multipliers win ties). Per-sample work is memoised over distinct
    values, which time series repeat heavily.
    """
    data = ensure_float32_series(values)
    if data.size == 0:
        raise UnsupportedDataError("cannot plan an empty series")
    if not np.all(np.isfinite(data)):
        raise UnsupportedDataError("series contains non-finite values")

    unique = np.unique(data)
    mags = np.abs(unique)
    sub_mags = mags[mags != 0].astype(np.float32)

    best_m = None
    best_z = -1
    for m in _pattern_table():
        if sub_mags.size == 0:
            best_m, best_z = m, MANTISSA_BITS
            break
        scored = _score_multiplier(sub_mags, m, bound)
        if scored is None:
            continue
        z = int(scored[0].min())
        if z > best_z:
            best_m, best_z = m, z
    if best_m is None:
        raise InfeasibleTransformError(
            f"no multiplier in [3, 61] satisfies the {bound.kind} bound {bound.limit!r}"
        )
    return plan_for_multiplier(data, best_m, bound)


def apply_multiplication(
    values: Sequence[float] | np.ndarray, plan: MultiplicationPlan
) -> np.ndarray:
    """Emit each sample's substituted product."""
    data = ensure_float32_series(values)
    if data.size != len(plan.per_sample):
        raise UnsupportedDataError(
            f"plan covers {len(plan.per_sample)} samples, series has {data.size}"
        )
    originals = np.array([s.original for s in plan.per_sample], dtype=np.float32)
    if not np.array_equal(data.view(np.uint32), originals.view(np.uint32)):
        raise UnsupportedDataError("series does not bit-match the plan's samples")
    return np.array([s.product for s in plan.per_sample], dtype=np.float32)


def invert_multiplication(
    transformed: Sequence[float] | np.ndarray, plan: MultiplicationPlan
) -> np.ndarray:
    """Recover by division; closure at plan time makes this bit-exact."""
    return divide_by_multiplier(transformed, plan.m)


def divide_by_multiplier(transformed: Sequence[float] | np.ndarray, m: int) -> np.ndarray:
    """Metadata-only inverse: x = y / m in float32."""
    _validate_multiplier(m)
    data = np.asarray(transformed, dtype=np.float32)
    return (data / np.float32(m)).astype(np.float32)
