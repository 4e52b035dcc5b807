"""Addition transform: shift the whole series by one parameter so every sample
lands in a single binade and shares its exponent and leading mantissa bits.

The shift parameter is anchored so that the dataset maximum falls on the last
representable value of the target binade, which aligns the shifted data with
the largest powers of two in the region and makes recovery errors shrink
monotonically as the target exponent decreases. Recovery is plain
subtraction; the error of every sample is bounded by half the precision of
the target binade.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import InfeasibleTransformError, UnsupportedDataError
from .floatbits import (
    BIAS,
    MANTISSA_BITS,
    ensure_float32_series,
    float_to_bits,
    precision,
    vec_biased_exponent,
)
from .metrics import ErrorBound, max_abs_error, max_rel_error

__all__ = [
    "AdditionPlan",
    "plan_for_exponent",
    "select_addition_parameter",
    "apply_addition",
    "invert_addition",
]

_MAX_TARGET_EXPONENT = 126  # [2^126, 2^127) is the last fully representable binade


@dataclass(frozen=True)
class AdditionPlan:
    """Shift parameter, the shared target exponent, and the predicted error bound.

    ``a`` is an exact float32, positive, and an integer multiple of the target
    binade's precision so that the shift itself introduces no sub-precision
    component.
    """

    a: float
    target_e_u: int
    predicted_bound: float

    def __post_init__(self) -> None:
        if not self.a > 0:
            raise UnsupportedDataError(f"addition parameter must be positive, got {self.a}")
        step = precision(self.target_e_u)
        if float(np.float32(self.a)) != self.a:
            raise UnsupportedDataError(f"addition parameter {self.a!r} is not a float32")
        if (self.a / step) != math.floor(self.a / step):
            raise UnsupportedDataError(
                f"addition parameter {self.a!r} is not a multiple of the target precision {step!r}"
            )

    @property
    def parameter_hex(self) -> str:
        """The exact 32-bit pattern of ``a`` as 8 hex digits (metadata encoding)."""
        return f"{float_to_bits(self.a):08x}"


def _binade_top(e_u: int) -> float:
    """Largest representable value in [2^e, 2^(e+1))."""
    return 2.0 ** (e_u + 1) - 2.0 ** (e_u - MANTISSA_BITS)


def _validated(values: Sequence[float] | np.ndarray) -> np.ndarray:
    data = ensure_float32_series(values)
    if data.size == 0:
        raise UnsupportedDataError("cannot plan an empty series")
    if not np.all(np.isfinite(data)):
        raise UnsupportedDataError("series contains non-finite values")
    return data


def _plan_at(data: np.ndarray, vmax: float, e_u: int) -> AdditionPlan | None:
    if not -126 <= e_u <= _MAX_TARGET_EXPONENT:
        return None
    step = precision(e_u)
    a_real = _binade_top(e_u) - vmax
    # Round down to the representable grid of the target binade; anchoring at
    # or below the top keeps the maximum from rounding into the next binade.
    a = float(np.float32(math.floor(a_real / step) * step))
    if not a > 0:
        return None
    shifted = (data + np.float32(a)).astype(np.float32)
    exponents = vec_biased_exponent(shifted.view(np.uint32))
    if not np.all(exponents == e_u + BIAS):
        return None
    return AdditionPlan(a=a, target_e_u=e_u, predicted_bound=step / 2.0)


def plan_for_exponent(values: Sequence[float] | np.ndarray, e_u: int) -> AdditionPlan | None:
    """Build the plan anchoring max(values) at the top of binade ``e_u``.

    Returns None when no positive grid-aligned parameter shifts every sample
    into the binade.
    """
    data = _validated(values)
    return _plan_at(data, float(data.max()), e_u)


def _measured_ok(data: np.ndarray, plan: AdditionPlan, bound: ErrorBound) -> bool:
    recovered = invert_addition(apply_addition(data, plan), plan)
    if bound.kind == "absolute":
        return max_abs_error(data, recovered) <= bound.limit
    return max_rel_error(data, recovered) <= bound.limit


def select_addition_parameter(
    values: Sequence[float] | np.ndarray, bound: ErrorBound
) -> AdditionPlan:
    """Pick the largest target exponent whose full round trip meets the bound.

    Candidate exponents run from the smallest one whose binade can hold the
    shifted dataset upward; the scan stops at the first exponent that fails
    the measured bound. Exponents where half the target precision already
    sits under the bound satisfy it a fortiori, so the scan fast-forwards to
    the last such exponent and measures only above it.
    """
    data = _validated(values)
    vmax = float(data.max())
    width = vmax - float(data.min())
    nonzero = np.abs(data[data != 0])
    min_nonzero = float(nonzero.min()) if nonzero.size else None

    def guaranteed(e_u: int) -> bool:
        half = precision(e_u) / 2.0
        if bound.kind == "absolute":
            return half <= bound.limit
        if min_nonzero is None:
            return True  # zeros recover exactly under any plan
        return half <= bound.limit * min_nonzero

    # Smallest exponent whose binade is wide enough and can sit above max(D).
    e_lo = -126
    if width > 0:
        e_lo = max(e_lo, math.frexp(width)[1] - 1)
    if vmax > 0:
        e_lo = max(e_lo, math.frexp(vmax)[1] - 1)
    while e_lo <= _MAX_TARGET_EXPONENT and _binade_top(e_lo) - 2.0**e_lo < width:
        e_lo += 1
    if e_lo > _MAX_TARGET_EXPONENT:
        raise UnsupportedDataError(
            f"dataset width {width!r} does not fit a single binade at any exponent"
        )

    # Largest exponent satisfied without measuring: P(e)/2 <= effective limit.
    limit = bound.limit if bound.kind == "absolute" else (
        math.inf if min_nonzero is None else bound.limit * min_nonzero
    )
    if math.isinf(limit):
        e_guard = _MAX_TARGET_EXPONENT
    else:
        e_guard = min(_MAX_TARGET_EXPONENT, math.frexp(limit)[1] + MANTISSA_BITS)
        while e_guard >= e_lo and not guaranteed(e_guard):
            e_guard -= 1

    best: AdditionPlan | None = None
    if e_guard >= e_lo:
        # every exponent in [e_lo, e_guard] meets the bound; take the largest
        # one that yields a valid plan, then probe upward with measurements.
        for e_u in range(e_guard, e_lo - 1, -1):
            best = _plan_at(data, vmax, e_u)
            if best is not None:
                break
        start = e_guard + 1
    else:
        start = e_lo
    for e_u in range(start, _MAX_TARGET_EXPONENT + 1):
        plan = _plan_at(data, vmax, e_u)
        if plan is None:
            if best is not None:
                break
            continue
        if _measured_ok(data, plan, bound):
            best = plan
        else:
            break
    if best is not None:
        return best
    raise InfeasibleTransformError(
        f"no addition parameter satisfies the {bound.kind} bound {bound.limit!r}"
    )


def apply_addition(values: Sequence[float] | np.ndarray, plan: AdditionPlan) -> np.ndarray:
    """Shift every sample by the plan parameter (float32 round-to-nearest)."""
    data = ensure_float32_series(values)
    shifted = (data + np.float32(plan.a)).astype(np.float32)
    exponents = vec_biased_exponent(shifted.view(np.uint32))
    bad = exponents != plan.target_e_u + BIAS
    if np.any(bad):
        sample = float(data[np.argmax(bad)])
        raise UnsupportedDataError(
            f"sample {sample!r} falls outside the plan's binade (target 2^{plan.target_e_u})"
        )
    return shifted


def invert_addition(transformed: Sequence[float] | np.ndarray, plan: AdditionPlan) -> np.ndarray:
    """Recover by subtraction; exact because shifted values and the parameter
    share the target binade's grid."""
    data = np.asarray(transformed, dtype=np.float32)
    return (data - np.float32(plan.a)).astype(np.float32)
