"""Lossless power-of-ten baseline: remove decimals by scaling every token.

Scaling happens in decimal digit arithmetic on the source tokens, never by
floating multiplication, so the round trip is exact. Scaled magnitudes must
stay within float32's exact-integer range (2^24).
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import Sequence

import numpy as np

from .exceptions import IngestError, LosslessInfeasibleError

__all__ = ["ScalePlan", "select_scale", "apply_scale", "invert_scale"]

_EXACT_INT_LIMIT = 1 << 24


@dataclass(frozen=True)
class ScalePlan:
    power: int
    scaled_are_integers: bool


def _parse_token(token: str) -> Decimal:
    try:
        value = Decimal(token.strip())
    except InvalidOperation as exc:
        raise IngestError(f"not a decimal numeral: {token!r}") from exc
    if not value.is_finite():
        raise IngestError(f"not a decimal numeral: {token!r}")
    return value


def _fraction_digits(value: Decimal) -> int:
    return max(0, -value.as_tuple().exponent)


def select_scale(tokens: Sequence[str]) -> ScalePlan:
    """Power of ten clearing every token's fractional digits."""
    decimals = [_parse_token(t) for t in tokens]
    if not decimals:
        raise IngestError("cannot plan a scale for an empty token series")
    power = max(_fraction_digits(d) for d in decimals)
    for token, value in zip(tokens, decimals):
        scaled = value.scaleb(power)
        if abs(scaled) > _EXACT_INT_LIMIT:
            raise LosslessInfeasibleError(
                f"scaling {token!r} by 10^{power} leaves the exact-integer range of float32"
            )
    return ScalePlan(power=power, scaled_are_integers=True)


def apply_scale(tokens: Sequence[str], plan: ScalePlan) -> np.ndarray:
    """Scale tokens to exactly representable integer-valued float32s."""
    out = np.empty(len(tokens), dtype=np.float32)
    for i, token in enumerate(tokens):
        scaled = _parse_token(token).scaleb(plan.power)
        as_int = int(scaled)
        if scaled != as_int:
            raise LosslessInfeasibleError(
                f"token {token!r} still has decimals after scaling by 10^{plan.power}"
            )
        if abs(as_int) > _EXACT_INT_LIMIT:
            raise LosslessInfeasibleError(
                f"scaled token {token!r} leaves the exact-integer range of float32"
            )
        out[i] = np.float32(as_int)
    return out


def _format_scaled(value: int, power: int) -> str:
    sign = "-" if value < 0 else ""
    magnitude = abs(value)
    if power == 0:
        return f"{sign}{magnitude}"
    whole, frac = divmod(magnitude, 10**power)
    frac_text = str(frac).rjust(power, "0").rstrip("0")
    if not frac_text:
        return f"{sign}{whole}"
    return f"{sign}{whole}.{frac_text}"


def invert_scale(values: Sequence[float] | np.ndarray, plan: ScalePlan) -> list[str]:
    """Reproduce decimal tokens numerically equal to the originals."""
    out = []
    for v in np.asarray(values, dtype=np.float32):
        as_float = float(v)
        if as_float != int(as_float):
            raise LosslessInfeasibleError(f"scaled value {as_float!r} is not an integer")
        out.append(_format_scaled(int(as_float), plan.power))
    return out
