import math
import struct

import numpy as np
import pytest
from hypothesis import given, strategies as st

from floatprep.exceptions import UnsupportedValueError
from floatprep.floatbits import (
    FloatAnatomy,
    common_bit_profile,
    compose,
    decompose,
    float_to_bits,
    precision,
    step_by_ulp,
    trailing_zero_count,
)

normal_floats = st.floats(
    width=32, allow_nan=False, allow_infinity=False, allow_subnormal=False
).filter(lambda v: v != 0.0)


def mantissa_by_arithmetic(value: float) -> tuple[int, int, int]:
    """Oracle: derive (sign, biased exponent, mantissa) from plain arithmetic."""
    v = float(np.float32(value))
    sign = 1 if math.copysign(1.0, v) < 0 else 0
    frac, exp = math.frexp(abs(v))  # v = frac * 2^exp, frac in [0.5, 1)
    e_u = exp - 1
    mantissa = round((abs(v) / 2.0**e_u - 1.0) * 2.0**23)
    return sign, e_u + 127, mantissa


class TestDecompose:
    def test_one(self):
        assert decompose(1.0) == FloatAnatomy(0, 127, 0)

    def test_negative_half(self):
        assert decompose(-0.5) == FloatAnatomy(1, 126, 0)

    def test_table_row_value(self):
        # the worked two-sample example displays the bits of the float printed
        # as 53.333; those are exactly the bits of 53.33333206176758
        a = decompose(53.33333206176758)
        assert (a.sign, a.biased_exponent) == (0, 132)
        assert a.mantissa == 0b10101010101010101010100

    def test_nominal_53_333(self):
        a = decompose(53.333)
        assert (a.sign, a.biased_exponent, a.mantissa) == mantissa_by_arithmetic(53.333)

    @pytest.mark.parametrize("bad", [0.0, -0.0, math.inf, -math.inf, math.nan, 1e-40])
    def test_rejects_unsupported_classes(self, bad):
        with pytest.raises(UnsupportedValueError):
            decompose(bad)


class TestCompose:
    def test_one(self):
        assert compose(FloatAnatomy(0, 127, 0)) == 1.0

    def test_table_row(self):
        v = compose(FloatAnatomy(0, 132, 0b10101010101010101010100))
        assert v == 53.33333206176758
        assert round(v, 3) == 53.333

    def test_negative_half(self):
        assert compose(FloatAnatomy(1, 126, 0)) == -0.5

    @pytest.mark.parametrize(
        "sign,exp,mant", [(2, 127, 0), (0, 0, 1), (0, 255, 0), (0, 127, 1 << 23)]
    )
    def test_invariants_enforced(self, sign, exp, mant):
        with pytest.raises(UnsupportedValueError):
            FloatAnatomy(sign, exp, mant)

    @given(normal_floats)
    def test_round_trip_identity(self, v):
        assert compose(decompose(v)) == float(np.float32(v))

    @pytest.mark.parametrize("e", range(-126, 128))
    def test_round_trip_at_binade_boundaries(self, e):
        v = 2.0**e
        assert compose(decompose(v)) == v


class TestPrecision:
    def test_unit_region(self):
        assert precision(0) == 2.0**-23

    def test_integer_region(self):
        assert precision(23) == 1.0

    def test_small_region(self):
        assert precision(4) == 2.0**-19

    @pytest.mark.parametrize("e", [-127, 128, 400])
    def test_out_of_range(self, e):
        with pytest.raises(UnsupportedValueError):
            precision(e)


class TestTrailingZeros:
    def test_power_of_two(self):
        assert trailing_zero_count(1.0) == 23

    def test_160(self):
        # 160 = 1.01b * 2^7: two mantissa bits then 21 zeros
        assert trailing_zero_count(160.0) == 21

    def test_255(self):
        # 255 = 1.1111111b * 2^7: seven mantissa bits then 16 zeros
        assert trailing_zero_count(255.0) == 16

    @given(normal_floats)
    def test_divisibility(self, v):
        k = trailing_zero_count(v)
        mantissa = float_to_bits(v) & ((1 << 23) - 1)
        assert mantissa % (1 << k) == 0
        if k < 23:
            assert mantissa % (1 << (k + 1)) != 0


class TestCommonBitProfile:
    def test_empty_rejected(self):
        with pytest.raises(UnsupportedValueError):
            common_bit_profile([])

    def test_singleton_all_agree(self):
        profile = common_bit_profile([3.75])
        assert profile.agreeing_count == 32

    def test_addition_table_rows(self):
        # shifted pair: sign, exponent and every mantissa bit but m_2 agree
        profile = common_bit_profile([1791.333, 2047.333])
        assert profile.sign_agrees
        assert profile.exponent_agrees
        mantissa = profile.mantissa_agreement
        assert mantissa[1] is False  # m_2
        assert all(mantissa[i] for i in range(23) if i != 1)

    def test_pre_transform_rows(self):
        # the two-sample example before preprocessing: 2 aligned mantissa bits
        profile = common_bit_profile([53.33333206176758, 309.3333435058594])
        assert profile.mantissa_agreeing_count == 2

    @given(st.lists(normal_floats, min_size=1, max_size=6))
    def test_permutation_and_duplication_invariance(self, values):
        base = common_bit_profile(values)
        assert common_bit_profile(list(reversed(values))) == base
        assert common_bit_profile(values + [values[0]]) == base


class TestStepByUlp:
    def test_up_from_one(self):
        assert step_by_ulp(1.0, +1) == 1.0 + 2.0**-23

    def test_down_from_two(self):
        assert step_by_ulp(2.0, -1) == 2.0 - 2.0**-23

    def test_up_from_256(self):
        assert step_by_ulp(256.0, +1) == 256.0 + precision(8)
        assert precision(8) == 2.0**-15

    @given(normal_floats, st.sampled_from([1, -1]))
    def test_matches_nextafter(self, v, direction):
        v32 = np.float32(v)
        target = np.float32(np.inf) if direction > 0 else np.float32(-np.inf)
        expected = float(np.nextafter(v32, target))
        try:
            stepped = step_by_ulp(v, direction)
        except UnsupportedValueError:
            # stepping left the normal range
            exp = (float_to_bits(expected) >> 23) & 0xFF
            assert exp in (0, 255) or expected == 0.0
        else:
            assert stepped == expected

    @given(normal_floats)
    def test_spacing_lower_bound(self, v):
        # consecutive values differ by at least the binade's precision,
        # with equality when both share the exponent
        v32 = float(np.float32(v))
        e_u = decompose(v32).unbiased_exponent
        try:
            nxt = step_by_ulp(v32, +1 if v32 > 0 else -1)  # step away from zero
        except UnsupportedValueError:
            return
        gap = abs(nxt - v32)
        assert gap >= precision(e_u)
        if decompose(nxt).unbiased_exponent == e_u:
            assert gap == precision(e_u)

    def test_errors_at_range_edges(self):
        max_finite = float(np.finfo(np.float32).max)
        min_normal = float(np.finfo(np.float32).tiny)
        with pytest.raises(UnsupportedValueError):
            step_by_ulp(max_finite, +1)
        with pytest.raises(UnsupportedValueError):
            step_by_ulp(min_normal, -1)
        with pytest.raises(UnsupportedValueError):
            step_by_ulp(0.0, +1)


def test_bit_layout_matches_struct():
    v = -123.456
    packed = struct.unpack("<I", struct.pack("<f", np.float32(v)))[0]
    assert float_to_bits(v) == packed
