import math

import pytest
from hypothesis import given, strategies as st

from floatprep.metrics import (
    CompressionReport,
    ErrorBound,
    compression_ratio,
    delta_cr_percent,
    max_abs_error,
    max_rel_error,
    within_bound,
)

series = st.lists(
    st.floats(min_value=-1e6, max_value=1e6, allow_nan=False), min_size=1, max_size=20
)


class TestErrorBound:
    def test_rejects_bad_kind(self):
        with pytest.raises(ValueError):
            ErrorBound("percent", 1.0)

    @pytest.mark.parametrize("limit", [0.0, -1.0])
    def test_rejects_nonpositive_limit(self, limit):
        with pytest.raises(ValueError):
            ErrorBound("absolute", limit)

    def test_dict_round_trip(self):
        b = ErrorBound("relative", 0.001)
        assert ErrorBound.from_dict(b.to_dict()) == b


class TestMaxAbsError:
    def test_worked_example(self):
        assert max_abs_error([1.5], [2.0]) == 0.5

    def test_identical(self):
        s = [1.0, -2.5, 3.25]
        assert max_abs_error(s, s) == 0.0

    def test_elementwise_max(self):
        assert max_abs_error([1, 10], [1.25, 10.1]) == 0.25

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            max_abs_error([1.0], [1.0, 2.0])


class TestMaxRelError:
    def test_small_deviation(self):
        got = max_rel_error([363.754], [363.7894592285156])
        expected = abs(363.7894592285156 - 363.754) / 363.754
        assert got == pytest.approx(expected, rel=1e-12)
        assert got == pytest.approx(9.75e-5, rel=1e-2)
        assert got < 1e-4  # under 0.01%

    def test_identical(self):
        s = [5.0, -1.0]
        assert max_rel_error(s, s) == 0.0

    def test_zero_recovered_exactly(self):
        assert max_rel_error([0.0], [0.0]) == 0.0

    def test_zero_broken_is_unbounded(self):
        assert max_rel_error([0.0], [1e-20]) == math.inf

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            max_rel_error([], [1.0])


class TestRatios:
    @pytest.mark.parametrize(
        "compressed,uncompressed,expected", [(50, 100, 0.5), (100, 100, 1.0), (120, 100, 1.2)]
    )
    def test_compression_ratio(self, compressed, uncompressed, expected):
        assert compression_ratio(compressed, uncompressed) == expected

    def test_zero_uncompressed(self):
        with pytest.raises(ValueError):
            compression_ratio(10, 0)

    @pytest.mark.parametrize(
        "cr,cr_np,expected", [(0.4, 0.5, -20.0), (0.5, 0.5, 0.0), (0.1, 0.5, -80.0)]
    )
    def test_delta_cr(self, cr, cr_np, expected):
        assert delta_cr_percent(cr, cr_np) == pytest.approx(expected)

    def test_zero_baseline(self):
        with pytest.raises(ValueError):
            delta_cr_percent(0.5, 0.0)

    @given(st.floats(min_value=1e-6, max_value=1e6))
    def test_baseline_identity(self, cr):
        assert delta_cr_percent(cr, cr) == 0.0


class TestProperties:
    @given(series, st.lists(st.floats(min_value=-10, max_value=10), min_size=1, max_size=20))
    def test_sign_symmetry(self, orig, deltas):
        n = min(len(orig), len(deltas))
        orig = orig[:n]
        plus = [o + d for o, d in zip(orig, deltas[:n])]
        minus = [o - d for o, d in zip(orig, deltas[:n])]
        assert max_abs_error(orig, plus) == max_abs_error(orig, minus)
        assert max_rel_error(orig, plus) == max_rel_error(orig, minus)

    def test_monotone_in_single_sample(self):
        orig = [10.0, 20.0]
        mild = [10.1, 20.0]
        worse = [10.5, 20.0]
        assert max_abs_error(orig, worse) >= max_abs_error(orig, mild)
        assert max_rel_error(orig, worse) >= max_rel_error(orig, mild)


class TestWithinBound:
    def test_absolute(self):
        assert within_bound([1.0], [1.4], ErrorBound("absolute", 0.5))
        assert not within_bound([1.0], [1.6], ErrorBound("absolute", 0.5))

    def test_relative(self):
        assert within_bound([100.0], [100.9], ErrorBound("relative", 0.01))
        assert not within_bound([100.0], [102.0], ErrorBound("relative", 0.01))

    def test_relative_zero_policy(self):
        assert within_bound([0.0], [0.0], ErrorBound("relative", 0.01))
        assert not within_bound([0.0], [0.001], ErrorBound("relative", 0.01))


def test_report_serialisation():
    report = CompressionReport(
        uncompressed_bytes=400,
        compressed_bytes=100,
        cr=0.25,
        delta_cr_percent=-50.0,
        max_abs_error=0.5,
        max_rel_error=0.001,
    )
    data = report.to_dict()
    assert data["cr"] == 0.25
    assert data["compressed_bytes"] == 100
    assert set(data) == {
        "uncompressed_bytes",
        "compressed_bytes",
        "cr",
        "delta_cr_percent",
        "max_abs_error",
        "max_rel_error",
    }
