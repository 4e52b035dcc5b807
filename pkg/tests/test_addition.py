import math

import numpy as np
import pytest

from floatprep.addition import (
    AdditionPlan,
    apply_addition,
    invert_addition,
    plan_for_exponent,
    select_addition_parameter,
)
from floatprep.exceptions import InfeasibleTransformError, UnsupportedDataError
from floatprep.floatbits import decompose, float_to_bits, precision
from floatprep.metrics import ErrorBound

LOOSE = ErrorBound("absolute", math.inf)


def eq9_parameter(values, e_u: int) -> float:
    """Oracle: evaluate the max-anchoring equation directly in float64."""
    step = 2.0 ** (e_u - 23)
    top = 2.0 ** (e_u + 1) - step
    a_real = top - float(np.float32(max(values)))
    return float(np.float32(math.floor(a_real / step) * step))


class TestPlan:
    def test_parameter_must_be_positive(self):
        with pytest.raises(UnsupportedDataError):
            AdditionPlan(a=-1.0, target_e_u=4, predicted_bound=1.0)

    def test_parameter_must_sit_on_grid(self):
        # 2^-14 is finer than the precision of binade 10 (2^-13)
        with pytest.raises(UnsupportedDataError):
            AdditionPlan(a=1.0 + 2.0**-14, target_e_u=10, predicted_bound=1.0)

    def test_parameter_hex_is_exact_bit_pattern(self):
        plan = AdditionPlan(a=1738.0, target_e_u=10, predicted_bound=2.0**-14)
        assert plan.parameter_hex == f"{float_to_bits(1738.0):08x}"
        assert len(plan.parameter_hex) == 8


class TestSelect:
    def test_forced_region_matches_equation(self):
        data = [53.333, 309.333]
        plan = plan_for_exponent(data, 10)
        assert plan is not None
        assert plan.a == eq9_parameter(data, 10)
        assert plan.a % precision(10) == 0.0
        shifted = apply_addition(data, plan)
        assert all(decompose(v).unbiased_exponent == 10 for v in shifted.tolist())

    def test_fig4_region_shift(self):
        # samples in [8, 12] shifted by 8 land in [16, 20] and share E_U = 4
        data = np.linspace(8.0, 12.0, 9, dtype=np.float32)
        plan = AdditionPlan(a=8.0, target_e_u=4, predicted_bound=precision(4) / 2)
        shifted = apply_addition(data, plan)
        assert shifted.min() >= 16.0 and shifted.max() <= 20.0
        assert all(decompose(v).unbiased_exponent == 4 for v in shifted.tolist())

    def test_singleton_loose_bound_takes_largest_exponent(self):
        plan = select_addition_parameter([42.0], LOOSE)
        assert plan.target_e_u == 126
        # plans exist at every feasible exponent below it
        for e_u in (6, 20, 60, 100):
            assert plan_for_exponent([42.0], e_u) is not None

    def test_monotone_stop_returns_largest_satisfying(self):
        data = np.float32([50.0, 350.0])
        bound = ErrorBound("absolute", 0.6)
        plan = select_addition_parameter(data, bound)
        # half precision at the chosen exponent satisfies the bound ...
        assert plan.predicted_bound <= 0.6
        # ... and the next exponent up would violate it
        assert precision(plan.target_e_u + 1) / 2 > 0.6

    def test_infeasible_bound(self):
        with pytest.raises(InfeasibleTransformError):
            select_addition_parameter([1.0, 1.9000001], ErrorBound("absolute", 1e-12))

    def test_unsupported_width(self):
        with pytest.raises(UnsupportedDataError):
            select_addition_parameter([-3e38, 3e38], LOOSE)

    def test_empty_series(self):
        with pytest.raises(UnsupportedDataError):
            select_addition_parameter([], LOOSE)

    def test_negative_data_shifts_positive(self):
        data = np.float32([-5.0, 5.0])
        plan = select_addition_parameter(data, ErrorBound("absolute", 0.001))
        assert plan.a > 5.0
        shifted = apply_addition(data, plan)
        exps = {decompose(v).unbiased_exponent for v in shifted.tolist()}
        assert len(exps) == 1


class TestApply:
    def test_table_shift(self):
        plan = AdditionPlan(a=1738.0, target_e_u=10, predicted_bound=2.0**-14)
        shifted = apply_addition([53.333, 309.333], plan)
        assert shifted.tolist() == [
            float(np.float32(np.float32(53.333) + np.float32(1738.0))),
            float(np.float32(np.float32(309.333) + np.float32(1738.0))),
        ]
        assert [round(float(v), 3) for v in shifted] == [1791.333, 2047.333]

    def test_worked_example_ten_million(self):
        plan = AdditionPlan(a=1e7, target_e_u=23, predicted_bound=0.5)
        assert apply_addition([1.5], plan).tolist() == [10000002.0]

    def test_zero_maps_to_parameter(self):
        data = [0.0, 300.0]
        plan = select_addition_parameter(data, ErrorBound("absolute", 1.0))
        shifted = apply_addition(data, plan)
        assert float(shifted[0]) == plan.a

    def test_sample_outside_plan_range(self):
        plan = plan_for_exponent([8.0, 12.0], 4)
        with pytest.raises(UnsupportedDataError):
            apply_addition([100.0], plan)


class TestInvert:
    def test_worked_example_recovery(self):
        plan = AdditionPlan(a=1e7, target_e_u=23, predicted_bound=0.5)
        recovered = invert_addition([10000002.0], plan)
        assert recovered.tolist() == [2.0]
        assert abs(recovered[0] - 1.5) == 0.5

    def test_table_round_trip_error_bound(self):
        plan = AdditionPlan(a=1738.0, target_e_u=10, predicted_bound=2.0**-14)
        data = np.float32([53.333, 309.333])
        recovered = invert_addition(apply_addition(data, plan), plan)
        errors = np.abs(recovered.astype(np.float64) - data.astype(np.float64))
        assert errors.max() <= 2.0**-14

    def test_exact_when_precision_preserved(self):
        # shifting within the sample's own binade loses nothing
        data = np.float32([1000000.0])
        plan = plan_for_exponent(data, 19)
        recovered = invert_addition(apply_addition(data, plan), plan)
        assert recovered.tolist() == data.tolist()


class TestProperties:
    def _random_feasible(self, rng):
        n = int(rng.integers(2, 40))
        lo = float(rng.uniform(-1000, 1000))
        width = float(rng.uniform(1e-3, 500))
        data = np.float32(rng.uniform(lo, lo + width, n))
        limit = width * 10.0 ** float(rng.uniform(-5, 0))
        try:
            plan = select_addition_parameter(data, ErrorBound("absolute", limit))
        except InfeasibleTransformError:
            return None
        return data, plan

    def test_exponent_sharing_and_quantisation(self, rng):
        checked = 0
        while checked < 200:
            case = self._random_feasible(rng)
            if case is None:
                continue
            data, plan = case
            shifted = apply_addition(data, plan)
            exps = {decompose(v).unbiased_exponent for v in shifted.tolist()}
            assert exps == {plan.target_e_u}
            recovered = invert_addition(shifted, plan)
            errors = np.abs(recovered.astype(np.float64) - data.astype(np.float64))
            step = precision(plan.target_e_u)
            assert errors.max() <= step / 2
            ratios = recovered.astype(np.float64) / step
            assert np.all(ratios == np.floor(ratios))
            checked += 1

    def test_quantisation_bracketing_brute_force(self):
        # all representable samples in [x_rec, x_rec + P_y/2 - P_x] share one
        # shifted value and one recovery
        plan = plan_for_exponent([1.0, 1.5], 4)  # P_y / P_x = 2^4
        step_y = precision(plan.target_e_u)
        step_x = precision(0)
        base = np.float32(1.25)
        rec0 = invert_addition(apply_addition([base], plan), plan)[0]
        start = float(rec0)
        stop = start + step_y / 2 - step_x
        samples = []
        v = np.float32(start)
        while float(v) <= stop:
            samples.append(float(v))
            v = np.nextafter(v, np.float32(np.inf))
        assert len(samples) > 2
        shifted = apply_addition(samples, plan)
        recovered = invert_addition(shifted, plan)
        assert len(set(shifted.tolist())) == 1
        assert set(recovered.tolist()) == {start}

    def test_plan_monotonicity_sampled(self, rng):
        # anchored plans at growing exponents never reduce the measured error
        for _ in range(50):
            n = int(rng.integers(2, 20))
            data = np.float32(rng.uniform(10, 200, n))
            errors = []
            for e_u in (10, 13, 16, 19):
                plan = plan_for_exponent(data, e_u)
                assert plan is not None
                recovered = invert_addition(apply_addition(data, plan), plan)
                errors.append(
                    float(np.max(np.abs(recovered.astype(np.float64) - data.astype(np.float64))))
                )
            assert errors == sorted(errors)
