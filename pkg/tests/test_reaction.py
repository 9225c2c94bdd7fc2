import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hazardscope.errors import ValidationError
from hazardscope.reaction import (ReactionSeries, baseline_slope_rule, ensemble_and, ensemble_mean_position,
                                  ensemble_or, prefix_slopes, step_from_breakpoint, write_reaction_csv)
from hazardscope.signals import MotionSeries, SeriesKind
from oracles import exact_prefix_slope_step


def _step(pos, n=50):
    return step_from_breakpoint(None if pos == n else pos, n)


def _signal(values):
    return MotionSeries("v", SeriesKind.MEDIAN_DISTANCE, np.asarray(values, dtype=float))


class TestSeries:
    def test_verbatim(self):
        assert ReactionSeries("v", (False, False, True, True)).values == (False, False, True, True)

    def test_not_monotone(self):
        with pytest.raises(ValidationError):
            ReactionSeries("v", (False, True, False))

    @pytest.mark.parametrize("bp,n,expected", [
        (2, 5, (False, False, True, True, True)),
        (None, 3, (False, False, False)),
        (0, 2, (True, True)),
    ])
    def test_from_breakpoint(self, bp, n, expected):
        s = step_from_breakpoint(bp, n)
        assert s.values == expected and s.step == bp

    def test_breakpoint_out_of_range(self):
        with pytest.raises(ValidationError):
            step_from_breakpoint(5, 5)

    def test_csv(self, tmp_path):
        p = tmp_path / "r.csv"
        write_reaction_csv(step_from_breakpoint(1, 3, "v"), p)
        assert p.read_text().splitlines() == ["frame_index,driver_state_changed", "0,False", "1,True", "2,True"]


class TestBaseline:
    def test_decreasing(self):
        assert baseline_slope_rule(_signal([10, 8, 6, 4]), min_window=3).step == 2

    def test_constant_and_increasing(self):
        assert baseline_slope_rule(_signal([3.0] * 20), min_window=3).step is None
        assert baseline_slope_rule(_signal(np.arange(20.0)), min_window=3).step is None

    def test_short_series(self):
        assert baseline_slope_rule(_signal([5, 4]), min_window=3).step is None

    def test_prefix_slopes(self):
        s = prefix_slopes([1.0, 3.0, 5.0, 4.0])
        assert math.isnan(s[0])
        np.testing.assert_allclose(s[1:], [2.0, 2.0, 1.1], atol=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(-50, 50), min_size=2, max_size=30), st.integers(2, 8))
    def test_matches_exact_regression(self, values, window):
        got = baseline_slope_rule(_signal(values), min_window=window).step
        assert got == exact_prefix_slope_step(values, window)


class TestEnsembles:
    def test_or(self):
        assert ensemble_or([_step(10), _step(20)]).step == 10
        assert ensemble_or([_step(50), _step(20)]).step == 20
        assert ensemble_or([_step(50), _step(50)]).step is None

    def test_and(self):
        assert ensemble_and([_step(10), _step(20)]).step == 20
        assert ensemble_and([_step(50), _step(20)]).step is None
        assert ensemble_and([_step(7), _step(7)]).step == 7

    def test_mean_position(self):
        assert ensemble_mean_position([_step(10), _step(20)]).step == 15
        assert ensemble_mean_position([_step(3), _step(4)]).step == 3
        assert ensemble_mean_position([_step(13)]).step == 13
        # no-step counts as n: (40 + 50) / 2 = 45
        assert ensemble_mean_position([_step(40), _step(50)]).step == 45
        assert ensemble_mean_position([_step(49), _step(50)]).step == 49

    def test_mismatched_lengths(self):
        with pytest.raises(ValidationError):
            ensemble_or([_step(1, 5), _step(1, 6)])
        with pytest.raises(ValidationError):
            ensemble_and([])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.integers(0, 30), min_size=1, max_size=5))
    def test_results_stay_monotone(self, positions):
        series = [_step(p, 30) for p in positions]
        for fn in (ensemble_or, ensemble_and, ensemble_mean_position):
            out = fn(series)
            assert len(out) == 30
            assert min(positions) <= out.position() <= max(positions)
