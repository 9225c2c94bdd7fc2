import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hazardscope.errors import ValidationError
from hazardscope.signals import (MotionSeries, SeriesKind, median_min_distance_series, min_max_normalize,
                                 object_size_series, read_series_csv, write_series_csv)
from conftest import make_video


def _series(values):
    return MotionSeries("v", SeriesKind.OBJECT_SIZE, np.asarray(values, dtype=float))


def test_object_size_sum_of_areas():
    v = make_video({"a": {0: (0, 0, 10, 10), 2: (2, 3, 4, 9)}, "b": {0: (0, 0, 5, 5)}}, n_frames=3)
    assert object_size_series(v).values.tolist() == [125.0, 0.0, 12.0]


@pytest.mark.parametrize("values,expected", [
    ([100, 125, 150], [0, 0.5, 1]),
    ([7, 7, 7], [0, 0, 0]),
    ([0, 1], [0, 1]),
])
def test_min_max_normalize(values, expected):
    assert min_max_normalize(_series(values)).values.tolist() == expected


def test_normalize_empty_rejected():
    with pytest.raises(ValidationError):
        min_max_normalize(_series([]))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
def test_normalize_range(values):
    out = min_max_normalize(_series(values)).values
    assert out.min() >= 0.0 and out.max() <= 1.0
    if max(values) > min(values):
        assert out.min() == 0.0 and out.max() == 1.0


def test_series_rejects_non_finite():
    with pytest.raises(ValidationError):
        _series([0.0, float("nan")])


def test_median_min_distance_hand_case():
    v = make_video({
        "a": {0: (-1, -1, 1, 1), 1: (-1, -1, 1, 1)},
        "b": {0: (5, -1, 7, 1), 1: (9, -1, 11, 1)},
    })
    # frame 1 centers (0,0),(10,0); frame 0 centers (0,0),(6,0) -> minima {0, 4}
    assert median_min_distance_series(v).values.tolist() == [0.0, 2.0]


def test_median_min_distance_degenerate():
    same = make_video({"a": {0: (0, 0, 4, 4), 1: (0, 0, 4, 4)}})
    assert median_min_distance_series(same).values.tolist() == [0.0, 0.0]
    gap = make_video({"a": {0: (0, 0, 4, 4), 2: (10, 0, 14, 4)}})
    assert median_min_distance_series(gap).values.tolist() == [0.0, 0.0, 0.0]


def test_median_odd_count():
    v = make_video({
        "a": {0: (0, 0, 0, 0), 1: (1, 0, 1, 0)},
        "b": {0: (100, 0, 100, 0), 1: (103, 0, 103, 0)},
        "c": {1: (50, 0, 50, 0)},
    })
    # minima: 1, 3, 50 -> median 3
    assert median_min_distance_series(v).values[1] == 3.0


def test_csv_round_trip(tmp_path):
    s = MotionSeries("v", SeriesKind.MEDIAN_DISTANCE, np.array([0.0, 1 / 3, 2.5e-17, 1e300]))
    p = tmp_path / "s.csv"
    write_series_csv(s, p)
    assert p.read_text().splitlines()[0] == "frame_index,value"
    back = read_series_csv(p, "v", "median_distance")
    np.testing.assert_array_equal(back.values, s.values)
