import math
from fractions import Fraction

import numpy as np
import pytest

from ifsresonance.boxdim import (
    attractor_cover,
    box_count,
    count_series,
    cover_interval_bound,
    cylinder_count,
    cylinders_at_scale,
    dim_report,
    estimate_dimension,
    random_attractor_points,
    scale_ladder,
    sum_cover,
)
from ifsresonance.drop import carry_dimension
from ifsresonance.errors import DomainError, ResourceError
from ifsresonance.ifs.systems import central_cantor, conjugate, make_ifs
from ifsresonance.schema import BoxCountSeries
from ifsresonance.settings import settings


def _digit_sum_count(L):
    # x with base-9 digits {0, 8}, y with base-3 digits {0, 2}, both in units of 3^-L
    x = np.zeros(1, dtype=np.int64)
    for i in range(1, L // 2 + 1):
        x = np.add.outer(x, np.array([0, 8 * 3 ** (L - 2 * i)])).ravel()
    y = np.zeros(1, dtype=np.int64)
    for i in range(1, L + 1):
        y = np.add.outer(y, np.array([0, 2 * 3 ** (L - i)])).ravel()
    return len(np.unique(np.add.outer(x, y).ravel()))


def test_cylinders_lexicographic(cantor_third):
    cylinders = cylinders_at_scale(cantor_third, Fraction(1, 9))
    assert [c.word for c in cylinders] == [(0, 0), (0, 1), (1, 0), (1, 1)]
    assert cylinder_count(cantor_third, Fraction(1, 9)) == 4

def test_non_homogeneous_cylinders():
    ifs = make_ifs(["1/2", "1/4"], ["0", "3/4"])
    cylinders = cylinders_at_scale(ifs, Fraction(1, 4))
    assert [c.word for c in cylinders] == [(0, 0), (0, 1), (1,)]
    assert all(c.interval.length <= Fraction(1, 4) for c in cylinders)

def test_cantor_counts(cantor_third):
    series = count_series(cantor_third, list(range(1, 9)))
    assert series.counts == tuple(2 ** k for k in range(1, 9))
    estimate = estimate_dimension(series)
    assert estimate.value == pytest.approx(math.log(2) / math.log(3), abs=1e-9)
    assert estimate.scale_range == (3, 8)

def test_quarter_sum_counts(cantor_quarter):
    series = count_series(cantor_quarter, list(range(1, 7)), cantor_quarter)
    assert series.counts == tuple(2 * 3 ** k for k in range(1, 7))

def test_resonant_sum_drops(cantor_ninth, cantor_third):
    assert scale_ladder(cantor_ninth, cantor_third) == 3
    estimate = dim_report(cantor_ninth, cantor_third, Fraction(1), 4, 12)
    assert estimate.value < 0.9364

    ls = list(range(6, 15, 2))
    counts = [_digit_sum_count(L) for L in ls]
    oracle = np.polyfit([L * math.log(3) for L in ls], np.log(counts), 1)[0]
    assert abs(estimate.value - oracle) < 0.03

    # one base-9 digit of x + y: {0, 8} from x plus {0, 2, 6, 8} from two base-3 digits of y
    blocks = sorted({a + b for a in (0, 8) for b in (0, 2, 6, 8)})
    assert blocks == [0, 2, 6, 8, 10, 14, 16]
    exact = carry_dimension(blocks, 9)
    assert exact == pytest.approx(math.log(7) / math.log(9))
    assert abs(estimate.value - exact) < 0.02

def test_parallel_counts(cantor_third):
    ks = list(range(1, 7))
    assert count_series(cantor_third, ks, workers=2).counts == count_series(cantor_third, ks).counts

def test_float_mode():
    estimate = dim_report(central_cantor(1 / 3), None, None, 4, 10)
    assert estimate.value == pytest.approx(math.log(2) / math.log(3), abs=0.05)

def test_degenerate_estimate():
    series = BoxCountSeries((1, 2, 3, 4), (0.5, 0.25, 0.125, 0.0625), (3, 3, 3, 3))
    estimate = estimate_dimension(series)
    assert estimate.degenerate
    assert estimate.value == 0.0

def test_estimate_needs_three_scales():
    series = BoxCountSeries((1, 2), (0.5, 0.25), (2, 4))
    with pytest.raises(DomainError):
        estimate_dimension(series)

def test_cover_membership(cantor_third):
    delta = Fraction(1, 3 ** 6)
    cover = attractor_cover(cantor_third, delta)
    assert len(cover) == 2 ** 6
    points = random_attractor_points(cantor_third, 200, 20, seed=3)
    assert all(cover.contains_point(x) for x in points)
    assert not cover.contains_point(Fraction(1, 2))
    assert box_count(cover, delta) <= cover_interval_bound(cover, delta)

def test_sum_cover_membership(cantor_quarter, cantor_fifth):
    delta = Fraction(1, 4 ** 5)
    s = Fraction(2, 3)
    cover = sum_cover(cantor_quarter, cantor_fifth, s, delta)
    xs = random_attractor_points(cantor_quarter, 100, 12, seed=1)
    ys = random_attractor_points(cantor_fifth, 100, 12, seed=2)
    assert all(cover.contains_point(x + s * y) for x, y in zip(xs, ys))
    assert box_count(cover, delta) <= cover_interval_bound(cover, delta)

def test_cell_budget(cantor_third, monkeypatch):
    monkeypatch.setattr(settings, "MAX_CELLS", 10)
    with pytest.raises(ResourceError) as excinfo:
        cylinders_at_scale(cantor_third, Fraction(1, 3 ** 5))
    assert excinfo.value.budget == "max_cells"
    assert excinfo.value.requested == 32

def test_pair_budget(cantor_third, monkeypatch):
    monkeypatch.setattr(settings, "MAX_PAIRS", 100)
    with pytest.raises(ResourceError):
        sum_cover(cantor_third, cantor_third, Fraction(1), Fraction(1, 3 ** 4))

def test_bad_scale(cantor_third):
    with pytest.raises(DomainError):
        sum_cover(cantor_third, cantor_third, Fraction(-1), Fraction(1, 9))
    with pytest.raises(DomainError):
        cylinder_count(cantor_third, Fraction(0))

@pytest.mark.parametrize("a", ["1/3", "1/4", "2/5"])
def test_scaling_covariance(a):
    ifs = central_cantor(a)
    scaled = conjugate(ifs, Fraction(1, 3), 0)
    for k in range(1, 7):
        delta = Fraction(1, 3) ** k
        assert box_count(attractor_cover(scaled, delta / 3), delta / 3) == box_count(attractor_cover(ifs, delta), delta)

def test_sum_scaling_covariance(cantor_ninth, cantor_third):
    left, right = conjugate(cantor_ninth, Fraction(1, 3), 0), conjugate(cantor_third, Fraction(1, 3), 0)
    for k in range(2, 7):
        delta = Fraction(1, 3) ** k
        scaled = box_count(sum_cover(left, right, Fraction(1), delta / 3), delta / 3)
        assert scaled == box_count(sum_cover(cantor_ninth, cantor_third, Fraction(1), delta), delta)
