import math
from fractions import Fraction

import pytest

from ifsresonance.errors import DomainError
from ifsresonance.ifs.systems import make_ifs
from ifsresonance.resonance import (
    arithmetic_lattice,
    check_pair,
    common_base,
    is_rational_ratio,
    log_ratio_irrational,
    rational_approximation,
)
from ifsresonance.schema import ResonanceMode


def test_exact_witness():
    assert is_rational_ratio(Fraction(1, 9), Fraction(1, 3)) == (2, 1)
    assert is_rational_ratio(Fraction(1, 8), Fraction(1, 4)) == (3, 2)
    assert is_rational_ratio(Fraction(1, 3), Fraction(1, 3)) == (1, 1)

def test_float_witness():
    assert is_rational_ratio(1 / 9, 1 / 3) == (2, 1)
    assert is_rational_ratio(0.125, 0.25) == (3, 2)

def test_opposite_sides_of_one():
    assert is_rational_ratio(Fraction(9), Fraction(1, 3)) == (-2, 1)

def test_common_base():
    assert common_base(Fraction(8), Fraction(4)) == 2
    assert common_base(Fraction(27, 8), Fraction(9, 4)) == Fraction(3, 2)
    assert common_base(Fraction(3), Fraction(2)) is None

def test_irrational_pairs():
    assert is_rational_ratio(Fraction(1, 3), Fraction(1, 4)) is None
    assert log_ratio_irrational(Fraction(1, 5), Fraction(1, 4))
    assert log_ratio_irrational(1 / 3, 0.25, q_max=10**4)

def test_bad_arguments():
    with pytest.raises(DomainError):
        is_rational_ratio(Fraction(1), Fraction(1, 3))
    with pytest.raises(DomainError):
        is_rational_ratio(Fraction(1, 3), Fraction(1, 9), q_max=0)

def test_rational_approximation():
    assert rational_approximation(0.75, 100, 1e-12) == (3, 4)
    assert rational_approximation(-0.5, 100, 1e-12) == (-1, 2)
    assert rational_approximation((math.sqrt(5) - 1) / 2, 1000, 1e-12) is None

def test_arithmetic_lattice():
    alpha = arithmetic_lattice([2 * math.log(3), 3 * math.log(3)], tol=1e-10, q_max=100)
    assert alpha == pytest.approx(math.log(3), rel=1e-9)
    assert arithmetic_lattice([math.log(3), math.log(4)], tol=1e-12, q_max=1000) is None

def test_check_pair(cantor_ninth, cantor_third):
    verdict = check_pair(cantor_ninth, cantor_third)
    assert verdict.resonant
    assert verdict.mode is ResonanceMode.EXACT
    assert verdict.witnesses[(0, 1)] == (2, 1)
    assert verdict.lattice == pytest.approx(math.log(3))

def test_check_pair_transposed(cantor_ninth, cantor_third):
    verdict = check_pair(cantor_ninth, cantor_third).transposed()
    assert verdict.witnesses[(1, 0)] == (1, 2)
    assert check_pair(cantor_third, cantor_ninth).witnesses[(1, 0)] == (1, 2)

def test_check_pair_not_resonant(cantor_third, cantor_quarter):
    verdict = check_pair(cantor_third, cantor_quarter, q_max=10**4)
    assert not verdict.resonant
    assert verdict.lattice is None
    assert all(w is None for w in verdict.witnesses.values())

def test_check_pair_mixed_ratios():
    left = make_ifs(["1/4", "1/2"], ["0", "1/2"])
    right = make_ifs(["1/8", "1/8"], ["0", "7/8"])
    verdict = check_pair(left, right)
    assert verdict.resonant
    assert verdict.witnesses[(0, 0)] == (2, 3)
    assert verdict.lattice == pytest.approx(math.log(2))

@pytest.mark.parametrize("x, y", [(1 / 9, 1 / 3), (1 / 8, 1 / 32), (0.3, 0.09), (1 / 3, 0.25), (0.2, 0.7)])
def test_witness_monotone_in_q_max(x, y):
    found = False
    for q_max in (1, 2, 3, 5, 10, 100, 1000, 10**5):
        witness = is_rational_ratio(x, y, q_max=q_max)
        assert witness is not None or not found
        found = witness is not None
