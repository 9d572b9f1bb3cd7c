import math
from fractions import Fraction

import pytest

from ifsresonance.boxdim import dim_report
from ifsresonance.drop import (
    bound_from_q,
    carry_dimension,
    coincidence_scale,
    default_translations,
    digit_collision,
    drop_instance,
    essential_pair_bound,
    hit_probability,
    lattice_sum_dimension,
    normalize_exponents,
    representation_threshold,
    resonant_scale,
    resonant_system,
)
from ifsresonance.errors import DomainError, ResourceError
from ifsresonance.settings import settings


def _enumerate_hits(target, steps, probs):
    # sum over every step sequence landing exactly on target
    if target == 0:
        return Fraction(1)
    return sum((p * _enumerate_hits(target - s, steps, probs) for s, p in zip(steps, probs) if s <= target),
               Fraction(0))


def test_normalize_exponents():
    a_sys, b_sys, ell = normalize_exponents([1, 2], [1, 1])
    assert ell == 2
    assert a_sys == {2: 2, 3: 1}
    assert b_sys == {2: 4}

def test_normalized_systems_keep_dimension():
    xi = 0.5
    a_sys, _, _ = normalize_exponents([1, 2], [1, 1])
    beta = 0.6942419136306174  # 2^-β is the golden ratio conjugate
    assert sum(count * xi ** (beta * e) for e, count in a_sys.items()) == pytest.approx(1.0, abs=1e-12)

def test_representation_threshold():
    assert representation_threshold([2, 3]) == (1, 2)
    assert representation_threshold([2]) == (2, 2)
    assert representation_threshold([3, 5]) == (1, 8)
    assert representation_threshold([4, 6]) == (2, 4)
    with pytest.raises(DomainError):
        representation_threshold([0, 2])

def test_hit_probability():
    assert hit_probability(2, [1, 2], [Fraction(1, 2), Fraction(1, 2)]) == Fraction(3, 4)
    assert hit_probability(0, [1, 2], [Fraction(1, 2), Fraction(1, 2)]) == 1

def test_hit_probability_enumeration():
    cases = [
        ([1, 2], [Fraction(1, 2), Fraction(1, 2)]),
        ([1, 3], [Fraction(1, 3), Fraction(2, 3)]),
        ([2, 3], [Fraction(1, 4), Fraction(3, 4)]),
    ]
    for steps, probs in cases:
        for target in range(16):
            assert hit_probability(target, steps, probs) == _enumerate_hits(target, steps, probs)

def test_hit_probability_checks():
    with pytest.raises(DomainError):
        hit_probability(-1, [1], [Fraction(1)])
    with pytest.raises(DomainError):
        hit_probability(3, [1, 2], [Fraction(1, 2), Fraction(1, 3)])

def test_drop_instance_constants():
    inst = drop_instance(Fraction(1, 2), [1, 2], [1, 1])
    assert (inst.ell, inst.a, inst.b, inst.A, inst.B, inst.M0, inst.M) == (2, 1, 2, 3, 2, 2, 6)
    assert 0 < inst.p <= 1
    assert 0 < inst.q < 1

def test_homogeneous_pair_bound():
    inst = drop_instance(Fraction(1, 4), [1, 1], [1, 1])
    assert inst.q == pytest.approx(1 / 16)
    assert essential_pair_bound(inst) == pytest.approx(1 + math.log(15 / 16) / (4 * math.log(2)))
    assert essential_pair_bound(inst) == pytest.approx(0.97672, abs=1e-4)

def test_essential_pair_bound_above_measurement():
    xi = Fraction(1, 2)
    t, t_prime = default_translations(xi, [1, 2]), default_translations(xi, [1, 1])
    inst = drop_instance(xi, [1, 2], [1, 1], t, t_prime)
    bound = essential_pair_bound(inst)
    assert bound < inst.beta + inst.beta_prime
    left, right = resonant_system(xi, [1, 2], t), resonant_system(xi, [1, 1], t_prime)
    measured = dim_report(left, right, resonant_scale(t, t_prime), 4, 9, base=Fraction(2)).value
    assert bound >= measured - 0.03

def test_bound_continuity():
    values = [bound_from_q(0.5, 0.5, q, 2, Fraction(1, 4)) for q in (1e-3, 1e-6, 1e-12)]
    assert values == sorted(values)
    assert values[-1] == pytest.approx(1.0, abs=1e-11)

def test_digit_collision():
    D = [Fraction(0), Fraction(3, 4)]
    s = resonant_scale(D, D)
    assert s == 1
    report = digit_collision(D, D, s, Fraction(1, 4))
    assert report.sum_size == 3
    assert report.bound == pytest.approx(math.log(3) / math.log(4))
    assert digit_collision(D, D, Fraction(1, 3), Fraction(1, 4)).sum_size == 4

def test_default_translations():
    assert default_translations(Fraction(1, 3), [1, 1]) == [0, Fraction(2, 3)]
    assert default_translations(Fraction(1, 2), [1, 2]) == [0, Fraction(3, 4)]
    with pytest.raises(DomainError):
        default_translations(Fraction(1, 2), [1, 1, 1])

def test_resonant_system(cantor_third):
    ifs = resonant_system(Fraction(1, 3), [1, 1], [Fraction(0), Fraction(2, 3)])
    assert ifs == cantor_third

def test_coincidence_scale(cantor_ninth, cantor_third):
    assert coincidence_scale(cantor_ninth, cantor_third) == Fraction(4, 3)

def test_carry_dimension():
    assert carry_dimension([0, 1], 2) == pytest.approx(1.0)
    assert carry_dimension([0, 2], 3) == pytest.approx(math.log(2) / math.log(3))
    # {0, 1, 2} in base 2 overlaps and fills [0, 2]
    assert carry_dimension([0, 1, 2], 2) == pytest.approx(1.0)
    assert carry_dimension([5], 4) == 0.0
    # the doubled quarter Cantor digits 0, 3, 6 carry past base 4
    assert carry_dimension([0, 3, 6], 4) == pytest.approx(math.log(3) / math.log(4))
    assert carry_dimension([-3, 0, 3], 4) == pytest.approx(math.log(3) / math.log(4))

def test_carry_dimension_checks(monkeypatch):
    with pytest.raises(DomainError):
        carry_dimension([0, 1], 1)
    with pytest.raises(DomainError):
        carry_dimension([], 3)
    monkeypatch.setattr(settings, "MAX_CELLS", 1)
    with pytest.raises(ResourceError):
        carry_dimension([0, 1, 2], 2)

def test_lattice_sum_dimension(cantor_quarter):
    D = [Fraction(0), Fraction(3, 4)]
    expected = math.log(3) / math.log(4)
    assert lattice_sum_dimension(D, D, Fraction(1), Fraction(1, 4)) == pytest.approx(expected)
    measured = dim_report(cantor_quarter, cantor_quarter, Fraction(1), 6, 12).value
    assert abs(measured - expected) < 0.02
    assert lattice_sum_dimension(D, D, Fraction(1), Fraction(2, 5)) is None
    assert lattice_sum_dimension([0.0, 0.75], [0.0, 0.75], 1.0, 0.25) is None
