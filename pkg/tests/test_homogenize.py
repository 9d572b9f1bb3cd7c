import itertools
import math
from collections import Counter
from fractions import Fraction

import pytest

from ifsresonance.homogenize import (
    HomogeneousSubsystem,
    RepairStatus,
    dimension_loss,
    homogeneous_subsystem,
    homogenize_report,
    lattice_point,
    multinomial,
    multiset_permutations,
    prune_to_disjoint,
    reduce_pair,
    reduce_to_subcritical,
    remove_reflections,
    repair_irrationality,
)
from ifsresonance.errors import DomainError, ResourceError
from ifsresonance.ifs.systems import central_cantor, make_ifs, similarity_dimension
from ifsresonance.planar import regular_system
from ifsresonance.settings import settings


@pytest.fixture(scope="module")
def halves():
    return make_ifs(["1/2", "1/2"], ["0", "1/2"])

@pytest.fixture(scope="module")
def uneven():
    return make_ifs(["1/2", "1/4", "1/4"], ["0", "1/2", "3/4"])


def test_tau_ten(halves):
    report = homogenize_report(halves, 10)
    assert report.v == (5, 5)
    assert report.N_k == 252
    assert report.rho == Fraction(1, 2 ** 10)
    assert report.tau == pytest.approx(math.log(252) / (10 * math.log(2)), abs=1e-12)

def test_tau_approaches_dimension(halves):
    assert homogenize_report(halves, 100).tau >= 0.96

def test_counts_match_enumeration(uneven):
    for k in (2, 4, 6, 8):
        report = homogenize_report(uneven, k)
        length = sum(report.v)
        assert length <= 12
        words = [w for w in itertools.product(range(3), repeat=length)
                 if tuple(Counter(w)[i] for i in range(3)) == report.v]
        assert report.N_k == len(words)
        assert list(multiset_permutations(report.v)) == words

def test_multinomial():
    assert multinomial((2, 1, 1)) == 12
    assert multinomial((0, 3)) == 1

def test_subsystem_is_homogeneous(uneven):
    subsystem, report = homogeneous_subsystem(uneven, 4)
    assert subsystem.n == report.N_k
    assert set(subsystem.ratios) == {report.rho}

def test_lazy_subsystem(uneven, monkeypatch):
    monkeypatch.setattr(settings, "ENUMERATION_BUDGET", 5)
    subsystem, report = homogeneous_subsystem(uneven, 4)
    assert isinstance(subsystem, HomogeneousSubsystem)
    assert len(subsystem) == report.N_k
    assert sum(1 for _ in subsystem.words()) == report.N_k

def test_walk_length():
    with pytest.raises(DomainError):
        homogenize_report(central_cantor("1/3"), 0)

def test_prune_to_disjoint():
    overlapping = make_ifs(["1/2", "1/2", "1/2"], ["0", "1/4", "1/2"])
    with pytest.raises(DomainError):
        prune_to_disjoint(overlapping, Fraction(1, 2))
    pruned = prune_to_disjoint(overlapping, Fraction(1, 4))
    assert pruned.n == 3
    assert set(pruned.ratios) == {Fraction(1, 4)}
    before, after = dimension_loss(overlapping, pruned)
    assert before == pytest.approx(math.log(3) / math.log(2))
    assert after == pytest.approx(math.log(3) / math.log(4))

def test_repair_irrationality(cantor_quarter):
    other = make_ifs(["1/3", "1/2"], ["0", "1/2"])
    repair = repair_irrationality(cantor_quarter, other, cantor_quarter, central_cantor("1/4"))
    assert repair.status is RepairStatus.REPAIRED
    assert repair.left == cantor_quarter
    assert set(repair.right.ratios) == {Fraction(1, 12)}

def test_repair_unchanged(cantor_third, cantor_quarter):
    repair = repair_irrationality(cantor_third, cantor_quarter, cantor_third, cantor_quarter)
    assert repair.status is RepairStatus.UNCHANGED

def test_remove_reflections():
    ifs = regular_system(3, 0.3, reflect=True)
    for depth in (1, 2):
        oriented = remove_reflections(ifs, depth)
        assert len(oriented.system.maps) == 3 ** depth
        assert not any(f.reflect for f in oriented.system.maps)
        assert oriented.dimension_before == pytest.approx(math.log(3) / math.log(1 / 0.3))
        # odd words pick up one more letter
        scales = [0.3 ** (depth + depth % 2)] * 3 ** depth
        assert oriented.dimension_after == pytest.approx(similarity_dimension(scales))
        assert oriented.dimension_after <= oriented.dimension_before + 1e-12

def test_remove_reflections_identity():
    ifs = regular_system(3, 0.3)
    oriented = remove_reflections(ifs, 2)
    assert oriented.system is ifs
    assert oriented.dimension_before == oriented.dimension_after

def test_remove_reflections_budget(monkeypatch):
    monkeypatch.setattr(settings, "ENUMERATION_BUDGET", 8)
    with pytest.raises(ResourceError):
        remove_reflections(regular_system(3, 0.3, reflect=True), 2)

def test_reduce_to_subcritical(cantor_quarter):
    thirds = make_ifs(["1/3", "1/3", "1/3"], ["0", "1/3", "2/3"])
    reduced = reduce_to_subcritical(thirds, cantor_quarter, 0.2)
    total = similarity_dimension(reduced.ratios) + similarity_dimension(cantor_quarter.ratios)
    assert 0.8 < total < 1

def test_lattice_point_snaps(monkeypatch):
    # an exponent a rounding error below 1 puts 10·(1/2)^γ just above 5
    assert lattice_point([0.5, 0.5], 1.0 - 1e-15, 10) == (5, 5)
    assert lattice_point([0.5, 0.5], 1.0, 7) == (4, 4)
    monkeypatch.setattr(settings, "LATTICE_SNAP_TOL", 0.0)
    assert lattice_point([0.5, 0.5], 1.0 - 1e-15, 10) == (6, 6)

def test_reduce_pair(cantor_third):
    overlapping = make_ifs(["1/2", "1/2", "1/2"], ["0", "1/4", "1/2"])
    reduction = reduce_pair(overlapping, 4, cantor_third, delta=Fraction(1, 4))
    assert [(s.step, s.side) for s in reduction.steps] == [
        ("prune", "left"), ("homogenize", "left"), ("prune", "right"), ("homogenize", "right"),
        ("repair", "left"), ("repair", "right"),
    ]
    assert reduction.repair is RepairStatus.UNCHANGED
    prune = reduction.steps[0]
    assert prune.dimension_before == pytest.approx(math.log(3) / math.log(2))
    assert prune.dimension_after == pytest.approx(math.log(3) / math.log(4))
    for step in reduction.steps:
        assert step.dimension_after <= step.dimension_before + 1e-12
    assert reduction.left.homogeneous and reduction.right.homogeneous
    assert reduction.steps[-1].maps == reduction.right.n

def test_reduce_pair_subcritical(cantor_quarter):
    thirds = make_ifs(["1/3", "1/3", "1/3"], ["0", "1/3", "2/3"])
    reduction = reduce_pair(thirds, 6, cantor_quarter, epsilon=0.3)
    assert reduction.steps[-1].step == "subcritical"
    repaired = next(s for s in reduction.steps if s.step == "repair" and s.side == "left")
    assert reduction.steps[-1].maps < repaired.maps
    total = similarity_dimension(reduction.left.ratios) + similarity_dimension(reduction.right.ratios)
    assert 0.7 < total < 1

def test_reduce_single_system(uneven):
    reduction = reduce_pair(uneven, 4)
    assert reduction.right is None and reduction.repair is None
    (step,) = reduction.steps
    assert step.dimension_before == pytest.approx(1.0)
    assert step.dimension_after == pytest.approx(homogenize_report(uneven, 4).tau)
