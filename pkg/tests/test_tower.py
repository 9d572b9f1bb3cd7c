import math
from fractions import Fraction

import pytest

from ifsresonance.boxdim import dim_report
from ifsresonance.errors import DomainError
from ifsresonance.ifs.systems import make_ifs, similarity_dimension
from ifsresonance.marstrand import companion_depth, product_cells, tilde_cells
from ifsresonance.schema import RotationState
from ifsresonance.tower import (
    MkRow,
    build_tree,
    cumulative_bounds,
    frostman_bound,
    good_scale_set,
    mk_sequence,
    rotation_orbit,
    slope_angle,
    weyl_density,
)


@pytest.fixture(scope="module")
def tower(cantor_quarter, cantor_third):
    return build_tree(cantor_quarter, cantor_third, 0, m=3, epsilon=0.1, levels=8)


def test_mk_sequence():
    rows = mk_sequence(Fraction(1, 4), Fraction(1, 3), 6)
    assert rows[0] == MkRow(1, 1, Fraction(4, 3), False)
    assert all(1 <= row.M < 3 for row in rows)
    assert not any(row.coincident for row in rows)
    assert mk_sequence(Fraction(1, 9), Fraction(1, 3), 2)[0].coincident

def test_rotation_orbit():
    orbit = rotation_orbit(RotationState(0.3, 1.0), 4)
    assert orbit == pytest.approx([0.0, 0.3, 0.6, 0.9, 0.2])

def test_weyl_density():
    state = RotationState(math.sqrt(2) - 1, 1.0, ((0.0, 0.25),))
    assert weyl_density(state, 100_000) == pytest.approx(0.25, abs=0.01)
    assert weyl_density(RotationState(0.5, 1.0), 10) == 0.0

def test_rotation_state_checks():
    with pytest.raises(DomainError):
        RotationState(1.5, 1.0)
    with pytest.raises(DomainError):
        RotationState(0.3, 1.0, ((0.5, 0.7), (0.1, 0.2)))

def test_slope_angle():
    assert slope_angle(0.0) == pytest.approx(math.pi / 4)

def test_good_scale_set(cantor_quarter, cantor_third):
    family = product_cells(cantor_quarter, cantor_third, 2, sample_constants=False)
    beta = math.log(3)
    F, delta, sizes = good_scale_set(family, 0.0, beta, 0.1, steps=256)
    assert delta > 0
    assert len(sizes) == 256
    assert all(0 <= a < b <= beta for a, b in F)
    assert sum(b - a for a, b in F) >= 0.9 * beta - 1e-9

def test_tower_audits(tower):
    levels, report = tower
    assert len(levels) == 9
    assert all(all(level.audits.values()) for level in levels)
    assert set(levels[0].audits) == {"nesting", "size", "separation", "cylinder"}
    assert report.branching == tuple(level.children_per_node for level in levels[:-1])

def test_tower_weyl(tower):
    _, report = tower
    assert abs(report.weyl_frequency - report.weyl_expected) < 0.05

def test_tower_bound(tower, cantor_quarter, cantor_third):
    _, report = tower
    measured = dim_report(cantor_quarter, cantor_third, Fraction(1), 6, 12).value
    assert report.certified_slope >= 0.65
    assert report.certified_slope <= measured + 0.02
    assert report.theoretical_slope == pytest.approx(
        similarity_dimension([Fraction(1, 4)] * 2) + similarity_dimension([Fraction(1, 3)] * 2)
    )
    assert frostman_bound(report) == pytest.approx(report.certified_slope)
    bounds = cumulative_bounds(report.branching, report.m, report.ratio)
    assert bounds[-1] == pytest.approx(report.certified_slope)

def test_tower_node_counts(tower):
    levels, _ = tower
    for parent, child in zip(levels, levels[1:]):
        assert child.node_count == parent.node_count * parent.children_per_node

def test_resonant_pair_rejected(cantor_ninth, cantor_third):
    with pytest.raises(DomainError):
        build_tree(cantor_ninth, cantor_third, 0, 2, 0.1, 2)

def test_non_homogeneous_rejected(cantor_third):
    ifs = make_ifs(["1/2", "1/4"], ["0", "3/4"])
    with pytest.raises(DomainError):
        build_tree(ifs, cantor_third, 0, 2, 0.1, 2)

def test_wrapped_levels_use_refined_cells(tower, cantor_quarter, cantor_third):
    levels, _ = tower
    refined = set(tilde_cells(cantor_quarter, cantor_third, 3).words)
    depth = companion_depth(Fraction(1, 4), Fraction(1, 3), 3)
    wrapped = [level for level in levels[:-1] if level.case_two]
    assert wrapped
    for level in wrapped:
        assert all(len(u_prime) == depth + 1 and u_prime[-1] == 0 for _, u_prime in level.template)
        assert set(level.template) <= refined
    for level in levels[:-1]:
        if not level.case_two:
            assert all(len(u_prime) == depth for _, u_prime in level.template)
