import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

from ifsresonance.boxdim import cylinders_at_scale
from ifsresonance.errors import ConsistencyError, DomainError, ResourceError
from ifsresonance.ifs.scalar import Scalar, log_abs, power
from ifsresonance.ifs.systems import attractor_hull, compose_word, iterate, similarity_dimension
from ifsresonance.logger import get_logger
from ifsresonance.resonance import log_ratio_irrational
from ifsresonance.schema import IFS1D, IFS2D, HomogenizeReport, Similitude1D, Similitude2D, Word
from ifsresonance.settings import settings

logger = get_logger(__name__)


def _system(maps: Sequence[Similitude1D]) -> IFS1D:
    maps = tuple(maps)
    return IFS1D(maps, attractor_hull(maps))


def prune_to_disjoint(ifs: IFS1D, delta: Scalar) -> IFS1D:
    """
    Greedy maximal family of pairwise disjoint scale-δ cylinders, scanned by
    left endpoint, as a system of word compositions.
    """
    cylinders = sorted(cylinders_at_scale(ifs, delta), key=lambda c: (c.interval.lo, c.interval.hi))
    kept = []
    last_hi = None
    for cyl in cylinders:
        if last_hi is None or cyl.interval.lo > last_hi:
            kept.append(cyl)
            last_hi = cyl.interval.hi
    if len(kept) < 2:
        raise DomainError(f"fewer than two disjoint cylinders at scale {delta}; use a smaller δ")

    for a, b in zip(kept, kept[1:]):
        if not a.interval.hi < b.interval.lo:
            raise ConsistencyError("pruned cylinders overlap")
    logger.info("pruned %d cylinders to %d disjoint ones", len(cylinders), len(kept))
    return _system([compose_word(ifs, c.word) for c in kept])


def dimension_loss(ifs: IFS1D, reduced: IFS1D) -> Tuple[float, float]:
    """Similarity dimensions before and after a reduction step."""
    return similarity_dimension(ifs.ratios), similarity_dimension(reduced.ratios)


def multiset_permutations(counts: Sequence[int]) -> Iterator[Word]:
    """Words with exactly counts[i] letters i, in lexicographic order."""
    remaining = list(counts)
    length = sum(counts)
    word: List[int] = []

    def extend() -> Iterator[Word]:
        if len(word) == length:
            yield tuple(word)
            return
        for letter, left in enumerate(remaining):
            if left == 0:
                continue
            remaining[letter] -= 1
            word.append(letter)
            yield from extend()
            word.pop()
            remaining[letter] += 1

    return extend()


def multinomial(counts: Sequence[int]) -> int:
    total = 0
    result = 1
    for c in counts:
        total += c
        result *= math.comb(total, c)
    return result


@dataclass(frozen=True)
class HomogeneousSubsystem:
    """All words with letter counts v, produced on demand."""
    parent: IFS1D
    v: Tuple[int, ...]
    ratio: Scalar

    def __len__(self) -> int:
        return multinomial(self.v)

    def words(self) -> Iterator[Word]:
        return multiset_permutations(self.v)

    def maps(self) -> Iterator[Similitude1D]:
        return (compose_word(self.parent, w) for w in self.words())

    def materialize(self) -> IFS1D:
        if len(self) > settings.ENUMERATION_BUDGET:
            raise ResourceError("enumeration_budget", len(self), settings.ENUMERATION_BUDGET)
        return _system(list(self.maps()))


def lattice_point(ratios: Sequence[Scalar], gamma: float, k: int) -> Tuple[int, ...]:
    """v_i = ⌈k·r_i^γ⌉, snapping values within LATTICE_SNAP_TOL of an integer onto it."""
    v = []
    for r in ratios:
        x = k * float(r) ** gamma
        nearest = round(x)
        if abs(x - nearest) <= settings.LATTICE_SNAP_TOL * max(1.0, x):
            if x != nearest:
                logger.info("k·r^γ = %.17g taken as %d", x, nearest)
            v.append(int(nearest))
        else:
            v.append(math.ceil(x))
    return tuple(v)


def homogenize_report(ifs: IFS1D, k: int) -> HomogenizeReport:
    """
    Words with exactly v_i = ⌈k·r_i^γ⌉ letters i all share the ratio ρ = Π r_i^{v_i};
    their number is the multinomial N_k, and τ = log N_k / log(1/ρ).
    """
    if k < 1:
        raise DomainError(f"walk length must be at least 1, got {k}")
    if any(r <= 0 for r in ifs.ratios):
        raise DomainError("homogenization needs positive ratios")
    gamma = similarity_dimension(ifs.ratios)
    v = lattice_point(ifs.ratios, gamma, k)
    N = multinomial(v)
    rho = math.prod((power(r, vi) for r, vi in zip(ifs.ratios, v)), start=power(ifs.ratios[0], 0))
    tau = math.log(N) / -log_abs(rho)
    report = HomogenizeReport(k=k, v=v, N_k=N, rho=rho, tau=tau, gamma=gamma)
    logger.info("homogenize k=%d: v=%s, N_k=%d, τ=%.6f (γ=%.6f)", k, v, N, tau, gamma)
    return report


def homogeneous_subsystem(
    ifs: IFS1D, k: int
) -> Tuple[Union[IFS1D, HomogeneousSubsystem], HomogenizeReport]:
    """The subsystem of homogenize_report; beyond the enumeration budget it comes back unmaterialized."""
    report = homogenize_report(ifs, k)
    lazy = HomogeneousSubsystem(ifs, report.v, report.rho)
    if report.N_k > settings.ENUMERATION_BUDGET:
        return lazy, report
    return lazy.materialize(), report


class RepairStatus(str, Enum):
    UNCHANGED = "unchanged"
    REPAIRED = "repaired"
    INCONCLUSIVE = "inconclusive"


class Repair(NamedTuple):
    left: IFS1D
    right: IFS1D
    status: RepairStatus


def _common_ratio(ifs: IFS1D) -> Scalar:
    if not ifs.homogeneous:
        raise DomainError("expected a homogeneous system")
    return abs(ifs.ratios[0])


def _prefixed(prefix: Similitude1D, hom: IFS1D) -> IFS1D:
    return _system([prefix.compose(g) for g in hom.maps])


def repair_irrationality(
    ifs: IFS1D,
    ifs_prime: IFS1D,
    hom: IFS1D,
    hom_prime: IFS1D,
    q_max: Optional[int] = None,
    tol: Optional[float] = None,
) -> Repair:
    """
    Make the common ratios ρ, ρ' of two homogeneous subsystems log-independent
    by prefixing every map with f_1 (or f'_1) when they are not already.
    """
    rho, rho_prime = _common_ratio(hom), _common_ratio(hom_prime)
    if log_ratio_irrational(rho, rho_prime, q_max, tol):
        return Repair(hom, hom_prime, RepairStatus.UNCHANGED)

    first, first_prime = ifs.maps[0], ifs_prime.maps[0]
    candidates = [
        (True, False),
        (False, True),
        (True, True),
    ]
    for left_prefix, right_prefix in candidates:
        new_rho = rho * abs(first.ratio) if left_prefix else rho
        new_rho_prime = rho_prime * abs(first_prime.ratio) if right_prefix else rho_prime
        if log_ratio_irrational(new_rho, new_rho_prime, q_max, tol):
            left = _prefixed(first, hom) if left_prefix else hom
            right = _prefixed(first_prime, hom_prime) if right_prefix else hom_prime
            logger.info("repaired a rational relation between ρ=%s and ρ'=%s", rho, rho_prime)
            return Repair(left, right, RepairStatus.REPAIRED)

    logger.warning("cannot certify an irrational log-ratio after prefixing")
    return Repair(hom, hom_prime, RepairStatus.INCONCLUSIVE)


class Oriented(NamedTuple):
    system: IFS2D
    dimension_before: float
    dimension_after: float


def remove_reflections(ifs: IFS2D, depth: int) -> Oriented:
    """
    Depth-`depth` word maps; each one carrying an odd number of reflections is
    composed with the first reflecting generator, so every result preserves orientation.
    The similarity dimensions of the input and of the result come back with it.
    """
    if depth < 1:
        raise DomainError(f"depth must be at least 1, got {depth}")
    count = len(ifs.maps) ** depth
    if count > settings.ENUMERATION_BUDGET:
        raise ResourceError("enumeration_budget", count, settings.ENUMERATION_BUDGET)
    before = similarity_dimension(ifs.scales)
    reflecting = [f for f in ifs.maps if f.reflect]
    if not reflecting:
        return Oriented(ifs, before, before)
    flip = reflecting[0]
    maps: List[Similitude2D] = []
    for word in itertools.product(range(len(ifs.maps)), repeat=depth):
        composed = ifs.maps[word[0]]
        for index in word[1:]:
            composed = composed.compose(ifs.maps[index])
        if composed.reflect:
            composed = composed.compose(flip)
        maps.append(composed)
    oriented = IFS2D(tuple(maps), ifs.center, ifs.radius)
    after = similarity_dimension(oriented.scales)
    logger.info("removed reflections at depth %d: dimension %.6f -> %.6f", depth, before, after)
    return Oriented(oriented, before, after)


def reduce_to_subcritical(ifs: IFS1D, other: IFS1D, epsilon: float, max_depth: int = 12) -> IFS1D:
    """
    Iterate `ifs` and keep a prefix of its word maps so that
    1 − ε < dim(K̃) + dim(K') < 1.
    """
    if not 0 < epsilon < 1:
        raise DomainError(f"ε must lie in (0, 1), got {epsilon}")
    other_dim = similarity_dimension(other.ratios)
    if similarity_dimension(ifs.ratios) + other_dim < 1:
        return ifs
    if other_dim >= 1:
        raise DomainError("the other system alone already has dimension >= 1")

    for depth in range(1, max_depth + 1):
        if ifs.n ** depth > settings.ENUMERATION_BUDGET:
            break
        maps = iterate(ifs, depth).maps

        def total(count: int) -> float:
            return similarity_dimension([f.ratio for f in maps[:count]]) + other_dim

        # largest prefix with total < 1, by bisection on the kept count
        lo, hi = 1, len(maps)
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if total(mid) < 1:
                lo = mid
            else:
                hi = mid - 1
        if lo >= 2 and total(lo) > 1 - epsilon:
            logger.info("kept %d of %d maps at depth %d", lo, len(maps), depth)
            return _system(maps[:lo])
    raise DomainError(f"no sub-critical subsystem within ε={epsilon} up to the enumeration budget")


class ReductionStep(NamedTuple):
    step: str
    side: str
    maps: int
    dimension_before: float
    dimension_after: float


class Reduction(NamedTuple):
    left: IFS1D
    right: Optional[IFS1D]
    steps: List[ReductionStep]
    repair: Optional[RepairStatus]


def reduce_pair(
    ifs: IFS1D,
    k: int,
    other: Optional[IFS1D] = None,
    delta: Optional[Scalar] = None,
    epsilon: Optional[float] = None,
    q_max: Optional[int] = None,
    tol: Optional[float] = None,
) -> Reduction:
    """
    Chain of reductions toward a disjoint, homogeneous pair: prune each system
    to disjoint cylinders at δ (when given), extract its homogeneous subsystem
    of walk length k, repair a rational log-ratio between the two common
    ratios and, with ε, cut the left system to a sub-critical one. Every step
    records the similarity dimension before and after.
    """
    steps: List[ReductionStep] = []

    def record(step: str, side: str, before: IFS1D, after: IFS1D) -> IFS1D:
        lost = dimension_loss(before, after)
        steps.append(ReductionStep(step, side, after.n, *lost))
        return after

    def homogeneous(system: IFS1D, side: str) -> Tuple[IFS1D, IFS1D]:
        if delta is not None:
            system = record("prune", side, system, prune_to_disjoint(system, delta))
        report = homogenize_report(system, k)
        hom = HomogeneousSubsystem(system, report.v, report.rho).materialize()
        return system, record("homogenize", side, system, hom)

    left, left_hom = homogeneous(ifs, "left")
    if other is None:
        return Reduction(left_hom, None, steps, None)
    right, right_hom = homogeneous(other, "right")
    repair = repair_irrationality(left, right, left_hom, right_hom, q_max, tol)
    left_hom = record("repair", "left", left_hom, repair.left)
    right_hom = record("repair", "right", right_hom, repair.right)
    if epsilon is not None:
        left_hom = record("subcritical", "left", left_hom, reduce_to_subcritical(left_hom, right_hom, epsilon))
    return Reduction(left_hom, right_hom, steps, repair.status)
