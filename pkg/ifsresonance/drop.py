"""
Upper bounds for dim(K + sK') when every ratio is a power of one base ξ.

Exponent systems are multisets {exponent: multiplicity}; the ℓ-normalization
acts on them by convolution and never builds the word maps themselves.
"""
import math
from collections import Counter
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ifsresonance.errors import ConsistencyError, DomainError, ResourceError
from ifsresonance.ifs.scalar import Scalar, common_mode, is_exact, log_abs, power
from ifsresonance.ifs.systems import attractor_hull, similarity_dimension
from ifsresonance.ifs.utils import common_unit
from ifsresonance.logger import get_logger
from ifsresonance.schema import IFS1D, DigitSumReport, DropInstance, Similitude1D
from ifsresonance.settings import settings

logger = get_logger(__name__)

ExponentSystem = Dict[int, int]


def resonant_scale(t: Sequence[Scalar], t_prime: Sequence[Scalar]) -> Scalar:
    """s = (t_n − t_1)/(t'_n' − t'_1), which makes the extreme digit sums collide."""
    t, t_prime = sorted(t), sorted(t_prime)
    if len(t) < 2 or len(t_prime) < 2 or t[-1] == t[0] or t_prime[-1] == t_prime[0]:
        raise DomainError("each translation set needs two distinct entries")
    return (t[-1] - t[0]) / (t_prime[-1] - t_prime[0])


def _distinct(values: Sequence[Scalar]) -> int:
    if common_mode(values):
        return len(set(values))
    ordered = sorted(float(v) for v in values)
    count = 1
    for a, b in zip(ordered, ordered[1:]):
        if b - a > settings.FLOAT_TOL * max(1.0, abs(a), abs(b)):
            count += 1
    return count


def digit_collision(D: Sequence[Scalar], D_prime: Sequence[Scalar], s: Scalar, xi: Scalar) -> DigitSumReport:
    """|D + sD'| and the bound log|D + sD'| / log(1/ξ)."""
    if not 0 < xi < 1:
        raise DomainError(f"base ξ must lie in (0, 1), got {xi}")
    sums = [d + s * e for d in D for e in D_prime]
    sum_size = _distinct(sums)
    bound = math.log(sum_size) / -log_abs(xi)
    if len(D) >= 2 and len(D_prime) >= 2 and len(set(D)) >= 2 and len(set(D_prime)) >= 2:
        if s == resonant_scale(D, D_prime) and not sum_size < len(D) * len(D_prime):
            raise ConsistencyError("resonant scale produced no digit collision")
    return DigitSumReport(tuple(D), tuple(D_prime), s, sum_size, bound)


def carry_dimension(digits: Sequence[int], base: int) -> float:
    """
    Dimension of {Σ e_i·base^-i : e_i ∈ digits} for integer digits.

    Reading the base-b digits o of a sum from the least significant end, a
    carry c can move to c' when c + e = o + b·c' for some digit e. The subset
    construction over carries gives a transfer matrix whose spectral radius λ
    is the growth rate of the number of distinct sums, so the dimension is
    log λ / log b.
    """
    if base < 2:
        raise DomainError(f"base must be an integer >= 2, got {base}")
    values = sorted({int(e) for e in digits})
    if not values:
        raise DomainError("digit set is empty")
    if len(values) == 1:
        return 0.0
    values = [e - values[0] for e in values]

    start = frozenset({0})
    index = {start: 0}
    queue = [start]
    edges: Counter = Counter()
    while queue:
        state = queue.pop()
        for o in range(base):
            following = frozenset((c + e - o) // base for c in state for e in values if (c + e - o) % base == 0)
            if not following:
                continue
            if following not in index:
                if len(index) >= settings.MAX_CELLS:
                    raise ResourceError("max_cells", len(index) + 1, settings.MAX_CELLS)
                index[following] = len(index)
                queue.append(following)
            edges[index[state], index[following]] += 1

    matrix = np.zeros((len(index), len(index)))
    for (i, j), count in edges.items():
        matrix[i, j] = count
    radius = float(np.max(np.abs(np.linalg.eigvals(matrix))))
    logger.debug("carry automaton: %d states, spectral radius %.12g", len(index), radius)
    return math.log(radius) / math.log(base)


def lattice_sum_dimension(D: Sequence[Scalar], D_prime: Sequence[Scalar], s: Scalar, xi: Scalar) -> Optional[float]:
    """
    dim(K + sK') for K, K' with the common ratio ξ and digits D, D', when 1/ξ
    is an integer and every digit sum is rational. None otherwise.
    """
    if not (is_exact(xi) and 0 < xi < 1 and Fraction(xi).numerator == 1):
        return None
    sums = [d + s * e for d in D for e in D_prime]
    if not all(is_exact(v) for v in sums):
        return None
    unit = common_unit(sums)
    return carry_dimension([int(v * unit) for v in sums], Fraction(xi).denominator)


def representation_threshold(steps: Sequence[int]) -> Tuple[int, int]:
    """
    (g, M0): g = gcd of the steps and M0 the smallest integer with every
    multiple of g from M0 on a sum of one or more steps.
    """
    if not steps or any(s <= 0 for s in steps):
        raise DomainError("steps must be a nonempty list of positive integers")
    g = math.gcd(*steps)
    reduced = sorted({s // g for s in steps})
    largest = reduced[-1]
    limit = largest * largest + largest
    reachable = [False] * (limit + 1)
    for m in range(1, limit + 1):
        reachable[m] = any(m == s or (m > s and reachable[m - s]) for s in reduced)
    last_gap = 0
    for m in range(limit, 0, -1):
        if not reachable[m]:
            last_gap = m
            break
    return g, (last_gap + 1) * g


def hit_probability(target: int, steps: Sequence[int], probs: Sequence[Scalar]) -> Scalar:
    """Probability that the walk with i.i.d. steps lands exactly on target."""
    if len(steps) != len(probs):
        raise DomainError("steps and probabilities differ in length")
    if target < 0:
        raise DomainError(f"target must be nonnegative, got {target}")
    total = sum(probs)
    exact = is_exact(total)
    if (exact and total != 1) or (not exact and abs(float(total) - 1.0) > 1e-12):
        raise DomainError(f"step probabilities must sum to 1, got {total}")
    h: List[Scalar] = [Fraction(1) if exact else 1.0]
    for m in range(1, target + 1):
        h.append(sum((p * h[m - s] for s, p in zip(steps, probs) if s <= m), Fraction(0) if exact else 0.0))
    return h[target]


def _convolve(system: Counter, times: int) -> Counter:
    result: Counter = Counter({0: 1})
    for _ in range(times):
        step: Counter = Counter()
        for e1, c1 in result.items():
            for e2, c2 in system.items():
                step[e1 + e2] += c1 * c2
        result = step
    return result


def _normalize_one(exponents: Sequence[int], ell: int) -> ExponentSystem:
    base = Counter(exponents)
    normalized: Counter = Counter()
    for i, e in enumerate(exponents):
        if i < 2:
            for total, count in _convolve(base, ell // e - 1).items():
                normalized[e + total] += count
        else:
            normalized[e] += 1
    return dict(sorted(normalized.items()))


def normalize_exponents(a: Sequence[int], b: Sequence[int]) -> Tuple[ExponentSystem, ExponentSystem, int]:
    """
    With ℓ = a_1·a_2·b_1·b_2, replace the first two maps of each system by
    f_i∘f_u over all words u of length ℓ/a_i − 1; the power f_i^{ℓ/a_i} then has
    exponent ℓ, so both systems hold at least two maps of exponent ℓ.
    """
    if len(a) < 2 or len(b) < 2:
        raise DomainError("each system needs at least two maps")
    if any(e <= 0 for e in list(a) + list(b)):
        raise DomainError("exponents must be positive integers")
    ell = a[0] * a[1] * b[0] * b[1]
    return _normalize_one(a, ell), _normalize_one(b, ell), ell


def _hitting_constants(
    xi: Scalar, system: ExponentSystem, beta: float, M: int, gcd: int, largest: int
) -> List[float]:
    steps = list(system)
    probs = [count * float(xi) ** (beta * e) for e, count in system.items()]
    # renormalize the float sum so the precondition holds to rounding
    total = sum(probs)
    probs = [p / total for p in probs]
    return [float(hit_probability(M - i * gcd, steps, probs)) for i in range(math.ceil(largest / gcd))]


def bound_from_q(beta: float, beta_prime: float, q: float, M: int, xi: Scalar) -> float:
    """((β+β')·M·log(1/ξ) + log(1 − q)) / (M·log(1/ξ))."""
    scale = M * -log_abs(xi)
    return ((beta + beta_prime) * scale + math.log1p(-q)) / scale


def drop_instance(
    xi: Scalar,
    a: Sequence[int],
    b: Sequence[int],
    translations: Sequence[Scalar] = (),
    translations_prime: Sequence[Scalar] = (),
) -> DropInstance:
    """All constants of the essential-pair argument for r_i = ξ^{a_i}, r'_i = ξ^{b_i}."""
    if not 0 < xi < 1:
        raise DomainError(f"base ξ must lie in (0, 1), got {xi}")
    a_sys, b_sys, ell = normalize_exponents(a, b)
    beta = similarity_dimension([power(xi, e) for e in a])
    beta_prime = similarity_dimension([power(xi, e) for e in b])
    g_a, m0_a = representation_threshold(list(a_sys))
    g_b, m0_b = representation_threshold(list(b_sys))
    A, B = max(a_sys), max(b_sys)
    step = g_a * g_b
    M0 = max(m0_a, m0_b)
    M = math.ceil((M0 + max(A, B)) / step) * step

    p_values = _hitting_constants(xi, a_sys, beta, M, g_a, A) + _hitting_constants(xi, b_sys, beta_prime, M, g_b, B)
    p = min(p_values)
    q = (float(xi) ** (ell * (beta + beta_prime)) * p * p) ** 2
    logger.info("drop instance: ℓ=%d a=%d b=%d A=%d B=%d M0=%d M=%d p=%.6g q=%.6g", ell, g_a, g_b, A, B, M0, M, p, q)
    return DropInstance(
        xi=xi, a_exponents=a_sys, b_exponents=b_sys, beta=beta, beta_prime=beta_prime,
        a=g_a, b=g_b, A=A, B=B, M0=M0, M=M, ell=ell, p=p, q=q,
        translations=tuple(translations), translations_prime=tuple(translations_prime),
    )


def essential_pair_bound(inst: DropInstance) -> float:
    """dim(K + sK') <= ((β+β')·M·log(1/ξ) + log(1 − q)) / (M·log(1/ξ)) < β + β'."""
    p_values = (_hitting_constants(inst.xi, inst.a_exponents, inst.beta, inst.M, inst.a, inst.A)
                + _hitting_constants(inst.xi, inst.b_exponents, inst.beta_prime, inst.M, inst.b, inst.B))
    p = min(p_values)
    q = (float(inst.xi) ** (inst.ell * (inst.beta + inst.beta_prime)) * p * p) ** 2
    if p <= 0 or not 0 < q < 1:
        raise ConsistencyError(f"hitting constants out of range: p={p}, q={q}")
    bound = bound_from_q(inst.beta, inst.beta_prime, q, inst.M, inst.xi)
    if not bound < inst.beta + inst.beta_prime:
        raise ConsistencyError(f"bound {bound} is not below β+β'={inst.beta + inst.beta_prime}")
    return bound


def resonant_system(xi: Scalar, exponents: Sequence[int], translations: Sequence[Scalar]) -> IFS1D:
    """The system {ξ^{a_i}·x + t_i}."""
    if len(exponents) != len(translations):
        raise DomainError("exponents and translations differ in length")
    maps = tuple(Similitude1D(power(xi, e), t) for e, t in zip(exponents, translations))
    return IFS1D(maps, attractor_hull(maps))


def coincidence_scale(ifs: IFS1D, ifs_prime: IFS1D) -> Scalar:
    """
    s making x + s·y agree on the left ends of Q(1, 2) = I(1)×I'(2) and
    Q(2, 1) = I(2)×I'(1): s = (lo_2 − lo_1)/(lo'_2 − lo'_1).
    """
    lo = [f.image(ifs.hull).lo for f in ifs.maps[:2]]
    lo_prime = [f.image(ifs_prime.hull).lo for f in ifs_prime.maps[:2]]
    if lo_prime[1] == lo_prime[0] or lo[1] == lo[0]:
        raise DomainError("the first two cylinders share a left endpoint")
    s = (lo[1] - lo[0]) / (lo_prime[1] - lo_prime[0])
    if s <= 0:
        raise DomainError(f"first-level cylinders are ordered oppositely (s={s}); reorder the maps")
    return s


def default_translations(xi: Scalar, exponents: Sequence[int]) -> List[Scalar]:
    """Left-packed translations: map i starts where map i−1 ends, last map ends at 1."""
    ratios = [power(xi, e) for e in exponents]
    total = sum(ratios)
    if total > 1:
        raise DomainError("the maps do not fit side by side in [0, 1]")
    gap = (1 - total) / (len(ratios) - 1)
    translations = []
    position = 0 * total
    for r in ratios:
        translations.append(position)
        position = position + r + gap
    return translations

