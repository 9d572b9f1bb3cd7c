from __future__ import annotations

import itertools
from fractions import Fraction
from typing import Iterator, Sequence, Tuple

from scipy.optimize import brentq

from ifsresonance.errors import DomainError, NumericError
from ifsresonance.ifs.scalar import Scalar, ScalarLike, common_mode, is_exact, parse_scalar
from ifsresonance.logger import get_logger
from ifsresonance.schema import IFS1D, Interval, Similitude1D, Word
from ifsresonance.settings import settings

logger = get_logger(__name__)


def central_cantor(a: ScalarLike) -> IFS1D:
    """C_a: the attractor of {a·x, a·x + (1 − a)} on [0, 1]."""
    ratio = parse_scalar(a)
    if not 0 < ratio < Fraction(1, 2):
        raise DomainError(f"central Cantor parameter must lie in (0, 1/2), got {a}")
    zero, one = (Fraction(0), Fraction(1)) if is_exact(ratio) else (0.0, 1.0)
    maps = (Similitude1D(ratio, zero), Similitude1D(ratio, one - ratio))
    return IFS1D(maps, Interval(zero, one))


def _fixed_interval(maps: Sequence[Similitude1D], lo: Scalar, hi: Scalar) -> Tuple[Scalar, Scalar]:
    images = [f(x) for f in maps for x in (lo, hi)]
    return min(images), max(images)


def attractor_hull(maps: Sequence[Similitude1D]) -> Interval:
    if len(maps) < 2:
        raise DomainError(f"an IFS needs at least two maps, got {len(maps)}")
    exact = common_mode([v for f in maps for v in (f.ratio, f.translation)])
    if any(f.ratio == 0 for f in maps):
        raise DomainError("contraction ratios must be nonzero")

    fixed = [f.fixed_point for f in maps]
    if all(f.ratio > 0 for f in maps):
        return Interval(min(fixed), max(fixed))

    # Negative ratios: iterate J -> conv(∪ f_i(J)) from the fixed points
    lo, hi = float(min(fixed)), float(max(fixed))
    float_maps = [Similitude1D(float(f.ratio), float(f.translation)) for f in maps]
    for _ in range(settings.HULL_MAX_ITER):
        new_lo, new_hi = _fixed_interval(float_maps, lo, hi)
        if abs(new_lo - lo) <= settings.HULL_TOL and abs(new_hi - hi) <= settings.HULL_TOL:
            lo, hi = new_lo, new_hi
            break
        lo, hi = new_lo, new_hi
    else:
        raise NumericError(f"hull iteration did not converge in {settings.HULL_MAX_ITER} steps")

    if not exact:
        return Interval(lo, hi)
    return _exact_hull(maps, lo, hi)


def _exact_hull(maps: Sequence[Similitude1D], lo: float, hi: float) -> Interval:
    # Identify which map/endpoint attains each end, then solve the 2x2 system exactly.
    def attaining(target: float) -> Tuple[Similitude1D, bool]:
        best = min(
            ((f, use_hi) for f in maps for use_hi in (False, True)),
            key=lambda item: abs(float(item[0](hi if item[1] else lo)) - target),
        )
        return best

    f_lo, lo_from_hi = attaining(lo)
    f_hi, hi_from_hi = attaining(hi)
    # L = r_a X + t_a, U = r_b Y + t_b with X, Y in {L, U}
    a11, a12, b1 = Fraction(1), Fraction(0), f_lo.translation
    if lo_from_hi:
        a12 -= f_lo.ratio
    else:
        a11 -= f_lo.ratio
    a21, a22, b2 = Fraction(0), Fraction(1), f_hi.translation
    if hi_from_hi:
        a22 -= f_hi.ratio
    else:
        a21 -= f_hi.ratio
    det = a11 * a22 - a12 * a21
    if det == 0:
        raise NumericError("degenerate hull system")
    L = (b1 * a22 - a12 * b2) / det
    U = (a11 * b2 - a21 * b1) / det
    if _fixed_interval(maps, L, U) != (L, U):
        raise NumericError("exact hull verification failed")
    return Interval(L, U)


def make_ifs(ratios: Sequence[ScalarLike], translations: Sequence[ScalarLike]) -> IFS1D:
    if len(ratios) != len(translations):
        raise DomainError("ratios and translations differ in length")
    maps = tuple(Similitude1D(parse_scalar(r), parse_scalar(t)) for r, t in zip(ratios, translations))
    return IFS1D(maps, attractor_hull(maps))


def similarity_dimension(ratios: Sequence[Scalar]) -> float:
    """The β with Σ|r_i|^β = 1; β ↦ Σ|r_i|^β is decreasing, so the root is bracketed from 0."""
    if len(ratios) < 1:
        raise DomainError("similarity dimension needs at least one ratio")
    values = [abs(float(r)) for r in ratios]
    if not all(0 < r < 1 for r in values):
        raise DomainError("every ratio must satisfy 0 < |r| < 1")

    def excess(beta: float) -> float:
        return sum(r ** beta for r in values) - 1.0

    hi = 1.0
    while excess(hi) > 0:
        hi *= 2
    return float(brentq(excess, 0.0, hi, xtol=settings.SIMDIM_TOL, maxiter=500))


def _check_word(ifs: IFS1D, word: Word) -> None:
    for index in word:
        if not 0 <= index < ifs.n:
            raise DomainError(f"word index {index} out of range for {ifs.n} maps")


def compose_word(ifs: IFS1D, word: Word) -> Similitude1D:
    """f_u = f_{u_1} ∘ ... ∘ f_{u_k}; the empty word gives the root map."""
    _check_word(ifs, word)
    composed = Similitude1D.root(ifs.exact)
    for index in word:
        composed = composed.compose(ifs.maps[index])
    return composed


def words_of_length(n: int, length: int) -> Iterator[Word]:
    return itertools.product(range(n), repeat=length)


def iterate(ifs: IFS1D, depth: int) -> IFS1D:
    """{f_u : |u| = depth}; the attractor is unchanged."""
    if depth < 1:
        raise DomainError("iteration depth must be at least 1")
    maps = tuple(compose_word(ifs, w) for w in words_of_length(ifs.n, depth))
    return IFS1D(maps, ifs.hull)


def conjugate(ifs: IFS1D, c: ScalarLike, t: ScalarLike) -> IFS1D:
    """The system of c·K + t: g_i(x) = c·f_i((x − t)/c) + t."""
    scale, shift = parse_scalar(c), parse_scalar(t)
    if scale == 0:
        raise DomainError("conjugation scale must be nonzero")
    maps = tuple(
        Similitude1D(f.ratio, scale * f.translation + shift * (1 - f.ratio)) for f in ifs.maps
    )
    return IFS1D(maps, ifs.hull.scale(scale).shift(shift))


def normalize_hull(ifs: IFS1D) -> IFS1D:
    """Conjugate so the hull becomes [0, 1]."""
    length = ifs.hull.length
    if length == 0:
        raise DomainError("degenerate hull")
    return conjugate(ifs, 1 / length, -ifs.hull.lo / length)
