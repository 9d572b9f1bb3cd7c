"""
Algebraic resonance: rational relations between logarithms of contraction ratios.

A float search can only certify the resonant side. A negative verdict means
"no relation q·log x = p·log y with q <= Q_max at tolerance tol".
"""
import math
from fractions import Fraction
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import mpmath

from ifsresonance.errors import DomainError
from ifsresonance.ifs.scalar import Scalar, is_exact
from ifsresonance.logger import get_logger
from ifsresonance.schema import IFS1D, ResonanceMode, ResonanceVerdict
from ifsresonance.settings import settings

logger = get_logger(__name__)

# Bit length at which the multiplicative Euclid gives up on a pair
HEIGHT_GUARD_BITS = 512
MAX_CF_TERMS = 200


def _as_mpf(value: Scalar) -> mpmath.mpf:
    if is_exact(value):
        frac = Fraction(value)
        return mpmath.mpf(frac.numerator) / frac.denominator
    return mpmath.mpf(float(value))


def _mp_log(value: Scalar) -> mpmath.mpf:
    return mpmath.log(_as_mpf(value))


def common_base(x: Fraction, y: Fraction) -> Optional[Fraction]:
    """
    The largest B > 1 with x = B^i and y = B^j for positive integers i, j,
    where x, y > 1. Multiplicative Euclid; None when the heights grow past the guard.
    """
    big, small = (x, y) if x >= y else (y, x)
    while True:
        if small == 1:
            return big
        while big >= small:
            big /= small
            if max(big.numerator.bit_length(), big.denominator.bit_length()) > HEIGHT_GUARD_BITS:
                return None
        if big == 1:
            return small
        big, small = small, big


def _exact_exponent(value: Fraction, base: Fraction) -> int:
    log_value = math.log(value.numerator) - math.log(value.denominator)
    log_base = math.log(base.numerator) - math.log(base.denominator)
    exponent = round(log_value / log_base)
    if exponent > 0 and base ** exponent == value:
        return exponent
    return _exponent_by_division(value, base)


def _exponent_by_division(value: Fraction, base: Fraction) -> int:
    exponent = 0
    while value != 1:
        value /= base
        exponent += 1
    return exponent


def exact_witness(x: Fraction, y: Fraction) -> Optional[Tuple[int, int]]:
    """(p, q) in lowest terms with q·log x = p·log y, for rationals in (0, 1) ∪ (1, ∞)."""
    x_up = x if x > 1 else 1 / x
    y_up = y if y > 1 else 1 / y
    base = common_base(x_up, y_up)
    if base is None:
        return None
    i, j = _exact_exponent(x_up, base), _exact_exponent(y_up, base)
    if (x > 1) != (y > 1):
        i = -i
    g = math.gcd(i, j)
    return i // g, j // g


def convergents(value: mpmath.mpf) -> Iterator[Tuple[int, int]]:
    """Continued-fraction convergents p/q of a positive real, in order."""
    p_prev, p = 1, int(mpmath.floor(value))
    q_prev, q = 0, 1
    yield p, q
    rest = value - p
    for _ in range(MAX_CF_TERMS):
        if rest == 0:
            return
        value = 1 / rest
        term = int(mpmath.floor(value))
        rest = value - term
        p_prev, p = p, term * p + p_prev
        q_prev, q = q, term * q + q_prev
        yield p, q


def _check_inputs(x: Scalar, y: Scalar, q_max: int) -> None:
    if q_max < 1:
        raise DomainError(f"Q_max must be at least 1, got {q_max}")
    for value in (x, y):
        if value <= 0 or value == 1:
            raise DomainError(f"ratio arguments must be positive and different from 1, got {value}")


def float_witness(x: Scalar, y: Scalar, q_max: int, tol: float) -> Optional[Tuple[int, int]]:
    with mpmath.workdps(settings.MP_DPS):
        log_x, log_y = _mp_log(x), _mp_log(y)
        sign = 1 if (log_x > 0) == (log_y > 0) else -1
        ratio = abs(log_x / log_y)
        for p, q in convergents(ratio):
            if q > q_max:
                break
            if abs(q * log_x - sign * p * log_y) <= tol:
                return sign * p, q
    return None


def is_rational_ratio(
    x: Scalar,
    y: Scalar,
    q_max: Optional[int] = None,
    tol: Optional[float] = None,
) -> Optional[Tuple[int, int]]:
    """
    (p, q) with q·log x = p·log y, or None.

    Exact rationals that are powers of a common rational are detected without
    logarithms, and that witness is returned whatever its denominator.
    """
    q_max = settings.DEFAULT_Q_MAX if q_max is None else q_max
    tol = settings.RESONANCE_TOL if tol is None else tol
    _check_inputs(x, y, q_max)
    if x == y:
        return 1, 1
    if is_exact(x) and is_exact(y):
        witness = exact_witness(Fraction(x), Fraction(y))
        if witness is not None:
            return witness
    return float_witness(x, y, q_max, tol)


def rational_approximation(value: float, q_max: int, tol: float) -> Optional[Tuple[int, int]]:
    """A convergent p/q of value with q <= q_max and |q·value − p| <= tol."""
    if value < 0:
        found = rational_approximation(-value, q_max, tol)
        return None if found is None else (-found[0], found[1])
    with mpmath.workdps(settings.MP_DPS):
        target = mpmath.mpf(value)
        for p, q in convergents(target):
            if q > q_max:
                break
            if abs(q * target - p) <= tol:
                return p, q
    return None


def arithmetic_lattice(
    logs: Sequence[Scalar],
    tol: Optional[float] = None,
    q_max: Optional[int] = None,
) -> Optional[float]:
    """
    The largest α with every entry within tol of n·α, 1 <= n <= Q_max.
    Pairwise real GCD through convergents.
    """
    if len(logs) == 0:
        raise DomainError("arithmetic_lattice needs at least one entry")
    q_max = settings.DEFAULT_Q_MAX if q_max is None else q_max
    tol = settings.RESONANCE_TOL if tol is None else tol
    if any(value <= 0 for value in logs):
        raise DomainError("lattice entries must be positive")

    with mpmath.workdps(settings.MP_DPS):
        values = [_as_mpf(v) for v in logs]
        alpha = values[0]
        for value in values[1:]:
            found = None
            for p, q in convergents(value / alpha):
                if q > q_max:
                    break
                if abs(q * value - p * alpha) <= tol:
                    found = q
                    break
            if found is None:
                return None
            alpha = alpha / found

        for value in values:
            multiple = int(mpmath.nint(value / alpha))
            if multiple < 1 or multiple > q_max or abs(value - multiple * alpha) > tol:
                return None
        return float(alpha)


def _exact_lattice(ratios: List[Fraction]) -> Optional[float]:
    base: Optional[Fraction] = None
    for r in ratios:
        up = r if r > 1 else 1 / r
        base = up if base is None else common_base(base, up)
        if base is None:
            return None
    assert base is not None
    return math.log(base.numerator) - math.log(base.denominator)


def check_pair(
    ifs: IFS1D,
    ifs_prime: IFS1D,
    q_max: Optional[int] = None,
    tol: Optional[float] = None,
) -> ResonanceVerdict:
    """Algebraic resonance of two systems: every cross ratio pair log-commensurable."""
    q_max = settings.DEFAULT_Q_MAX if q_max is None else q_max
    tol = settings.RESONANCE_TOL if tol is None else tol
    ratios = [abs(r) for r in ifs.ratios]
    ratios_prime = [abs(r) for r in ifs_prime.ratios]

    witnesses: Dict[Tuple[int, int], Optional[Tuple[int, int]]] = {}
    all_exact = True
    for i, x in enumerate(ratios):
        for j, y in enumerate(ratios_prime):
            found = None
            if is_exact(x) and is_exact(y):
                found = (1, 1) if x == y else exact_witness(Fraction(x), Fraction(y))
            if found is None:
                all_exact = False
                found = is_rational_ratio(x, y, q_max, tol)
            witnesses[(i, j)] = found

    resonant = all(w is not None for w in witnesses.values())
    lattice: Optional[float] = None
    if resonant:
        if all_exact:
            lattice = _exact_lattice([Fraction(r) for r in ratios + ratios_prime])
        else:
            lattice = arithmetic_lattice([-math.log(float(r)) for r in ratios + ratios_prime], tol, q_max)

    mode = ResonanceMode.EXACT if all_exact else ResonanceMode.FLOAT
    if resonant:
        note = "exact common base" if all_exact else f"rational relations with q <= {q_max} at tolerance {tol:g}"
    else:
        note = f"no rational relation with denominator <= {q_max} at tolerance {tol:g}"
    logger.debug("resonance check: resonant=%s mode=%s", resonant, mode.value)
    return ResonanceVerdict(resonant, witnesses, lattice, q_max, tol, mode, note)


def log_ratio_irrational(x: Scalar, y: Scalar, q_max: Optional[int] = None, tol: Optional[float] = None) -> bool:
    """True when no rational relation is found: irrational up to Q_max."""
    return is_rational_ratio(x, y, q_max, tol) is None
