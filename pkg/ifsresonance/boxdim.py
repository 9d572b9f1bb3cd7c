import math
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from functools import lru_cache
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import linregress

from ifsresonance.errors import ConsistencyError, DomainError, ResourceError
from ifsresonance.ifs.scalar import Scalar, at_most, common_mode, is_exact, log_abs
from ifsresonance.ifs.systems import compose_word
from ifsresonance.ifs.utils import (
    as_units,
    chunk_ranges,
    common_unit,
    effective_workers,
    grid_count,
    merge_intervals,
    split_evenly,
    widen,
)
from ifsresonance.logger import get_logger
from ifsresonance.schema import (
    IFS1D,
    BoxCountSeries,
    Cover1D,
    CylinderInterval,
    Cylinders,
    DimensionEstimate,
    Similitude1D,
)
from ifsresonance.settings import settings

logger = get_logger(__name__)

# Define global variable used in worker processes
count_task: Any = None


def scale_ladder(left: IFS1D, right: Optional[IFS1D] = None) -> Scalar:
    """
    Base of the ladder δ_k = base^-k: the reciprocal of the dominant ratio
    when every system is homogeneous, 2 otherwise.
    """
    systems = [left] if right is None else [left, right]
    exact = all(ifs.exact for ifs in systems)
    if all(ifs.homogeneous for ifs in systems):
        dominant = max(abs(ifs.ratios[0]) for ifs in systems)
        return 1 / dominant
    return Fraction(2) if exact else 2.0


def ladder_delta(base: Scalar, k: int) -> Scalar:
    if is_exact(base):
        return Fraction(1) / Fraction(base) ** k
    return float(base) ** -k


def _stops(length: Scalar, delta: Scalar) -> bool:
    return at_most(length, delta, settings.FLOAT_TOL)


def cylinder_count(ifs: IFS1D, delta: Scalar) -> int:
    """Size of cylinders_at_scale(ifs, δ) without building the cylinders."""
    if delta <= 0:
        raise DomainError(f"scale must be positive, got {delta}")
    ratios = [abs(r) for r in ifs.ratios]

    @lru_cache(maxsize=None)
    def count(length: Scalar) -> int:
        if _stops(length, delta):
            return 1
        return sum(count(length * r) for r in ratios)

    return count(ifs.hull.length)


def cylinders_at_scale(ifs: IFS1D, delta: Scalar) -> Cylinders:
    """
    Depth-first refinement of the hull, stopping at the first word whose
    cylinder has diameter <= δ. Words come out in lexicographic order.
    """
    if delta <= 0:
        raise DomainError(f"scale must be positive, got {delta}")
    expected = cylinder_count(ifs, delta)
    if expected > settings.MAX_CELLS:
        raise ResourceError("max_cells", expected, settings.MAX_CELLS)

    hull_length = ifs.hull.length
    cylinders: Cylinders = []
    stack: List[Tuple[Tuple[int, ...], Similitude1D]] = [((), Similitude1D.root(ifs.exact))]
    while stack:
        word, f = stack.pop()
        if _stops(abs(f.ratio) * hull_length, delta):
            cylinders.append(CylinderInterval(word, f.image(ifs.hull), f.ratio))
            continue
        for i in reversed(range(ifs.n)):
            stack.append((word + (i,), f.compose(ifs.maps[i])))
    return cylinders


def _endpoint_arrays(
    cylinders: Sequence[CylinderInterval], scale: Scalar = 1
) -> Tuple[List[Scalar], List[Scalar]]:
    lo = [c.interval.lo * scale for c in cylinders]
    hi = [c.interval.hi * scale for c in cylinders]
    return lo, hi


def _to_cover(
    delta: Scalar, sides: Sequence[Tuple[List[Scalar], List[Scalar]]]
) -> Tuple[List[Tuple[np.ndarray, np.ndarray]], Optional[int], Scalar]:
    """Endpoint lists as numpy arrays: integers over a common unit (exact) or floats."""
    values = [v for lo, hi in sides for v in lo + hi] + [delta]
    exact = common_mode(values)
    if not exact:
        arrays = [(np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)) for lo, hi in sides]
        return arrays, None, settings.FLOAT_TOL * float(delta)
    unit = common_unit(values)
    arrays = [(as_units(lo, unit), as_units(hi, unit)) for lo, hi in sides]
    return arrays, unit, 0


def attractor_cover(ifs: IFS1D, delta: Scalar) -> Cover1D:
    """Merged union of the scale-δ cylinders of a single attractor."""
    cylinders = cylinders_at_scale(ifs, delta)
    [(lo, hi)], unit, gap = _to_cover(delta, [_endpoint_arrays(cylinders)])
    lo, hi = merge_intervals(lo, hi, gap)
    logger.debug("attractor cover at δ=%s: %d cylinders, %d intervals", delta, len(cylinders), len(lo))
    return Cover1D(delta, lo, hi, unit)


def sum_cover(left: IFS1D, right: IFS1D, s: Scalar, delta: Scalar) -> Cover1D:
    """
    Merged union of I(u) + s·I'(u') over all pairs of scale-δ cylinders.

    Pairs are streamed in blocks of rows of left intervals; each block is
    merged on its own and folded into the running union.
    """
    if s <= 0:
        raise DomainError(f"sum scale s must be positive, got {s}")
    if delta <= 0:
        raise DomainError(f"scale must be positive, got {delta}")

    left_cyl = cylinders_at_scale(left, delta)
    right_cyl = cylinders_at_scale(right, delta)
    pairs = len(left_cyl) * len(right_cyl)
    if settings.MAX_PAIRS is not None and pairs > settings.MAX_PAIRS:
        raise ResourceError("max_pairs", pairs, settings.MAX_PAIRS)

    [(l_lo, l_hi), (r_lo, r_hi)], unit, gap = _to_cover(
        delta, [_endpoint_arrays(left_cyl), _endpoint_arrays(right_cyl, s)]
    )
    # Unions distribute over Minkowski sums, so each side is merged first
    l_lo, l_hi = merge_intervals(widen(l_lo), widen(l_hi), gap)
    r_lo, r_hi = merge_intervals(widen(r_lo), widen(r_hi), gap)

    rows_per_block = max(1, settings.PAIR_BLOCK_SIZE // max(1, len(r_lo)))
    pending_lo: List[np.ndarray] = []
    pending_hi: List[np.ndarray] = []
    pending = 0
    merged_lo, merged_hi = l_lo[:0], l_hi[:0]
    for start, end in chunk_ranges(len(l_lo), rows_per_block):
        block_lo = np.add.outer(l_lo[start:end], r_lo).ravel()
        block_hi = np.add.outer(l_hi[start:end], r_hi).ravel()
        block_lo, block_hi = merge_intervals(block_lo, block_hi, gap)
        pending_lo.append(block_lo)
        pending_hi.append(block_hi)
        pending += len(block_lo)
        if pending > settings.PAIR_BLOCK_SIZE:
            merged_lo, merged_hi = merge_intervals(
                np.concatenate([merged_lo, *pending_lo]), np.concatenate([merged_hi, *pending_hi]), gap
            )
            pending_lo, pending_hi, pending = [], [], 0
    if pending_lo:
        merged_lo, merged_hi = merge_intervals(
            np.concatenate([merged_lo, *pending_lo]), np.concatenate([merged_hi, *pending_hi]), gap
        )

    logger.info(
        "sum cover at δ=%s: %d x %d pairs merged into %d intervals", delta, len(left_cyl), len(right_cyl), len(merged_lo)
    )
    return Cover1D(delta, merged_lo, merged_hi, unit)


def box_count(cover: Cover1D, delta: Scalar) -> int:
    """Grid cells [jδ, (j+1)δ) meeting the cover; exact on exact covers."""
    if delta <= 0:
        raise DomainError(f"scale must be positive, got {delta}")
    if len(cover) == 0:
        return 0
    if cover.unit is None:
        count = grid_count(cover.lo, cover.hi, float(delta))
    else:
        if not is_exact(delta):
            raise DomainError("an exact cover needs an exact grid scale")
        step = Fraction(delta)
        unit = math.lcm(cover.unit, step.denominator)
        factor = unit // cover.unit
        lo, hi = cover.lo, cover.hi
        if factor != 1:
            lo, hi = widen(lo.astype(object) * factor), widen(hi.astype(object) * factor)
        count = grid_count(lo, hi, step.numerator * (unit // step.denominator))
    bound = cover_interval_bound(cover, delta)
    if count > bound * (1 + settings.FLOAT_TOL):
        raise ConsistencyError(f"{count} grid cells exceed the interval bound {bound:.6g}")
    return count


def estimate_dimension(series: BoxCountSeries, skip_coarse: int = 2) -> DimensionEstimate:
    """
    Least-squares slope of log N against log 1/δ.

    The coarsest `skip_coarse` rows are left out while at least three rows remain.
    """
    if len(series.counts) < 3:
        raise DomainError(f"dimension estimate needs at least 3 scales, got {len(series.counts)}")
    if any(n < 1 for n in series.counts):
        raise DomainError("box counts must be positive")
    skip = max(0, min(skip_coarse, len(series.counts) - 3))
    ks = series.ks[skip:]
    x = np.array([-log_abs(d) for d in series.deltas[skip:]])
    y = np.log(np.array(series.counts[skip:], dtype=float))
    scale_range = (ks[0], ks[-1])

    if np.all(y == y[0]):
        return DimensionEstimate(0.0, math.inf, scale_range, 0.0, degenerate=True)

    fit = linregress(x, y)
    residual = float(np.max(np.abs(y - (fit.intercept + fit.slope * x))))
    return DimensionEstimate(float(fit.slope), float(fit.stderr), scale_range, residual)


def _count_at(task: Tuple[IFS1D, Optional[IFS1D], Optional[Scalar]], delta: Scalar) -> int:
    left, right, s = task
    if right is None:
        cover = attractor_cover(left, delta)
    else:
        cover = sum_cover(left, right, s if s is not None else 1, delta)
    count = box_count(cover, delta)
    logger.debug("δ=%s: %d boxes", delta, count)
    return count


def worker_init(left: IFS1D, right: Optional[IFS1D], s: Optional[Scalar]) -> None:
    global count_task

    count_task = (left, right, s)


def _count_deltas(deltas: Sequence[Scalar]) -> List[int]:
    global count_task
    return [_count_at(count_task, d) for d in deltas]


def count_series(
    left: IFS1D,
    ks: Sequence[int],
    right: Optional[IFS1D] = None,
    s: Optional[Scalar] = None,
    base: Optional[Scalar] = None,
    workers: Optional[int] = None,
) -> BoxCountSeries:
    """Box counts of K (or K + sK') along the ladder δ_k = base^-k."""
    base = scale_ladder(left, right) if base is None else base
    if s is None and right is not None:
        s = Fraction(1) if left.exact else 1.0
    deltas = [ladder_delta(base, k) for k in ks]
    task = (left, right, s)

    workers = effective_workers(
        settings.WORKERS if workers is None else workers, len(deltas), settings.WORKER_SCALE_THRESHOLD
    )
    if workers is None or workers <= 1:
        counts = [_count_at(task, d) for d in deltas]
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=worker_init, initargs=task) as executor:
            count_lists = list(executor.map(_count_deltas, split_evenly(deltas, workers)))
        counts = [count for sublist in count_lists for count in sublist]
    return BoxCountSeries(tuple(ks), tuple(deltas), tuple(counts))


def dim_report(
    left: IFS1D,
    right: Optional[IFS1D],
    s: Optional[Scalar],
    k_min: int,
    k_max: int,
    base: Optional[Scalar] = None,
    skip_coarse: int = 2,
    workers: Optional[int] = None,
) -> DimensionEstimate:
    if k_max - k_min + 1 < 3:
        raise DomainError(f"scale window {k_min}..{k_max} has fewer than 3 scales")
    series = count_series(left, list(range(k_min, k_max + 1)), right, s, base, workers)
    return estimate_dimension(series, skip_coarse)


def random_attractor_points(ifs: IFS1D, count: int, depth: int, seed: int = 0) -> List[Scalar]:
    """f_w(hull midpoint) for random words w: points within |r_w|·|I|/2 of the attractor."""
    rng = np.random.default_rng(seed)
    mid = ifs.hull.midpoint
    words = rng.integers(0, ifs.n, size=(count, depth))
    return [compose_word(ifs, tuple(int(i) for i in w))(mid) for w in words]


def cover_interval_bound(cover: Cover1D, delta: Scalar) -> float:
    """2·(number of intervals) + total length/δ, an upper bound for box_count."""
    return 2 * len(cover) + cover.total_length / float(delta)
