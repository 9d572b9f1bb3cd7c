import math
from fractions import Fraction
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ifsresonance.ifs.scalar import Scalar

# int64 arrays are used while every value (and a pairwise sum of two) stays below this
INT64_SAFE = 1 << 60


def common_unit(values: Iterable[Fraction]) -> int:
    """Least common denominator of a collection of rationals."""
    unit = 1
    for denominator in {Fraction(v).denominator for v in values}:
        unit = math.lcm(unit, denominator)
    return unit


def int_array(ints: Sequence[int]) -> np.ndarray:
    bound = max((abs(x) for x in ints), default=0)
    if bound < INT64_SAFE:
        return np.array(ints, dtype=np.int64)
    return np.array(ints, dtype=object)


def as_units(values: Sequence[Fraction], unit: int) -> np.ndarray:
    return int_array([v.numerator * (unit // v.denominator) for v in values])


def widen(array: np.ndarray) -> np.ndarray:
    """Switch an int64 array to Python ints before sums could overflow."""
    if array.dtype == object or len(array) == 0:
        return array
    if int(np.max(np.abs(array))) < INT64_SAFE:
        return array
    return array.astype(object)


def merge_intervals(lo: np.ndarray, hi: np.ndarray, gap: Scalar = 0) -> Tuple[np.ndarray, np.ndarray]:
    """
    Union of closed intervals [lo_i, hi_i] as sorted disjoint intervals.
    Intervals closer than or exactly `gap` apart are merged.
    """
    if len(lo) == 0:
        return lo, hi
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    reach = np.maximum.accumulate(hi)

    starts = np.empty(len(lo), dtype=bool)
    starts[0] = True
    starts[1:] = lo[1:] > reach[:-1] + gap
    first = np.flatnonzero(starts)
    last = np.append(first[1:] - 1, len(lo) - 1)
    return lo[first], reach[last]


def grid_cells(lo: np.ndarray, hi: np.ndarray, delta: Scalar) -> Tuple[np.ndarray, np.ndarray]:
    """
    First and last index j of the cells [jδ, (j+1)δ) meeting each closed interval.
    A right endpoint on a grid line counts the left cell only.
    """
    if lo.dtype == object or np.issubdtype(lo.dtype, np.integer):
        step = int(delta)
        first = lo // step
        last = -((-hi) // step) - 1
    else:
        first = np.floor(lo / float(delta)).astype(np.int64)
        last = np.ceil(hi / float(delta)).astype(np.int64) - 1
    return first, np.maximum(last, first)


def grid_count(lo: np.ndarray, hi: np.ndarray, delta: Scalar) -> int:
    """Number of grid cells of side δ meeting a sorted disjoint interval union."""
    if len(lo) == 0:
        return 0
    first, last = grid_cells(lo, hi, delta)
    total = int(np.sum(last - first + 1))
    shared = int(np.count_nonzero(first[1:] <= last[:-1]))
    return total - shared


def chunk_ranges(total: int, chunk: int) -> List[Tuple[int, int]]:
    chunk = max(1, chunk)
    return [(start, min(start + chunk, total)) for start in range(0, total, chunk)]


def split_evenly(items: Sequence, workers: int) -> List[Sequence]:
    """Contiguous chunks in order, as the worker pools consume them."""
    per_worker = math.ceil(len(items) / workers)
    return [items[i * per_worker: (i + 1) * per_worker] for i in range(workers) if items[i * per_worker: (i + 1) * per_worker]]


def effective_workers(workers: Optional[int], tasks: int, threshold: int) -> Optional[int]:
    if workers is None:
        return None
    return min(workers, tasks // max(1, threshold))
