import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import linregress

from ifsresonance.errors import ConsistencyError, DomainError, ResourceError
from ifsresonance.ifs.scalar import Scalar, at_most, power
from ifsresonance.ifs.systems import compose_word, similarity_dimension
from ifsresonance.ifs.utils import effective_workers, merge_intervals, split_evenly
from ifsresonance.logger import get_logger
from ifsresonance.schema import IFS1D, Cell, CellFamily, GoodAngleSet, Interval, Word
from ifsresonance.settings import settings

logger = get_logger(__name__)

# Define global variable used in worker processes
sweep_family: Any = None

# Relative slack on the size threshold εδ|Q|, so calibrated δ keeps its own angles good
THRESHOLD_SLACK = 1e-12


def companion_depth(r: Scalar, r_prime: Scalar, k: int) -> int:
    """Largest k' with r^k <= r'^k'."""
    target = power(r, k)
    k_prime = 0
    current = power(r_prime, 0)
    while at_most(target, current * r_prime, settings.FLOAT_TOL):
        current = current * r_prime
        k_prime += 1
    return k_prime


def _homogeneous_ratio(ifs: IFS1D, name: str) -> Scalar:
    if not ifs.homogeneous:
        raise DomainError(f"{name} system is not homogeneous; extract a homogeneous subsystem first (homogenize)")
    return abs(ifs.ratios[0])


def _word_images(ifs: IFS1D, depth: int) -> List[Tuple[Word, Interval]]:
    return [(w, compose_word(ifs, w).image(ifs.hull)) for w in itertools.product(range(ifs.n), repeat=depth)]


def _family(
    left: IFS1D,
    right: IFS1D,
    k: int,
    k_prime: int,
    gamma: float,
    sample_constants: bool,
) -> CellFamily:
    count = left.n ** k * right.n ** k_prime
    if count > settings.MAX_CELLS:
        raise ResourceError("max_cells", count, settings.MAX_CELLS)
    left_images = _word_images(left, k)
    right_images = _word_images(right, k_prime)
    cells = []
    words = []
    for u, I in left_images:
        for u_prime, J in right_images:
            cells.append(Cell.rect(float(I.lo), float(J.lo), float(I.length), float(J.length)))
            words.append((u, u_prime))
    rho = float(power(abs(left.ratios[0]), k) * left.hull.length)
    family = CellFamily(tuple(cells), rho, A=1.0, A1=1.0, A2=1.0, gamma=gamma, words=tuple(words))
    if sample_constants:
        A, A1, A2 = family_constants(family)
    else:
        A, A1 = _shape_constants(family)
        A2 = math.nan
    return CellFamily(family.cells, rho, A, A1, A2, gamma, family.words)


def product_cells(left: IFS1D, right: IFS1D, k: int, sample_constants: bool = True) -> CellFamily:
    """Q_k = {I(u) × I'(u'): |u| = k, |u'| = k'}, cells of size r^k × M_k r^k."""
    if k < 1:
        raise DomainError(f"product depth must be at least 1, got {k}")
    r = _homogeneous_ratio(left, "left")
    r_prime = _homogeneous_ratio(right, "right")
    gamma = similarity_dimension(left.ratios) + similarity_dimension(right.ratios)
    return _family(left, right, k, companion_depth(r, r_prime, k), gamma, sample_constants)


def tilde_cells(left: IFS1D, right: IFS1D, k: int, sample_constants: bool = False) -> CellFamily:
    """Q̃_k = {Q(u, u'): |u| = k, |u'| = k' + 1}."""
    if k < 1:
        raise DomainError(f"product depth must be at least 1, got {k}")
    r = _homogeneous_ratio(left, "left")
    r_prime = _homogeneous_ratio(right, "right")
    gamma = similarity_dimension(left.ratios) + similarity_dimension(right.ratios)
    return _family(left, right, k, companion_depth(r, r_prime, k) + 1, gamma, sample_constants)


def project_cell(cell: Cell, theta: float) -> Interval:
    """Orthogonal projection onto the line through 0 at angle θ."""
    c, s = math.cos(theta), math.sin(theta)
    cx, cy = cell.center
    mid = cx * c + cy * s
    if cell.kind == "rect":
        half = (cell.width * abs(c) + cell.height * abs(s)) / 2
    else:
        half = cell.radius
    return Interval(mid - half, mid + half)


def project_family(family: CellFamily, theta: float) -> Tuple[np.ndarray, np.ndarray]:
    arrays = family.arrays
    c, s = math.cos(theta), math.sin(theta)
    mid = arrays["centers"] @ np.array([c, s])
    half = arrays["half_w"] * abs(c) + arrays["half_h"] * abs(s) + arrays["radius"]
    return mid - half, mid + half


def select_separated(lo: Sequence[float], hi: Sequence[float], rho: float) -> List[int]:
    """
    Earliest-right-endpoint greedy: a maximum set of intervals with pairwise gaps > ρ.
    """
    order = np.argsort(np.asarray(hi), kind="stable").tolist()
    lo_list = list(lo)
    hi_list = list(hi)
    chosen: List[int] = []
    last = -math.inf
    for i in order:
        if lo_list[i] > last + rho:
            chosen.append(i)
            last = hi_list[i]
    return chosen


def verify_separated(lo: np.ndarray, hi: np.ndarray, chosen: Sequence[int], rho: float) -> None:
    if len(chosen) < 2:
        return
    idx = np.asarray(chosen)
    order = np.argsort(lo[idx], kind="stable")
    sel_lo, sel_hi = lo[idx][order], hi[idx][order]
    gaps = sel_lo[1:] - sel_hi[:-1]
    if not np.all(gaps > rho):
        raise ConsistencyError(f"separated subfamily has a gap {float(np.min(gaps))} <= ρ={rho}")


def separated_subfamily(family: CellFamily, theta: float) -> List[int]:
    """Indices of a maximum subfamily whose θ-projections are pairwise ρ-separated."""
    lo, hi = project_family(family, theta)
    chosen = select_separated(lo, hi, family.rho)
    verify_separated(lo, hi, chosen, family.rho)
    return sorted(chosen)


def projection_length(family: CellFamily, theta: float) -> float:
    """Length of the union of the θ-projections."""
    lo, hi = project_family(family, theta)
    lo, hi = merge_intervals(lo, hi, 0.0)
    return float(np.sum(hi - lo))


def theta_grid(theta_steps: int) -> np.ndarray:
    return np.arange(theta_steps) * (math.pi / theta_steps)


def _sweep(family: CellFamily, thetas: Sequence[float]) -> List[Tuple[int, float]]:
    rows = []
    for theta in thetas:
        lo, hi = project_family(family, float(theta))
        chosen = select_separated(lo, hi, family.rho)
        verify_separated(lo, hi, chosen, family.rho)
        m_lo, m_hi = merge_intervals(lo, hi, 0.0)
        rows.append((len(chosen), float(np.sum(m_hi - m_lo))))
    return rows


def worker_init(family: CellFamily) -> None:
    global sweep_family

    sweep_family = family


def _sweep_chunk(thetas: Sequence[float]) -> List[Tuple[int, float]]:
    global sweep_family
    return _sweep(sweep_family, thetas)


def sweep_angles(
    family: CellFamily, thetas: Sequence[float], workers: Optional[int] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Separated-subfamily sizes and projection lengths at each angle, in order."""
    thetas = list(thetas)
    workers = effective_workers(
        settings.WORKERS if workers is None else workers, len(thetas), settings.WORKER_ANGLE_THRESHOLD
    )
    if workers is None or workers <= 1:
        rows = _sweep(family, thetas)
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=worker_init, initargs=(family,)) as executor:
            row_lists = list(executor.map(_sweep_chunk, split_evenly(thetas, workers)))
        rows = [row for sublist in row_lists for row in sublist]
    sizes = np.array([r[0] for r in rows], dtype=np.int64)
    lengths = np.array([r[1] for r in rows], dtype=float)
    return sizes, lengths


def angle_sweep(
    family: CellFamily, theta_steps: int, workers: Optional[int] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Sweep over the grid θ_i = iπ/N."""
    return sweep_angles(family, theta_grid(theta_steps).tolist(), workers)


def size_threshold(epsilon: float, delta: float, family_size: int) -> float:
    return epsilon * delta * family_size * (1 - THRESHOLD_SLACK)


def calibrate_delta(sizes: Sequence[int], family_size: int, epsilon: float) -> float:
    """Largest δ with at least (1 − ε) of the grid angles reaching size εδ|Q|."""
    if not 0 < epsilon < 1:
        raise DomainError(f"ε must lie in (0, 1), got {epsilon}")
    ordered = np.sort(np.asarray(sizes))[::-1]
    needed = math.ceil((1 - epsilon) * len(ordered))
    if needed < 1:
        needed = 1
    size = float(ordered[needed - 1])
    return size / (epsilon * family_size)


def good_runs(good: np.ndarray) -> List[Tuple[int, int]]:
    """Maximal runs [i, j] of consecutive True entries."""
    runs: List[Tuple[int, int]] = []
    start: Optional[int] = None
    for i, flag in enumerate(good.tolist()):
        if flag and start is None:
            start = i
        elif not flag and start is not None:
            runs.append((start, i - 1))
            start = None
    if start is not None:
        runs.append((start, len(good) - 1))
    return runs


def _angle_set(
    sizes: np.ndarray, lengths: np.ndarray, family_size: int, epsilon: float, delta: float, theta_steps: int
) -> GoodAngleSet:
    good = sizes >= size_threshold(epsilon, delta, family_size)
    step = math.pi / theta_steps
    intervals = tuple((i * step, (j + 1) * step) for i, j in good_runs(good))
    bad_measure = step * int(np.count_nonzero(~good))
    return GoodAngleSet(intervals, epsilon, delta, theta_steps, bad_measure, sizes, lengths)


def good_angle_set(
    family: CellFamily,
    epsilon: float,
    theta_steps: Optional[int] = None,
    delta: Optional[float] = None,
    refine: bool = False,
    workers: Optional[int] = None,
) -> GoodAngleSet:
    """
    J: open intervals of consecutive grid angles whose separated subfamily
    has at least εδ|Q| cells. δ is calibrated from the sweep when not given.
    With refine, the grid doubles until the bad measure moves by less than one step.
    """
    theta_steps = settings.THETA_STEPS if theta_steps is None else theta_steps
    if not 0 < epsilon < 1:
        raise DomainError(f"ε must lie in (0, 1), got {epsilon}")
    if theta_steps < 8:
        raise DomainError(f"θ grid needs at least 8 steps, got {theta_steps}")

    sizes, lengths = angle_sweep(family, theta_steps, workers)
    used_delta = calibrate_delta(sizes, len(family), epsilon) if delta is None else delta
    angles = _angle_set(sizes, lengths, len(family), epsilon, used_delta, theta_steps)

    while refine and theta_steps * 2 <= settings.MAX_THETA_STEPS:
        theta_steps *= 2
        sizes, lengths = angle_sweep(family, theta_steps, workers)
        finer = _angle_set(sizes, lengths, len(family), epsilon, used_delta, theta_steps)
        stable = abs(finer.bad_measure - angles.bad_measure) < math.pi / theta_steps
        angles = finer
        if stable:
            break

    logger.info(
        "good angles: %d intervals, bad measure %.4f (bound %.4f), δ=%.4g",
        len(angles.intervals), angles.bad_measure, epsilon * math.pi, used_delta,
    )
    return angles


def _equal_area_radius(arrays: dict) -> np.ndarray:
    radius = arrays["radius"].copy()
    rects = radius == 0
    radius[rects] = np.sqrt(arrays["area"][rects] / math.pi)
    return radius


def riesz_energy(family: CellFamily) -> float:
    """
    1-energy of the normalized area measure on the union of the cells.

    Distinct cells interact through their centers; each cell's self term is
    the disk value 16/(3πR), with rectangles replaced by the disk of equal area.
    """
    if len(family) < 1:
        raise DomainError("riesz_energy needs at least one cell")
    arrays = family.arrays
    weights = arrays["area"] / np.sum(arrays["area"])
    radius = _equal_area_radius(arrays)
    energy = float(np.sum(weights ** 2 * 16.0 / (3.0 * math.pi * radius)))

    centers = arrays["centers"]
    n = len(centers)
    block = max(1, settings.PAIR_BLOCK_SIZE // n)
    for start in range(0, n, block):
        end = min(start + block, n)
        dx = centers[start:end, 0][:, None] - centers[None, :, 0]
        dy = centers[start:end, 1][:, None] - centers[None, :, 1]
        dist = np.hypot(dx, dy)
        dist[np.arange(end - start), np.arange(start, end)] = np.inf
        if np.any(dist == 0):
            raise DomainError("two cells share a center")
        energy += float(weights[start:end] @ (1.0 / dist) @ weights)
    return energy


def _cell_distances(family: CellFamily, point: np.ndarray) -> np.ndarray:
    arrays = family.arrays
    delta = np.abs(arrays["centers"] - point)
    outside = np.maximum(delta - np.stack([arrays["half_w"], arrays["half_h"]], axis=1), 0.0)
    return np.maximum(np.hypot(outside[:, 0], outside[:, 1]) - arrays["radius"], 0.0)


def _shape_constants(family: CellFamily) -> Tuple[float, float]:
    inradius = np.array([c.inradius for c in family.cells])
    circumradius = np.array([c.circumradius for c in family.cells])
    A = float(max(np.max(family.rho / inradius), np.max(circumradius / family.rho)))
    A1 = float(family.rho ** (-family.gamma) / len(family))
    return A, A1


def family_constants(
    family: CellFamily, samples: int = 256, seed: Optional[int] = None
) -> Tuple[float, float, float]:
    """
    (A, A1, A2) of the family hypothesis. A and A1 are exact; A2 is the largest
    count/(ℓ/ρ)^γ over seeded random disks centred on cells with radius ℓ in (ρ, 1).
    """
    A, A1 = _shape_constants(family)
    rng = np.random.default_rng(settings.SEED if seed is None else seed)
    centers = family.arrays["centers"]
    A2 = 0.0
    if family.rho >= 1:
        return A, A1, math.nan
    for _ in range(samples):
        point = centers[rng.integers(len(centers))]
        ell = math.exp(rng.uniform(math.log(family.rho), 0.0))
        hits = int(np.count_nonzero(_cell_distances(family, point) <= ell))
        A2 = max(A2, hits / (ell / family.rho) ** family.gamma)
    return A, A1, A2


def energy_exponent(left: IFS1D, right: IFS1D, k_min: int, k_max: int) -> Tuple[float, List[Tuple[int, float, float]]]:
    """
    Slope of log I_1(Q_k) against log ρ_k over k_min..k_max, with the
    (k, ρ_k, energy) rows it was fitted on. The energy grows like ρ^(γ-1),
    so the slope estimates γ - 1.
    """
    if k_max - k_min + 1 < 2:
        raise DomainError(f"energy window {k_min}..{k_max} needs at least 2 depths")
    rows = []
    for k in range(k_min, k_max + 1):
        family = product_cells(left, right, k, sample_constants=False)
        rows.append((k, family.rho, riesz_energy(family)))
    x = np.array([math.log(rho) for _, rho, _ in rows])
    y = np.log(np.array([energy for _, _, energy in rows]))
    return float(linregress(x, y).slope), rows
