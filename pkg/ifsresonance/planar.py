import math
from concurrent.futures import ProcessPoolExecutor
from enum import Enum
from functools import lru_cache
from typing import Any, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ifsresonance.boxdim import estimate_dimension
from ifsresonance.errors import ConsistencyError, DomainError, ResourceError
from ifsresonance.ifs.scalar import Scalar, at_most
from ifsresonance.ifs.systems import similarity_dimension
from ifsresonance.ifs.utils import effective_workers, grid_count, merge_intervals, split_evenly
from ifsresonance.logger import get_logger
from ifsresonance.resonance import rational_approximation
from ifsresonance.schema import IFS2D, Ball, BallCover, BoxCountSeries, ProjectionProfile, Similitude2D, Word
from ifsresonance.settings import settings

logger = get_logger(__name__)

# Define global variable used in worker processes
profile_covers: Any = None

NESTING_SLACK = 1e-10


class Density(str, Enum):
    DENSE = "dense"
    NOT_DENSE = "not_dense"
    INCONCLUSIVE = "inconclusive"


class DensityVerdict(NamedTuple):
    verdict: Density
    angle: Optional[float]
    witnesses: List[Tuple[float, Optional[Tuple[int, int]]]]


def regular_system(n: int, zeta: float, theta: float = 0.0, reflect: bool = False, reach: float = 1.0) -> IFS2D:
    """n maps ζR_θz + t_i with t_i on the circle of radius reach·(1 − ζ), centered on the unit disk."""
    offset = reach * (1 - zeta)
    maps = tuple(
        Similitude2D(
            zeta, theta, reflect,
            (offset * math.cos(2 * math.pi * i / n), offset * math.sin(2 * math.pi * i / n)),
        )
        for i in range(n)
    )
    return IFS2D(maps, (0.0, 0.0), 1.0)


def rotation_angles(ifs: IFS2D) -> List[float]:
    """
    Rotation angles of the generators and of all words of length two that
    preserve orientation: θ_i for rotations, θ_i ± θ_j for the products.
    """
    angles: List[float] = []
    for i, f in enumerate(ifs.maps):
        if not f.reflect:
            angles.append(f.angle)
        for g in ifs.maps[i:]:
            product = f.compose(g)
            if not product.reflect:
                angles.append(product.angle)
    return angles


def dense_rotation_check(ifs: IFS2D, q_max: Optional[int] = None, tol: Optional[float] = None) -> DensityVerdict:
    """
    Dense when some generated rotation angle has θ/π without a rational
    witness of denominator <= Q_max. When every angle is rational the
    rotation group is finite; its order up to Q_max makes it not dense,
    beyond Q_max the grid cannot tell them apart and the answer is inconclusive.
    """
    q_max = settings.DEFAULT_Q_MAX if q_max is None else q_max
    tol = settings.RESONANCE_TOL if tol is None else tol
    witnesses: List[Tuple[float, Optional[Tuple[int, int]]]] = []
    order = 1
    for angle in rotation_angles(ifs):
        witness = rational_approximation(angle / math.pi, q_max, tol)
        witnesses.append((angle, witness))
        if witness is None:
            logger.info("rotation by %.15g has θ/π irrational up to Q_max=%d", angle, q_max)
            return DensityVerdict(Density.DENSE, angle, witnesses)
        order = math.lcm(order, witness[1])
    if order > q_max:
        return DensityVerdict(Density.INCONCLUSIVE, None, witnesses)
    return DensityVerdict(Density.NOT_DENSE, None, witnesses)


def ball_count(scales: Tuple[float, ...], radius: float, delta: float) -> int:
    @lru_cache(maxsize=None)
    def count(r: float) -> int:
        if at_most(r, delta, settings.FLOAT_TOL):
            return 1
        return sum(count(r * z) for z in scales)

    return count(radius)


def ball_cover(ifs: IFS2D, delta: Scalar) -> BallCover:
    """
    Depth-first refinement of the bounding disk B, stopping at the first word
    u with radius(f_u(B)) <= δ.
    """
    delta = float(delta)
    if not 0 < delta <= ifs.radius * (1 + settings.FLOAT_TOL):
        raise DomainError(f"cover scale must lie in (0, {ifs.radius}], got {delta}")
    scales = tuple(ifs.scales)
    expected = ball_count(scales, ifs.radius, delta)
    if expected > settings.MAX_CELLS:
        raise ResourceError("max_cells", expected, settings.MAX_CELLS)

    center = np.asarray(ifs.center, dtype=float)
    smallest = min(scales)
    balls: List[Ball] = []
    stack: List[Tuple[Word, Optional[Similitude2D], np.ndarray, float]] = [((), None, center, ifs.radius)]
    while stack:
        word, f, c, r = stack.pop()
        if at_most(r, delta, settings.FLOAT_TOL):
            if word and not r > smallest * delta * (1 - settings.FLOAT_TOL):
                raise ConsistencyError(f"ball radius {r} fell below ζ_min·δ")
            balls.append(Ball(word, (float(c[0]), float(c[1])), r))
            continue
        for i in reversed(range(len(ifs.maps))):
            g = ifs.maps[i] if f is None else f.compose(ifs.maps[i])
            child = g(center)
            child_r = float(g.scale) * ifs.radius
            if float(np.linalg.norm(child - c)) + child_r > r + NESTING_SLACK:
                raise ConsistencyError(f"ball of word {word + (i,)} leaves its parent")
            stack.append((word + (i,), g, child, child_r))
    logger.debug("ball cover at δ=%g: %d balls", delta, len(balls))
    return BallCover(delta, tuple(balls))


def projection_count(cover: BallCover, xi: float) -> int:
    """Grid cells of side δ met by the projections ⟨c, (cos ξ, sin ξ)⟩ ± r of the balls."""
    direction = np.array([math.cos(xi), math.sin(xi)])
    mid = cover.centers @ direction
    lo, hi = merge_intervals(mid - cover.radii, mid + cover.radii, settings.FLOAT_TOL * cover.delta)
    return grid_count(lo, hi, cover.delta)


def direction_grid(xi_steps: int) -> np.ndarray:
    return np.arange(xi_steps) * (math.pi / xi_steps)


def profile_scale_base(ifs: IFS2D) -> float:
    scales = ifs.scales
    if max(scales) - min(scales) <= settings.FLOAT_TOL:
        return 1 / scales[0]
    return 2.0


def _profile(covers: Sequence[BallCover], ks: Sequence[int], xis: Sequence[float], skip_coarse: int) -> List[Any]:
    estimates = []
    for xi in xis:
        counts = tuple(projection_count(cover, xi) for cover in covers)
        series = BoxCountSeries(tuple(ks), tuple(cover.delta for cover in covers), counts)
        estimates.append(estimate_dimension(series, skip_coarse))
    return estimates


def worker_init(covers: Sequence[BallCover], ks: Sequence[int], skip_coarse: int) -> None:
    global profile_covers

    profile_covers = (covers, ks, skip_coarse)


def _profile_chunk(xis: Sequence[float]) -> List[Any]:
    global profile_covers
    covers, ks, skip_coarse = profile_covers
    return _profile(covers, ks, xis, skip_coarse)


def projection_profile(
    ifs: IFS2D,
    xi_steps: int,
    k_min: int,
    k_max: int,
    base: Optional[float] = None,
    skip_coarse: int = 2,
    workers: Optional[int] = None,
) -> ProjectionProfile:
    """Box-counting slope of P_ξ(E) for ξ = iπ/ξ_steps, one regression per direction."""
    if xi_steps < 4:
        raise DomainError(f"direction grid needs at least 4 steps, got {xi_steps}")
    if k_max - k_min + 1 < 3:
        raise DomainError(f"scale window {k_min}..{k_max} has fewer than 3 scales")
    base = profile_scale_base(ifs) if base is None else base
    ks = list(range(k_min, k_max + 1))
    covers = [ball_cover(ifs, ifs.radius * base ** -k) for k in ks]
    xis = direction_grid(xi_steps).tolist()
    logger.info("projection profile: %d directions, %d to %d balls", len(xis), len(covers[0]), len(covers[-1]))

    workers = effective_workers(
        settings.WORKERS if workers is None else workers, len(xis), settings.WORKER_ANGLE_THRESHOLD
    )
    if workers is None or workers <= 1:
        estimates = _profile(covers, ks, xis, skip_coarse)
    else:
        with ProcessPoolExecutor(
            max_workers=workers, initializer=worker_init, initargs=(covers, ks, skip_coarse)
        ) as executor:
            chunks = list(executor.map(_profile_chunk, split_evenly(xis, workers)))
        estimates = [e for chunk in chunks for e in chunk]
    return ProjectionProfile(tuple(xis), tuple(estimates))


def expected_projection_dimension(ifs: IFS2D) -> float:
    """min(dim E, 1) under the open set condition."""
    return min(similarity_dimension(ifs.scales), 1.0)


def closed_form_bound(m: int, epsilon: float, delta: float, zeta: float, gamma: float) -> float:
    """(1 − ε)(log(εδ) + mγ log(1/ζ)) / (m log(1/ζ))."""
    if m < 1:
        raise DomainError(f"m must be at least 1, got {m}")
    if not 0 < epsilon < 1 or delta <= 0 or not 0 < zeta < 1:
        raise DomainError("closed form needs 0 < ε < 1, δ > 0 and 0 < ζ < 1")
    log_inv = -math.log(zeta)
    return (1 - epsilon) * (math.log(epsilon * delta) + m * gamma * log_inv) / (m * log_inv)
