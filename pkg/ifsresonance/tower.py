"""
Lower-bound tree for K + e^τ K' driven by the rotation R(x) = x + α (mod β).

Level j holds rectangles Q(u, u') of size r^{mj} × exp(R^j(0))·r^{mj}. A level
is stored as the child template shared by all of its nodes plus the node count;
nodes are materialized only while they fit the materialization budget.
"""
import math
from fractions import Fraction
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from ifsresonance.errors import ConsistencyError, DomainError, ResourceError
from ifsresonance.ifs.scalar import Scalar, at_most, equal, is_exact, log_abs, power
from ifsresonance.ifs.systems import compose_word, normalize_hull, similarity_dimension
from ifsresonance.logger import get_logger
from ifsresonance.marstrand import (
    calibrate_delta,
    companion_depth,
    good_runs,
    product_cells,
    separated_subfamily,
    size_threshold,
    sweep_angles,
    tilde_cells,
)
from ifsresonance.resonance import is_rational_ratio
from ifsresonance.schema import (
    IFS1D,
    CellFamily,
    Interval,
    LowerBoundReport,
    Rect,
    RotationState,
    TreeLevel,
    TreeNode,
    Word,
)
from ifsresonance.settings import settings

logger = get_logger(__name__)

ORBIT_TOL = 1e-10


class MkRow(NamedTuple):
    k: int
    k_prime: int
    M: Scalar
    coincident: bool


def mk_sequence(r: Scalar, r_prime: Scalar, k_max: int) -> List[MkRow]:
    """
    For k = 1..k_max: k' (largest with r^k <= r'^k') and M_k = r'^k'/r^k,
    1 <= M_k < 1/r'. M_k = 1 only happens on a rational log-ratio and is flagged.
    """
    if not (0 < r < 1 and 0 < r_prime < 1):
        raise DomainError(f"ratios must lie in (0, 1), got {r}, {r_prime}")
    if k_max < 1:
        raise DomainError(f"k_max must be at least 1, got {k_max}")
    rows = []
    for k in range(1, k_max + 1):
        k_prime = companion_depth(r, r_prime, k)
        M = power(r_prime, k_prime) / power(r, k)
        coincident = equal(M, 1, settings.FLOAT_TOL)
        if not (at_most(1, M, settings.FLOAT_TOL) and M < 1 / r_prime):
            raise ConsistencyError(f"M_{k} = {M} outside [1, 1/r')")
        if coincident:
            logger.warning("M_%d = 1: log r / log r' is rational", k)
        rows.append(MkRow(k, k_prime, M, coincident))
    return rows


def rotation_orbit(state: RotationState, steps: int) -> List[float]:
    """R^j(0) for j = 0..steps."""
    if steps < 1:
        raise DomainError(f"orbit needs at least one step, got {steps}")
    return [math.fmod(j * state.alpha, state.beta) for j in range(steps + 1)]


def weyl_density(state: RotationState, steps: int) -> float:
    """Fraction of j < steps with R^j(0) in F."""
    if steps < 1:
        raise DomainError(f"orbit needs at least one step, got {steps}")
    if not state.F:
        return 0.0
    orbit = np.fmod(np.arange(steps, dtype=float) * state.alpha, state.beta)
    inside = np.zeros(steps, dtype=bool)
    for a, b in state.F:
        inside |= (orbit >= a) & (orbit < b)
    return float(np.count_nonzero(inside)) / steps


def slope_angle(t: float) -> float:
    """θ with tan θ = e^t: P_θ is a multiple of Π_s(x, y) = x + s·y for s = e^t."""
    return math.atan(math.exp(t))


def good_scale_set(
    family: CellFamily,
    tau: float,
    beta: float,
    epsilon: float,
    steps: Optional[int] = None,
    delta: Optional[float] = None,
    workers: Optional[int] = None,
) -> Tuple[Tuple[Tuple[float, float], ...], float, np.ndarray]:
    """
    F ⊆ [0, β): grid points x with a Marstrand-good subfamily at slope e^{x+τ},
    as half-open runs [x_i, x_{j+1}). Returns (F, δ, sizes); δ is calibrated when not given.
    """
    steps = settings.THETA_STEPS if steps is None else steps
    if steps < 8:
        raise DomainError(f"scale grid needs at least 8 steps, got {steps}")
    grid = np.arange(steps) * (beta / steps)
    thetas = [slope_angle(tau + float(x)) for x in grid]
    sizes, _ = sweep_angles(family, thetas, workers)
    used_delta = calibrate_delta(sizes, len(family), epsilon) if delta is None else delta
    good = sizes >= size_threshold(epsilon, used_delta, len(family))
    step = beta / steps
    F = tuple((i * step, min((j + 1) * step, beta)) for i, j in good_runs(good))
    return F, used_delta, sizes


def _cylinder_rect(left: IFS1D, right: IFS1D, u: Word, u_prime: Word) -> Rect:
    I = compose_word(left, u).image(left.hull)
    J = compose_word(right, u_prime).image(right.hull)
    return Rect(I.lo, J.lo, I.length, J.length)


def _projection(rect: Rect, slope: Scalar) -> Interval:
    return rect.project(slope)


def _same_rect(a: Rect, b: Rect) -> bool:
    return all(equal(x, y, settings.FLOAT_TOL) for x, y in zip(
        (a.x0, a.y0, a.width, a.height), (b.x0, b.y0, b.width, b.height)))


def _inside(outer: Rect, inner: Rect) -> bool:
    tol = settings.FLOAT_TOL
    return (at_most(outer.x0, inner.x0, tol) and at_most(outer.y0, inner.y0, tol)
            and at_most(inner.x0 + inner.width, outer.x0 + outer.width, tol)
            and at_most(inner.y0 + inner.height, outer.y0 + outer.height, tol))


def _audit_separation(rects: Sequence[Rect], slope: Scalar, gap: Scalar) -> bool:
    """Projections x + s·y pairwise separated by more than gap."""
    if len(rects) < 2:
        return True
    intervals = sorted((_projection(q, slope) for q in rects), key=lambda iv: iv.lo)
    for prev, nxt in zip(intervals, intervals[1:]):
        distance = nxt.lo - prev.hi
        if is_exact(distance) and is_exact(gap):
            if not distance > gap:
                return False
        elif not float(distance) > float(gap) * (1 + settings.FLOAT_TOL):
            return False
    return True


def _prepare(ifs: IFS1D, name: str) -> IFS1D:
    if not ifs.homogeneous:
        raise DomainError(f"{name} system is not homogeneous; extract a homogeneous subsystem first (homogenize)")
    if any(r < 0 for r in ifs.ratios):
        raise DomainError(f"{name} system has a negative ratio")
    if ifs.hull.lo != 0 or ifs.hull.hi != 1:
        logger.info("normalizing the %s hull %s to [0, 1]", name, ifs.hull)
        ifs = normalize_hull(ifs)
    return ifs


def _certified_slope(branching: Sequence[int], m: int, r: float) -> float:
    if not branching:
        return 0.0
    return float(sum(math.log(c) for c in branching) / (len(branching) * m * math.log(1 / r)))


def cumulative_bounds(branching: Sequence[int], m: int, r: float) -> List[float]:
    return [_certified_slope(branching[: j + 1], m, r) for j in range(len(branching))]


def frostman_bound(report: LowerBoundReport) -> float:
    """
    Mass-distribution lower bound from the measured branching:
    Σ log C_j / (J·m·log(1/r)).
    """
    if report.levels < 3:
        raise DomainError(f"the Frostman bound needs a tree with at least 3 levels, got {report.levels}")
    return _certified_slope(report.branching, report.m, report.ratio)


def closed_form_slope(
    epsilon: float, delta: float, m: int, r: float, gamma: float, intervals: int, beta: float
) -> float:
    """(1 − 2Lε/β)·(log(δε) + mγ·log(1/r)) / (m·log(1/r)), with L the number of intervals of F."""
    scale = m * math.log(1 / r)
    return (1 - 2 * intervals * epsilon / beta) * (math.log(delta * epsilon) + gamma * scale) / scale


def _wrapped_children(tilde: CellFamily, words: Sequence[Tuple[Word, Word]]) -> List[Tuple[Word, Word]]:
    """The cells Q(u, u'0) of Q̃_m below each Q(u, u') of Q_m."""
    assert tilde.words is not None
    index = {w: i for i, w in enumerate(tilde.words)}
    try:
        return [tilde.words[index[(u, u_prime + (0,))]] for u, u_prime in words]
    except KeyError as e:
        raise ConsistencyError(f"word {e.args[0]} is not a cell of Q̃_m") from e


def build_tree(
    left: IFS1D,
    right: IFS1D,
    tau: Scalar,
    m: int,
    epsilon: float,
    levels: int,
    scale_steps: Optional[int] = None,
    weyl_steps: int = 100_000,
    materialize: bool = False,
    q_max: Optional[int] = None,
    tol: Optional[float] = None,
    workers: Optional[int] = None,
) -> Tuple[List[TreeLevel], LowerBoundReport]:
    """
    Inductive construction of R_0..R_levels. A good level (R^j(0) + τ gives a
    Marstrand-good slope) branches into Q·P over the separated subfamily D;
    any other level keeps the single child Q·Q(0^m, 0^{m'+σ}). σ = 1 when
    the orbit wraps (R^j(0) + α > β), and then P is cut to Q(u, u'0).
    Nesting, cell size, projection separation and the cylinder shape of every
    node are audited exactly at each level.
    """
    if m < 1 or levels < 0:
        raise DomainError(f"need m >= 1 and levels >= 0, got m={m}, levels={levels}")
    if not 0 < epsilon < 1:
        raise DomainError(f"ε must lie in (0, 1), got {epsilon}")
    left = _prepare(left, "left")
    right = _prepare(right, "right")
    r, r_prime = left.ratios[0], right.ratios[0]
    witness = is_rational_ratio(r, r_prime, q_max, tol)
    if witness is not None:
        p, q = witness
        raise DomainError(
            f"log r / log r' is rational ({q}·log {r} = {p}·log {r_prime}); "
            "the pair is algebraically resonant and the tower does not apply"
        )

    exact = left.exact and right.exact and tau == 0
    family = product_cells(left, right, m, sample_constants=False)
    tilde = tilde_cells(left, right, m)
    m_prime = companion_depth(r, r_prime, m)
    alpha = log_abs(power(r_prime, m_prime)) - log_abs(power(r, m))
    beta = -log_abs(r_prime)
    F, delta, _ = good_scale_set(family, float(tau), beta, epsilon, scale_steps, workers=workers)
    state = RotationState(alpha, beta, F)
    threshold = size_threshold(epsilon, delta, len(family))
    projection_slope: Scalar = Fraction(1) if exact else math.exp(float(tau))
    logger.info("tower: |Q_m|=%d, α=%.6f, β=%.6f, δ=%.4g, %d intervals in F", len(family), alpha, beta, delta, len(F))

    root_rect = _cylinder_rect(left, right, (), ())
    nodes: Optional[List[TreeNode]] = [TreeNode((), (), root_rect)]
    representative = nodes[0]
    node_count = 1
    tree: List[TreeLevel] = []
    branching: List[int] = []
    good_levels = 0
    depth_prime = 0

    for j in range(levels + 1):
        k = m * j
        expected_prime = companion_depth(r, r_prime, k) if j > 0 else 0
        M_k = power(r_prime, expected_prime) / power(r, k)
        orbit = math.fmod(j * alpha, beta)
        if abs(orbit - log_abs(M_k)) > ORBIT_TOL and abs(abs(orbit - log_abs(M_k)) - beta) > ORBIT_TOL:
            raise ConsistencyError(f"orbit R^{j}(0)={orbit} differs from log M_{k}={log_abs(M_k)}")
        if depth_prime != expected_prime:
            raise ConsistencyError(f"level {j} has depth {depth_prime} on the right, expected {expected_prime}")

        audits = _audit_level(left, right, j, m, r, r_prime, depth_prime, nodes, representative, projection_slope, tree)
        if not all(audits.values()):
            failed = [name for name, ok in audits.items() if not ok]
            raise ConsistencyError(f"level {j} failed audits {failed}")

        if j == levels:
            tree.append(TreeLevel(j, orbit, False, False, 0, node_count, [], representative, nodes, audits))
            break

        t = orbit + float(tau)
        case_two = orbit + alpha > beta
        sigma = 1 if case_two else 0
        chosen = separated_subfamily(family, slope_angle(t))
        good = len(chosen) >= threshold
        assert family.words is not None
        if good:
            good_levels += 1
            template = [family.words[i] for i in chosen]
        else:
            template = [((0,) * m, (0,) * m_prime)]
        if case_two:
            template = _wrapped_children(tilde, template)

        tree.append(TreeLevel(j, orbit, good, case_two, len(template), node_count, template, representative, nodes, audits))
        branching.append(len(template))
        logger.debug("level %d: orbit %.6f good=%s case_two=%s C_j=%d", j, orbit, good, case_two, len(template))

        child_rects = [_cylinder_rect(left, right, u, u_prime) for u, u_prime in template]
        node_count *= len(template)
        if materialize and node_count > settings.MAX_TREE_NODES:
            raise ResourceError("max_tree_nodes", node_count, settings.MAX_TREE_NODES)
        if nodes is not None and (materialize or node_count <= settings.TREE_MATERIALIZE_NODES):
            nodes = [
                TreeNode(q.u + u, q.u_prime + u_prime, q.rect.product(p))
                for q in nodes
                for (u, u_prime), p in zip(template, child_rects)
            ]
            representative = nodes[0]
        else:
            nodes = None
            u, u_prime = template[0]
            representative = TreeNode(
                representative.u + u, representative.u_prime + u_prime, representative.rect.product(child_rects[0])
            )
        depth_prime += m_prime + sigma

    gamma = similarity_dimension(left.ratios) + similarity_dimension(right.ratios)
    r_float = float(r)
    report = LowerBoundReport(
        m=m,
        epsilon=epsilon,
        levels=levels,
        weyl_frequency=weyl_density(state, weyl_steps),
        weyl_expected=state.F_measure / beta,
        level_good_frequency=good_levels / levels if levels else 0.0,
        certified_slope=_certified_slope(branching, m, r_float),
        theoretical_slope=gamma,
        closed_form_slope=closed_form_slope(epsilon, delta, m, r_float, gamma, len(F), beta) if delta > 0 else None,
        branching=tuple(branching),
        ratio=r_float,
        delta=delta,
    )
    logger.info("tower: certified slope %.4f over %d levels (γ=%.4f)", report.certified_slope, levels, gamma)
    return tree, report


def _audit_level(
    left: IFS1D,
    right: IFS1D,
    j: int,
    m: int,
    r: Scalar,
    r_prime: Scalar,
    depth_prime: int,
    nodes: Optional[List[TreeNode]],
    representative: TreeNode,
    slope: Scalar,
    tree: List[TreeLevel],
) -> dict:
    width = power(r, m * j)
    height = power(r_prime, depth_prime)
    checked = nodes if nodes is not None else [representative]

    size_ok = all(equal(q.rect.width, width, settings.FLOAT_TOL) and equal(q.rect.height, height, settings.FLOAT_TOL)
                  for q in checked)
    cylinder_ok = all(_same_rect(_cylinder_rect(left, right, q.u, q.u_prime), q.rect) for q in checked)

    if j == 0:
        nesting_ok = True
        separation_ok = True
    else:
        parent = tree[j - 1]
        if nodes is not None and parent.nodes is not None:
            per_parent = parent.children_per_node
            nesting_ok = all(
                _inside(parent.nodes[i // per_parent].rect, q.rect) for i, q in enumerate(nodes)
            )
            separation_ok = _audit_separation([q.rect for q in nodes], slope, width)
        else:
            # Siblings of the representative: parents are already separated by r^{m(j-1)}
            parent_rect = parent.representative.rect
            siblings = [
                parent_rect.product(_cylinder_rect(left, right, u, u_prime)) for u, u_prime in parent.template
            ]
            nesting_ok = all(_inside(parent_rect, q) for q in siblings)
            separation_ok = _audit_separation(siblings, slope, width)

    return {"nesting": nesting_ok, "size": size_ok, "separation": separation_ok, "cylinder": cylinder_ok}
