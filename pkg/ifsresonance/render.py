"""
SVG 1.1 figures. The drawn region is mapped onto a 1000×1000 viewport with
the y-axis pointing up.
"""
import xml.etree.ElementTree as ET
from collections import defaultdict
from typing import Dict, List, NamedTuple, Sequence, Tuple, Union

from ifsresonance.boxdim import cylinders_at_scale, ladder_delta, scale_ladder
from ifsresonance.errors import DomainError, ResourceError
from ifsresonance.ifs.scalar import Scalar, is_exact
from ifsresonance.logger import get_logger
from ifsresonance.planar import ball_cover, profile_scale_base
from ifsresonance.schema import IFS1D, IFS2D, CylinderInterval, TreeLevel
from ifsresonance.settings import settings

logger = get_logger(__name__)

VIEWPORT = 1000
PALETTE = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
PLAIN = "#222222"


class Figure(NamedTuple):
    svg: str
    shapes: int
    colored_pairs: int


class _Canvas:
    def __init__(self, x0: float, y0: float, width: float, height: float) -> None:
        if width <= 0 or height <= 0:
            raise DomainError("the drawn region must have positive width and height")
        self.x0, self.y0, self.width, self.height = x0, y0, width, height
        self.root = ET.Element("svg", {
            "xmlns": "http://www.w3.org/2000/svg",
            "version": "1.1",
            "width": str(VIEWPORT),
            "height": str(VIEWPORT),
            "viewBox": f"0 0 {VIEWPORT} {VIEWPORT}",
        })
        ET.SubElement(self.root, "rect", {
            "x": "0", "y": "0", "width": str(VIEWPORT), "height": str(VIEWPORT),
            "fill": "none", "stroke": "#999999", "stroke-width": "1",
        })
        self.shapes = 0

    def _x(self, x: float) -> float:
        return (x - self.x0) / self.width * VIEWPORT

    def _y(self, y: float) -> float:
        return VIEWPORT - (y - self.y0) / self.height * VIEWPORT

    def rect(self, x: float, y: float, width: float, height: float, fill: str, opacity: float = 1.0) -> None:
        attrs = {
            "x": _fmt(self._x(x)),
            "y": _fmt(self._y(y + height)),
            "width": _fmt(width / self.width * VIEWPORT),
            "height": _fmt(height / self.height * VIEWPORT),
            "fill": fill,
        }
        if opacity < 1:
            attrs["fill-opacity"] = _fmt(opacity)
        ET.SubElement(self.root, "rect", attrs)
        self.shapes += 1

    def circle(self, cx: float, cy: float, r: float, fill: str) -> None:
        ET.SubElement(self.root, "circle", {
            "cx": _fmt(self._x(cx)),
            "cy": _fmt(self._y(cy)),
            "r": _fmt(r / self.width * VIEWPORT),
            "fill": fill,
        })
        self.shapes += 1

    def tostring(self) -> str:
        return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(self.root, encoding="unicode") + "\n"


def _fmt(value: float) -> str:
    return f"{value:.4f}".rstrip("0").rstrip(".")


def _check_budget(count: int) -> None:
    if count > settings.MAX_CELLS:
        raise ResourceError("max_cells", count, settings.MAX_CELLS)


def _projection_key(a: CylinderInterval, b: CylinderInterval) -> Tuple[Scalar, Scalar]:
    lo = a.interval.lo + b.interval.lo
    hi = a.interval.hi + b.interval.hi
    if is_exact(lo) and is_exact(hi):
        return lo, hi
    return round(float(lo), 12), round(float(hi), 12)


def coinciding_pairs(
    left: Sequence[CylinderInterval], right: Sequence[CylinderInterval]
) -> List[List[Tuple[int, int]]]:
    """Groups of two or more squares I(u)×I'(u') whose projections onto the diagonal are the same interval."""
    groups: Dict[Tuple[Scalar, Scalar], List[Tuple[int, int]]] = defaultdict(list)
    for i, a in enumerate(left):
        for j, b in enumerate(right):
            groups[_projection_key(a, b)].append((i, j))
    return [squares for _, squares in sorted(groups.items()) if len(squares) > 1]


def render_product_svg(left: IFS1D, right: IFS1D, depth: int) -> Figure:
    """
    Level-`depth` cylinder squares of K×K' at the ladder scale; squares sharing
    their P_{π/4} projection are drawn in a common color.
    """
    if depth < 0:
        raise DomainError(f"depth must be nonnegative, got {depth}")
    delta = ladder_delta(scale_ladder(left, right), depth) * max(left.hull.length, right.hull.length)
    left_cyl = cylinders_at_scale(left, delta)
    right_cyl = cylinders_at_scale(right, delta)
    _check_budget(len(left_cyl) * len(right_cyl))

    groups = coinciding_pairs(left_cyl, right_cyl)
    colors: Dict[Tuple[int, int], str] = {}
    for g, squares in enumerate(groups):
        for square in squares:
            colors[square] = PALETTE[g % len(PALETTE)]

    canvas = _Canvas(float(left.hull.lo), float(right.hull.lo), float(left.hull.length), float(right.hull.length))
    for i, a in enumerate(left_cyl):
        for j, b in enumerate(right_cyl):
            canvas.rect(float(a.interval.lo), float(b.interval.lo), float(a.interval.length),
                        float(b.interval.length), colors.get((i, j), PLAIN))
    colored = sum(len(squares) * (len(squares) - 1) // 2 for squares in groups)
    logger.info("product figure at depth %d: %d squares, %d coinciding pairs", depth, canvas.shapes, colored)
    return Figure(canvas.tostring(), canvas.shapes, colored)


def render_planar_svg(ifs: IFS2D, depth: int) -> Figure:
    """The balls f_u(B) of the depth-`depth` cover of a planar attractor."""
    if depth < 0:
        raise DomainError(f"depth must be nonnegative, got {depth}")
    delta = ifs.radius * profile_scale_base(ifs) ** -depth
    cover = ball_cover(ifs, delta)
    cx, cy = ifs.center
    canvas = _Canvas(cx - ifs.radius, cy - ifs.radius, 2 * ifs.radius, 2 * ifs.radius)
    for ball in cover.balls:
        canvas.circle(ball.center[0], ball.center[1], ball.radius, PLAIN)
    return Figure(canvas.tostring(), canvas.shapes, 0)


def render_tower_svg(levels: Sequence[TreeLevel]) -> Figure:
    """Tower rectangles in the unit square, deeper levels drawn on top and more opaque."""
    if not levels:
        raise DomainError("no tower levels to draw")
    canvas = _Canvas(0.0, 0.0, 1.0, 1.0)
    for index, level in enumerate(levels):
        nodes = level.nodes if level.nodes is not None else [level.representative]
        _check_budget(canvas.shapes + len(nodes))
        opacity = min(1.0, 0.25 + 0.75 * (index + 1) / len(levels))
        fill = PALETTE[index % len(PALETTE)] if level.case_two else PLAIN
        for node in nodes:
            rect = node.rect
            canvas.rect(float(rect.x0), float(rect.y0), float(rect.width), float(rect.height), fill, opacity)
    return Figure(canvas.tostring(), canvas.shapes, 0)



def render_svg(target: Union[IFS2D, Tuple[IFS1D, IFS1D]], depth: int) -> Figure:
    """A planar system draws its ball cover; a pair of line systems draws the product K×K'."""
    if isinstance(target, IFS2D):
        return render_planar_svg(target, depth)
    left, right = target
    return render_product_svg(left, right, depth)
