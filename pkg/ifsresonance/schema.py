from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ifsresonance.errors import DomainError
from ifsresonance.ifs.scalar import Scalar, at_most, common_mode, is_exact
from ifsresonance.settings import settings

# Words are 0-based index tuples; the empty word is the root.
Word = Tuple[int, ...]


@dataclass(frozen=True)
class Interval:
    lo: Scalar
    hi: Scalar

    def __post_init__(self) -> None:
        if self.hi < self.lo:
            raise DomainError(f"Interval needs lo <= hi, got [{self.lo}, {self.hi}]")

    @property
    def length(self) -> Scalar:
        return self.hi - self.lo

    @property
    def midpoint(self) -> Scalar:
        return (self.lo + self.hi) / 2

    def contains(self, other: Interval, tol: float = 0.0) -> bool:
        return at_most(self.lo, other.lo, tol) and at_most(other.hi, self.hi, tol)

    def contains_point(self, x: Scalar, tol: float = 0.0) -> bool:
        return at_most(self.lo, x, tol) and at_most(x, self.hi, tol)

    def shift(self, t: Scalar) -> Interval:
        return Interval(self.lo + t, self.hi + t)

    def scale(self, s: Scalar) -> Interval:
        a, b = self.lo * s, self.hi * s
        return Interval(min(a, b), max(a, b))

    def __add__(self, other: Interval) -> Interval:
        return Interval(self.lo + other.lo, self.hi + other.hi)


@dataclass(frozen=True)
class Similitude1D:
    ratio: Scalar
    translation: Scalar
    is_root: bool = False

    def __post_init__(self) -> None:
        common_mode([self.ratio, self.translation])
        if self.is_root:
            if self.ratio != 1 or self.translation != 0:
                raise DomainError("the root map is the identity")
        elif not 0 < abs(self.ratio) < 1:
            raise DomainError(f"contraction ratio must satisfy 0 < |r| < 1, got {self.ratio}")

    @classmethod
    def root(cls, exact: bool = True) -> Similitude1D:
        if exact:
            return cls(Fraction(1), Fraction(0), is_root=True)
        return cls(1.0, 0.0, is_root=True)

    @property
    def exact(self) -> bool:
        return is_exact(self.ratio)

    def __call__(self, x: Scalar) -> Scalar:
        return self.ratio * x + self.translation

    def compose(self, inner: Similitude1D) -> Similitude1D:
        """self ∘ inner."""
        if inner.is_root:
            return self
        if self.is_root:
            return inner
        return Similitude1D(self.ratio * inner.ratio, self.ratio * inner.translation + self.translation)

    def image(self, interval: Interval) -> Interval:
        a, b = self(interval.lo), self(interval.hi)
        return Interval(min(a, b), max(a, b))

    @property
    def fixed_point(self) -> Scalar:
        return self.translation / (1 - self.ratio)


@dataclass(frozen=True)
class IFS1D:
    maps: Tuple[Similitude1D, ...]
    hull: Interval

    def __post_init__(self) -> None:
        if len(self.maps) < 2:
            raise DomainError(f"an IFS needs at least two maps, got {len(self.maps)}")
        common_mode([v for f in self.maps for v in (f.ratio, f.translation)] + [self.hull.lo, self.hull.hi])
        for i, f in enumerate(self.maps):
            if not self.hull.contains(f.image(self.hull), tol=settings.FLOAT_TOL):
                raise DomainError(f"map {i} does not send the hull {self.hull} into itself")

    @property
    def n(self) -> int:
        return len(self.maps)

    @property
    def exact(self) -> bool:
        return self.maps[0].exact

    @property
    def ratios(self) -> List[Scalar]:
        return [f.ratio for f in self.maps]

    @property
    def translations(self) -> List[Scalar]:
        return [f.translation for f in self.maps]

    @property
    def homogeneous(self) -> bool:
        first = self.maps[0].ratio
        return all(f.ratio == first for f in self.maps)

    def image(self, word: Word) -> Interval:
        from ifsresonance.ifs.systems import compose_word
        return compose_word(self, word).image(self.hull)


@dataclass(frozen=True)
class CylinderInterval:
    word: Word
    interval: Interval
    ratio: Scalar


@dataclass(frozen=True)
class Similitude2D:
    scale: Scalar
    angle: float
    reflect: bool
    translation: Tuple[Scalar, Scalar]

    def __post_init__(self) -> None:
        if not 0 < self.scale < 1:
            raise DomainError(f"planar scale must satisfy 0 < ζ < 1, got {self.scale}")
        normalized = math.fmod(float(self.angle), 2 * math.pi)
        if normalized < 0:
            normalized += 2 * math.pi
        object.__setattr__(self, "angle", normalized)

    @property
    def linear(self) -> np.ndarray:
        c, s = math.cos(self.angle), math.sin(self.angle)
        rotation = np.array([[c, -s], [s, c]])
        if self.reflect:
            rotation = rotation @ np.diag([1.0, -1.0])
        return float(self.scale) * rotation

    def __call__(self, point: Sequence[float]) -> np.ndarray:
        return self.linear @ np.asarray(point, dtype=float) + np.asarray(self.translation, dtype=float)

    def compose(self, inner: Similitude2D) -> Similitude2D:
        """self ∘ inner; O R_φ = R_{-φ} O gives the angle bookkeeping."""
        angle = self.angle - inner.angle if self.reflect else self.angle + inner.angle
        d = self(inner.translation)
        return Similitude2D(
            scale=self.scale * inner.scale,
            angle=angle,
            reflect=self.reflect != inner.reflect,
            translation=(float(d[0]), float(d[1])),
        )


@dataclass(frozen=True)
class IFS2D:
    maps: Tuple[Similitude2D, ...]
    center: Tuple[float, float] = (0.0, 0.0)
    radius: float = 1.0

    def __post_init__(self) -> None:
        if len(self.maps) < 1:
            raise DomainError("a planar IFS needs at least one map")
        c = np.asarray(self.center, dtype=float)
        for i, f in enumerate(self.maps):
            reach = float(np.linalg.norm(f(c) - c)) + float(f.scale) * self.radius
            if reach > self.radius * (1 + 1e-10):
                raise DomainError(f"map {i} does not send the bounding disk into itself")

    @property
    def scales(self) -> List[float]:
        return [float(f.scale) for f in self.maps]


@dataclass(frozen=True)
class Cover1D:
    """
    Merged cover stored as sorted endpoint arrays.

    In exact mode the arrays hold integers over the common denominator
    `unit`; in float mode they hold the endpoints themselves and unit is None.
    """
    delta: Scalar
    lo: np.ndarray
    hi: np.ndarray
    unit: Optional[int] = None

    @property
    def exact(self) -> bool:
        return self.unit is not None

    def __len__(self) -> int:
        return int(len(self.lo))

    def intervals(self) -> List[Interval]:
        if self.unit is None:
            return [Interval(float(a), float(b)) for a, b in zip(self.lo, self.hi)]
        return [Interval(Fraction(int(a), self.unit), Fraction(int(b), self.unit)) for a, b in zip(self.lo, self.hi)]

    def contains_point(self, x: Scalar) -> bool:
        if self.unit is None:
            value = float(x)
            tol = settings.FLOAT_TOL * max(1.0, abs(value))
            i = int(np.searchsorted(self.lo, value + tol, side="right")) - 1
            return i >= 0 and value <= float(self.hi[i]) + tol
        scaled = Fraction(x) * self.unit
        i = int(np.searchsorted(self.lo, math.floor(scaled), side="right")) - 1
        while i >= 0 and self.lo[i] > scaled:
            i -= 1
        return i >= 0 and scaled <= int(self.hi[i])

    @property
    def total_length(self) -> float:
        length = float(np.sum(self.hi - self.lo))
        return length / self.unit if self.unit is not None else length


@dataclass(frozen=True)
class BoxCountSeries:
    ks: Tuple[int, ...]
    deltas: Tuple[Scalar, ...]
    counts: Tuple[int, ...]

    def __post_init__(self) -> None:
        if not (len(self.ks) == len(self.deltas) == len(self.counts)):
            raise DomainError("box-count series columns differ in length")
        for a, b in zip(self.deltas, self.deltas[1:]):
            if not b < a:
                raise DomainError("box-count scales must be strictly decreasing")

    @property
    def rows(self) -> List[Tuple[int, Scalar, int]]:
        return list(zip(self.ks, self.deltas, self.counts))


@dataclass(frozen=True)
class DimensionEstimate:
    value: float
    stderr: float
    scale_range: Tuple[int, int]
    residual: float
    degenerate: bool = False


@dataclass(frozen=True)
class Cell:
    kind: str  # "rect" or "disk"
    x: float
    y: float
    width: float = 0.0
    height: float = 0.0
    radius: float = 0.0

    @classmethod
    def rect(cls, x0: float, y0: float, width: float, height: float) -> Cell:
        return cls("rect", float(x0), float(y0), width=float(width), height=float(height))

    @classmethod
    def disk(cls, cx: float, cy: float, radius: float) -> Cell:
        return cls("disk", float(cx), float(cy), radius=float(radius))

    @property
    def center(self) -> Tuple[float, float]:
        if self.kind == "rect":
            return self.x + self.width / 2, self.y + self.height / 2
        return self.x, self.y

    @property
    def area(self) -> float:
        if self.kind == "rect":
            return self.width * self.height
        return math.pi * self.radius ** 2

    @property
    def inradius(self) -> float:
        if self.kind == "rect":
            return min(self.width, self.height) / 2
        return self.radius

    @property
    def circumradius(self) -> float:
        if self.kind == "rect":
            return math.hypot(self.width, self.height) / 2
        return self.radius


@dataclass(frozen=True)
class CellFamily:
    cells: Tuple[Cell, ...]
    rho: float
    A: float
    A1: float
    A2: float
    gamma: float
    words: Optional[Tuple[Tuple[Word, Word], ...]] = None

    def __len__(self) -> int:
        return len(self.cells)

    @cached_property
    def arrays(self) -> Dict[str, np.ndarray]:
        """Centers, half-extents and radii as float arrays."""
        centers = np.array([c.center for c in self.cells], dtype=float).reshape(-1, 2)
        half_w = np.array([c.width / 2 if c.kind == "rect" else 0.0 for c in self.cells])
        half_h = np.array([c.height / 2 if c.kind == "rect" else 0.0 for c in self.cells])
        radius = np.array([c.radius if c.kind == "disk" else 0.0 for c in self.cells])
        area = np.array([c.area for c in self.cells])
        return {"centers": centers, "half_w": half_w, "half_h": half_h, "radius": radius, "area": area}


@dataclass(frozen=True)
class GoodAngleSet:
    intervals: Tuple[Tuple[float, float], ...]
    epsilon: float
    delta: float
    theta_steps: int
    bad_measure: float
    sizes: np.ndarray = field(repr=False)
    lengths: np.ndarray = field(repr=False)

    @property
    def good_measure(self) -> float:
        return float(sum(b - a for a, b in self.intervals))

    @property
    def within_bound(self) -> bool:
        return self.bad_measure <= self.epsilon * math.pi + 1e-12

    def contains(self, theta: float) -> bool:
        return any(a < theta < b for a, b in self.intervals)


class ResonanceMode(str, Enum):
    EXACT = "exact"
    FLOAT = "float"


@dataclass(frozen=True)
class ResonanceVerdict:
    resonant: bool
    witnesses: Dict[Tuple[int, int], Optional[Tuple[int, int]]]
    lattice: Optional[float]
    denominator_bound: int
    tolerance: float
    mode: ResonanceMode
    note: str = ""

    def transposed(self) -> ResonanceVerdict:
        swapped = {
            (j, i): (None if w is None else (w[1], w[0]))
            for (i, j), w in self.witnesses.items()
        }
        return ResonanceVerdict(self.resonant, swapped, self.lattice, self.denominator_bound,
                                self.tolerance, self.mode, self.note)


@dataclass(frozen=True)
class RotationState:
    alpha: float
    beta: float
    F: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        if not 0 < self.alpha < self.beta:
            raise DomainError(f"rotation needs 0 < α < β, got α={self.alpha}, β={self.beta}")
        last = -math.inf
        for a, b in self.F:
            if not (0 <= a < b <= self.beta) or a < last:
                raise DomainError("good-scale set must be sorted disjoint subintervals of [0, β)")
            last = b

    @property
    def F_measure(self) -> float:
        return float(sum(b - a for a, b in self.F))


@dataclass(frozen=True)
class Rect:
    x0: Scalar
    y0: Scalar
    width: Scalar
    height: Scalar

    def contains(self, other: Rect) -> bool:
        return (self.x0 <= other.x0 and self.y0 <= other.y0
                and other.x0 + other.width <= self.x0 + self.width
                and other.y0 + other.height <= self.y0 + self.height)

    def project(self, slope: Scalar) -> Interval:
        """Π_s(x, y) = x + s·y for s > 0."""
        lo = self.x0 + slope * self.y0
        return Interval(lo, lo + self.width + slope * self.height)

    def product(self, inner: Rect) -> Rect:
        """Q·P: the image of P under the orientation preserving map of the unit square onto Q."""
        return Rect(self.x0 + self.width * inner.x0, self.y0 + self.height * inner.y0,
                    self.width * inner.width, self.height * inner.height)


@dataclass(frozen=True)
class TreeNode:
    u: Word
    u_prime: Word
    rect: Rect


@dataclass
class TreeLevel:
    level: int
    orbit: float
    good: bool
    case_two: bool
    children_per_node: int
    node_count: int
    template: List[Tuple[Word, Word]]
    representative: TreeNode
    nodes: Optional[List[TreeNode]] = None
    audits: Dict[str, bool] = field(default_factory=dict)


@dataclass(frozen=True)
class LowerBoundReport:
    m: int
    epsilon: float
    levels: int
    weyl_frequency: float
    weyl_expected: float
    level_good_frequency: float
    certified_slope: float
    theoretical_slope: float
    closed_form_slope: Optional[float]
    branching: Tuple[int, ...]
    ratio: float = 0.5
    delta: float = 1.0


@dataclass(frozen=True)
class HomogenizeReport:
    k: int
    v: Tuple[int, ...]
    N_k: int
    rho: Scalar
    tau: float
    gamma: float


@dataclass(frozen=True)
class DropInstance:
    xi: Scalar
    a_exponents: Dict[int, int]
    b_exponents: Dict[int, int]
    beta: float
    beta_prime: float
    a: int
    b: int
    A: int
    B: int
    M0: int
    M: int
    ell: int
    p: float = 0.0
    q: float = 0.0
    translations: Tuple[Scalar, ...] = ()
    translations_prime: Tuple[Scalar, ...] = ()


@dataclass(frozen=True)
class DigitSumReport:
    D: Tuple[Scalar, ...]
    D_prime: Tuple[Scalar, ...]
    s: Scalar
    sum_size: int
    bound: float


@dataclass(frozen=True)
class Ball:
    word: Word
    center: Tuple[float, float]
    radius: float


@dataclass(frozen=True)
class BallCover:
    delta: float
    balls: Tuple[Ball, ...]

    def __len__(self) -> int:
        return len(self.balls)

    @cached_property
    def centers(self) -> np.ndarray:
        return np.array([b.center for b in self.balls], dtype=float).reshape(-1, 2)

    @cached_property
    def radii(self) -> np.ndarray:
        return np.array([b.radius for b in self.balls], dtype=float)


@dataclass(frozen=True)
class ProjectionProfile:
    directions: Tuple[float, ...]
    estimates: Tuple[DimensionEstimate, ...]

    @property
    def rows(self) -> List[Tuple[float, DimensionEstimate]]:
        return list(zip(self.directions, self.estimates))

    @property
    def values(self) -> np.ndarray:
        return np.array([e.value for e in self.estimates])


Words = List[Word]
Cylinders = List[CylinderInterval]
