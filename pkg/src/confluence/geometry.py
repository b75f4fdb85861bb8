"""Axis-aligned box primitives and proximity metrics.

Coordinates follow the image convention: x grows rightward, y grows
downward, and a box is described by its upper-left and lower-right
corners.  All arithmetic is float64.

The central metric is the *normalized proximity* between two boxes: both
boxes are min-max normalized per axis over the union of their coordinates
on that axis, and the Manhattan distances between corresponding corners
are summed.  Identical boxes score 0, heavily overlapping boxes score
well below 2, and distant boxes approach 4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "Point2",
    "BoxCorners",
    "manhattan_distance",
    "raw_proximity",
    "normalize_pair",
    "normalized_proximity",
    "iou",
]


@dataclass(frozen=True)
class Point2:
    """A point in the image plane.  Coordinates must be finite."""

    x: float
    y: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"point coordinates must be finite, got ({self.x!r}, {self.y!r})")


@dataclass(frozen=True)
class BoxCorners:
    """Axis-aligned box given by its upper-left and lower-right corners.

    Invariant: upper_left.x <= lower_right.x and upper_left.y <= lower_right.y
    (y grows downward).  Boxes with zero width or height are representable
    and flagged via :attr:`is_degenerate`; downstream ingestion drops them.
    """

    upper_left: Point2
    lower_right: Point2

    def __post_init__(self) -> None:
        if self.lower_right.x < self.upper_left.x or self.lower_right.y < self.upper_left.y:
            raise ValueError(
                "corners out of order: require upper_left <= lower_right per axis, got "
                f"{self.as_xyxy()}"
            )

    @classmethod
    def from_xyxy(cls, x1: float, y1: float, x2: float, y2: float) -> "BoxCorners":
        return cls(Point2(x1, y1), Point2(x2, y2))

    def as_xyxy(self) -> tuple[float, float, float, float]:
        return (self.upper_left.x, self.upper_left.y, self.lower_right.x, self.lower_right.y)

    @property
    def width(self) -> float:
        return self.lower_right.x - self.upper_left.x

    @property
    def height(self) -> float:
        return self.lower_right.y - self.upper_left.y

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def is_degenerate(self) -> bool:
        """True when the box has zero extent on either axis."""
        return self.width == 0.0 or self.height == 0.0


def manhattan_distance(a: Point2, b: Point2) -> float:
    """L1 distance |a.x - b.x| + |a.y - b.y|."""
    return abs(a.x - b.x) + abs(a.y - b.y)


def raw_proximity(a: BoxCorners, b: BoxCorners) -> float:
    """Sum of Manhattan distances between corresponding corners.

    Small values mean the two boxes nearly coincide.  Symmetric in its
    arguments (bit-identical).
    """
    return manhattan_distance(a.upper_left, b.upper_left) + manhattan_distance(
        a.lower_right, b.lower_right
    )


def _normalize_axis(lo: float, hi: float, values: tuple[float, ...]) -> tuple[float, ...]:
    span = hi - lo
    if span > 0.0:
        return tuple((v - lo) / span for v in values)
    # Zero-range axis: every coordinate coincides, so the axis carries no
    # separation signal and contributes 0.
    return tuple(0.0 for _ in values)


def normalize_pair(a: BoxCorners, b: BoxCorners) -> tuple[BoxCorners, BoxCorners]:
    """Min-max normalize both boxes per axis over the union of their coordinates.

    Each axis is rescaled so the smallest coordinate among the two boxes
    maps to 0 and the largest to 1; a zero-range axis maps everything to 0.
    Corner ordering is preserved, so the outputs are valid boxes with all
    coordinates in [0, 1].
    """
    xs = (a.upper_left.x, a.lower_right.x, b.upper_left.x, b.lower_right.x)
    ys = (a.upper_left.y, a.lower_right.y, b.upper_left.y, b.lower_right.y)
    nx = _normalize_axis(min(xs), max(xs), xs)
    ny = _normalize_axis(min(ys), max(ys), ys)
    na = BoxCorners(Point2(nx[0], ny[0]), Point2(nx[1], ny[1]))
    nb = BoxCorners(Point2(nx[2], ny[2]), Point2(nx[3], ny[3]))
    return na, nb


def normalized_proximity(a: BoxCorners, b: BoxCorners) -> float:
    """Raw proximity of the pair after pairwise min-max normalization.

    Result lies in [0, 4]: 0 for identical boxes, strictly below 2 for
    pairs with positive overlap area, approaching 4 for far-apart boxes.
    Symmetric in its arguments (bit-identical under this evaluation order).
    """
    na, nb = normalize_pair(a, b)
    return raw_proximity(na, nb)


def iou(a: BoxCorners, b: BoxCorners) -> float:
    """Intersection-over-union of two boxes.

    Degenerate inputs yielding a zero-area union return 0 rather than
    dividing by zero.
    """
    ix = min(a.lower_right.x, b.lower_right.x) - max(a.upper_left.x, b.upper_left.x)
    iy = min(a.lower_right.y, b.lower_right.y) - max(a.upper_left.y, b.upper_left.y)
    if ix <= 0.0 or iy <= 0.0:
        inter = 0.0
    else:
        inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union
