"""
Axis-aligned 2D/3D box arithmetic: intersection, union, IoU, enclosing box,
centre distance and DIoU.

Boxes are closed intervals per axis. Touching faces intersect with zero
volume, so they contribute nothing to IoU.
"""
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

Interval = Tuple[float, float]


@dataclass(frozen=True)
class Rect2:
    """Axis-aligned rectangle; normalized units or meters depending on context."""
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self):
        if self.min_x > self.max_x or self.min_y > self.max_y:
            raise ValueError(
                f"Invalid rect: min ({self.min_x}, {self.min_y}) exceeds "
                f"max ({self.max_x}, {self.max_y})"
            )

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def height(self) -> float:
        return self.max_y - self.min_y

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> Tuple[float, float]:
        return (0.5 * (self.min_x + self.max_x), 0.5 * (self.min_y + self.max_y))

    def intervals(self) -> Tuple[Interval, Interval]:
        return (self.min_x, self.max_x), (self.min_y, self.max_y)


@dataclass(frozen=True)
class Box3D:
    """Axis-aligned cuboid in scene meters. `lo` and `hi` are (x, y, z) corners."""
    lo: Tuple[float, float, float]
    hi: Tuple[float, float, float]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != 3 or len(hi) != 3:
            raise ValueError(f"Box3D corners must have 3 components, got {lo} / {hi}")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"Invalid box: lo {lo} exceeds hi {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_intervals(cls, x: Interval, y: Interval, z: Interval) -> "Box3D":
        return cls((x[0], y[0], z[0]), (x[1], y[1], z[1]))

    @property
    def extent(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lo) + np.asarray(self.hi))

    def interval(self, axis: int) -> Interval:
        return (self.lo[axis], self.hi[axis])

    def contains(self, other: "Box3D") -> bool:
        return all(a <= c and d <= b for a, b, c, d in zip(self.lo, self.hi, other.lo, other.hi))

    def clip(self, bounds: "Box3D") -> "Box3D":
        """Intersect with `bounds`; collapses to a face when disjoint on an axis."""
        lo = np.clip(self.lo, bounds.lo, bounds.hi)
        hi = np.clip(self.hi, bounds.lo, bounds.hi)
        return Box3D(tuple(lo), tuple(hi))


def _overlap(lo_a: Sequence[float], hi_a: Sequence[float],
             lo_b: Sequence[float], hi_b: Sequence[float]) -> np.ndarray:
    return np.maximum(0.0, np.minimum(hi_a, hi_b) - np.maximum(lo_a, lo_b))


def iou_2d(a: Rect2, b: Rect2) -> float:
    """Area IoU; 0 when the union area is 0."""
    w, h = _overlap((a.min_x, a.min_y), (a.max_x, a.max_y),
                    (b.min_x, b.min_y), (b.max_x, b.max_y))
    inter = w * h
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return float(inter / union)


def enclosing_rect(a: Rect2, b: Rect2) -> Rect2:
    return Rect2(min(a.min_x, b.min_x), min(a.min_y, b.min_y),
                 max(a.max_x, b.max_x), max(a.max_y, b.max_y))


def diou_2d(a: Rect2, b: Rect2) -> float:
    """Planar DIoU: IoU minus squared centre distance over squared enclosing diagonal."""
    enc = enclosing_rect(a, b)
    c2 = enc.width ** 2 + enc.height ** 2
    if c2 == 0.0:
        return 1.0
    (ax, ay), (bx, by) = a.center, b.center
    d2 = (ax - bx) ** 2 + (ay - by) ** 2
    return iou_2d(a, b) - d2 / c2


def iou_3d(a: Box3D, b: Box3D) -> float:
    """Volume IoU; 0 when both volumes are 0."""
    inter = float(np.prod(_overlap(a.lo, a.hi, b.lo, b.hi)))
    union = a.volume + b.volume - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def enclosing_box(a: Box3D, b: Box3D) -> Box3D:
    return Box3D(tuple(np.minimum(a.lo, b.lo)), tuple(np.maximum(a.hi, b.hi)))


def center_distance(a: Box3D, b: Box3D) -> float:
    diff = a.center - b.center
    return float(np.sqrt(np.sum(diff * diff)))


def diou_3d(a: Box3D, b: Box3D) -> float:
    """
    3D-DIoU = IoU - d^2 / c^2.

    d is the centre distance and c the diagonal of the smallest enclosing
    cuboid. Two identical point boxes give c = 0; the score is then 1.0.
    """
    enc = enclosing_box(a, b)
    c2 = float(np.sum(enc.extent ** 2))
    if c2 == 0.0:
        return 1.0
    diff = a.center - b.center
    d2 = float(np.sum(diff * diff))
    return iou_3d(a, b) - d2 / c2
