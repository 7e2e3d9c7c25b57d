"""
Helpers for matching tests: hand-built view boxes and an exhaustive
assignment oracle.
"""
import itertools
from typing import Dict, List, Sequence, Tuple

from core.geometry import Rect2
from core.view_fusion import ClassLabel, ViewBox2D, ViewFrame, ViewKind

# 1 px per centimetre on every view axis: x 0-6 m, y 0-2 m, z 0-3 m
FRAMES = {
    ViewKind.BSCAN: ViewFrame(0.0, 0.0, 600.0, 300.0, 6.0, 2.0, 3.0),
    ViewKind.CSCAN: ViewFrame(0.0, 0.0, 600.0, 200.0, 6.0, 2.0, 3.0),
    ViewKind.DSCAN: ViewFrame(0.0, 0.0, 200.0, 300.0, 6.0, 2.0, 3.0),
}


def view_box(box_id: str, view: str, variant: int, h: Tuple[float, float], v: Tuple[float, float],
             confidence: float = 0.9) -> ViewBox2D:
    """Box given in metres on the view's (horizontal, vertical) axes, stored in FRAMES pixels."""
    return ViewBox2D(
        box_id,
        ClassLabel(ViewKind(view), variant),
        Rect2(h[0] * 100.0, v[0] * 100.0, h[1] * 100.0, v[1] * 100.0),
        confidence,
    )


def pipe_boxes(k: int, variant: int, x: Tuple[float, float], y: Tuple[float, float],
               z: Tuple[float, float]) -> Tuple[ViewBox2D, ViewBox2D, ViewBox2D]:
    """Consistent B/C/D boxes of one pipe with ids B00k, C00k, D00k."""
    return (
        view_box(f"B{k:03d}", "B", 1, x, z),
        view_box(f"C{k:03d}", "C", variant, x, y),
        view_box(f"D{k:03d}", "D", variant, y, z),
    )


def exhaustive_assignment(candidates: Dict[Tuple[str, str, str], float]) -> Tuple[int, float]:
    """
    Best (count, total score) over every set of member-disjoint candidates.

    Candidates map id triples to their pairwise score sums. Only usable for
    a handful of candidates.
    """
    best = (0, 0.0)
    keys = list(candidates)
    for size in range(1, len(keys) + 1):
        for subset in itertools.combinations(keys, size):
            members = [m for triple in subset for m in triple]
            if len(members) != len(set(members)):
                continue
            total = sum(candidates[t] for t in subset)
            if (size, total) > best:
                best = (size, total)
    return best


def ids_of(detections: Sequence) -> List[Tuple[str, str, str]]:
    return sorted(tuple(d.members) for d in detections)


def box_ids(boxes: Sequence[ViewBox2D]) -> List[str]:
    """Ids of per-view boxes, in list order."""
    return [b.box_id for b in boxes]
