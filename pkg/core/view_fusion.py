"""
Three-view fusion: normalize per-view 2D detections into the scene frame,
lift them to 3D boxes by borrowing each view's missing axis from another view,
match (B, C, D) triples by thresholded pairwise 3D-DIoU, classify pipeline
orientation and estimate burial depth.

Axis convention of the scene frame R: x is the survey direction, y the
transverse direction, z depth (positive down).
    B-scan spans (x, z), C-scan spans (x, y), D-scan spans (y, z).
"""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .errors import (
    DepthDomainError,
    LabelConflictError,
    OutOfFrameError,
    ParameterError,
)
from .geometry import Box3D, Interval, Rect2, diou_3d, iou_2d

logger = logging.getLogger(__name__)

AXIS_INDEX = {"x": 0, "y": 1, "z": 2}

# Pair keys used in scores and reports
PAIR_BC = "B-C"
PAIR_BD = "B-D"
PAIR_CD = "C-D"
ALL_PAIRS = (PAIR_BC, PAIR_BD, PAIR_CD)
TABLE_PAIRS = (PAIR_BC, PAIR_BD)

PairwiseMode = str  # "all" or "table"


class ViewKind(str, Enum):
    BSCAN = "B"
    CSCAN = "C"
    DSCAN = "D"

    @property
    def axes(self) -> Tuple[str, str]:
        """(image horizontal axis, image vertical axis) in scene terms."""
        return _VIEW_AXES[self]


_VIEW_AXES = {
    ViewKind.BSCAN: ("x", "z"),
    ViewKind.CSCAN: ("x", "y"),
    ViewKind.DSCAN: ("y", "z"),
}


class Orientation(str, Enum):
    VERTICAL = "Vertical"
    HORIZONTAL_INCLINED = "HorizontalInclined"
    DEEPLY_INCLINED = "DeeplyInclined"

    @property
    def variant(self) -> int:
        return _ORIENTATION_VARIANT[self]

    @classmethod
    def from_variant(cls, variant: int) -> "Orientation":
        for orientation, v in _ORIENTATION_VARIANT.items():
            if v == variant:
                return orientation
        raise LabelConflictError(f"No orientation for variant {variant}")


_ORIENTATION_VARIANT = {
    Orientation.VERTICAL: 1,
    Orientation.HORIZONTAL_INCLINED: 2,
    Orientation.DEEPLY_INCLINED: 3,
}


@dataclass(frozen=True)
class ClassLabel:
    """Per-view class label such as 1-B, 2-C or 3-D."""
    view: ViewKind
    variant: int

    def __post_init__(self):
        object.__setattr__(self, "view", ViewKind(self.view))
        if self.variant not in (1, 2, 3):
            raise LabelConflictError(f"Invalid label variant {self.variant} for view {self.view.value}")
        if self.view is ViewKind.BSCAN and self.variant != 1:
            raise LabelConflictError(f"B-scan admits only 1-B, got {self.variant}-B")

    def __str__(self) -> str:
        return f"{self.variant}-{self.view.value}"

    @classmethod
    def parse(cls, text: str) -> "ClassLabel":
        """Parse '2-C' style labels."""
        try:
            variant, view = text.strip().split("-")
            return cls(ViewKind(view.upper()), int(variant))
        except ValueError as e:
            if isinstance(e, LabelConflictError):
                raise
            raise LabelConflictError(f"Unparseable label: {text!r}") from e


@dataclass(frozen=True)
class ViewFrame:
    """
    Placement of one view inside its source image plus the physical extents
    of the scene frame.

    Defaults follow the survey image parameters: 30 m span, 3 m depth,
    1.32 m transverse span.
    """
    origin_x_px: float = 0.0
    origin_y_px: float = 0.0
    width_px: float = 1620.0
    height_px: float = 760.0
    x_span_m: float = 30.0
    y_span_m: float = 1.32
    z_depth_m: float = 3.0

    def __post_init__(self):
        if self.width_px <= 0 or self.height_px <= 0:
            raise ParameterError(f"Frame size must be positive, got {self.width_px}x{self.height_px} px")
        if min(self.x_span_m, self.y_span_m, self.z_depth_m) <= 0:
            raise ParameterError(
                f"Frame extents must be positive, got "
                f"({self.x_span_m}, {self.y_span_m}, {self.z_depth_m}) m"
            )

    @classmethod
    def for_extents(cls, extents: Sequence[float], width_px: float = 1620.0,
                    height_px: float = 760.0) -> "ViewFrame":
        x, y, z = extents
        return cls(0.0, 0.0, width_px, height_px, x, y, z)

    def span(self, axis: str) -> float:
        return {"x": self.x_span_m, "y": self.y_span_m, "z": self.z_depth_m}[axis]


@dataclass(frozen=True)
class ViewBox2D:
    """A detection or annotation box in pixels of its view's source image."""
    box_id: str
    label: ClassLabel
    rect: Rect2
    confidence: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ParameterError(f"Box {self.box_id}: confidence {self.confidence} outside [0, 1]")

    @property
    def view(self) -> ViewKind:
        return self.label.view


@dataclass(frozen=True)
class LiftedBox:
    """3D box built from one view box plus the missing axis borrowed from a donor view."""
    box: Box3D
    provenance: str  # "3D-1B", "3D-nC" or "3D-nD"
    source_id: str
    donor_id: str


@dataclass(frozen=True)
class ApexObservation:
    """Hyperbola apex: position x0 (m), two-way time t0 (ns), velocity v (m/ns)."""
    x0: float
    t0: float
    v: float

    def __post_init__(self):
        if self.t0 <= 0:
            raise ParameterError(f"Apex time must be positive, got {self.t0} ns")
        if self.v <= 0:
            raise ParameterError(f"Wave velocity must be positive, got {self.v} m/ns")


@dataclass(frozen=True)
class MatchConfig:
    """Thresholds of the matcher. Defaults: confidence 0.5, prediction IoU 0.7, 3D-DIoU 0.4."""
    confidence_threshold: float = 0.5
    prediction_iou_threshold: float = 0.7
    matching_threshold: float = 0.4
    pairwise_mode: PairwiseMode = "all"
    clamp_tolerance_px: float = 2.0
    wave_velocity: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.confidence_threshold <= 1.0:
            raise ParameterError(f"confidence_threshold {self.confidence_threshold} outside [0, 1]")
        if not 0.0 <= self.prediction_iou_threshold <= 1.0:
            raise ParameterError(f"prediction_iou_threshold {self.prediction_iou_threshold} outside [0, 1]")
        # Above 1 nothing qualifies, which is a legitimate sweep end point
        if not (math.isfinite(self.matching_threshold) and self.matching_threshold >= -1.0):
            raise ParameterError(f"matching_threshold {self.matching_threshold} must be finite and >= -1")
        if self.pairwise_mode not in ("all", "table"):
            raise ParameterError(f"pairwise_mode must be 'all' or 'table', got {self.pairwise_mode!r}")
        if self.clamp_tolerance_px < 0:
            raise ParameterError(f"clamp_tolerance_px must be >= 0, got {self.clamp_tolerance_px}")
        if self.wave_velocity <= 0:
            raise ParameterError(f"wave_velocity must be positive, got {self.wave_velocity}")

    @property
    def pairs(self) -> Tuple[str, ...]:
        return ALL_PAIRS if self.pairwise_mode == "all" else TABLE_PAIRS


@dataclass(frozen=True)
class PipelineDetection:
    """An accepted (B, C, D) triple."""
    orientation: Orientation
    members: Tuple[str, str, str]
    labels: Tuple[ClassLabel, ClassLabel, ClassLabel]
    scores: Dict[str, float]
    fused: Box3D
    depth_m: float

    @property
    def min_score(self) -> float:
        return min(self.scores.values())


@dataclass
class MatchResult:
    detections: List[PipelineDetection] = field(default_factory=list)
    unmatched: List[ViewBox2D] = field(default_factory=list)
    # (box_id, reason) for boxes removed by the confidence filter or duplicate suppression
    discarded: List[Tuple[str, str]] = field(default_factory=list)
    # Scene-meter intervals of every box that survived filtering, by box id
    observed: Dict[str, Dict[str, Interval]] = field(default_factory=dict)


# =============================================================================
# Normalization and lifting
# =============================================================================

def normalize_box(box: ViewBox2D, frame: ViewFrame, clamp_px: float = 2.0) -> Rect2:
    """
    Map a pixel box into the view's normalized [0, 1]^2 frame.

    Each edge e maps to (e - origin) / size on its axis. Boxes poking out of
    the frame by at most `clamp_px` are clamped first; anything further out
    is rejected.
    """
    r = box.rect
    x_lo, x_hi = frame.origin_x_px, frame.origin_x_px + frame.width_px
    y_lo, y_hi = frame.origin_y_px, frame.origin_y_px + frame.height_px
    if (r.min_x < x_lo - clamp_px or r.max_x > x_hi + clamp_px
            or r.min_y < y_lo - clamp_px or r.max_y > y_hi + clamp_px):
        raise OutOfFrameError(
            f"Box {box.box_id} ({r.min_x:.1f}, {r.min_y:.1f}, {r.max_x:.1f}, {r.max_y:.1f}) px "
            f"lies outside frame [{x_lo:.1f}, {x_hi:.1f}] x [{y_lo:.1f}, {y_hi:.1f}] "
            f"beyond {clamp_px} px"
        )

    def _norm(v: float, lo: float, hi: float, size: float) -> float:
        return (min(max(v, lo), hi) - lo) / size

    return Rect2(
        _norm(r.min_x, x_lo, x_hi, frame.width_px),
        _norm(r.min_y, y_lo, y_hi, frame.height_px),
        _norm(r.max_x, x_lo, x_hi, frame.width_px),
        _norm(r.max_y, y_lo, y_hi, frame.height_px),
    )


def to_scene_meters(rect: Rect2, view: ViewKind, frame: ViewFrame) -> Dict[str, Interval]:
    """Scale a normalized rect to meters on the two axes the view spans."""
    h_axis, v_axis = ViewKind(view).axes
    h_span, v_span = frame.span(h_axis), frame.span(v_axis)
    return {
        h_axis: (rect.min_x * h_span, rect.max_x * h_span),
        v_axis: (rect.min_y * v_span, rect.max_y * v_span),
    }


def lift_to_3d(
    b: Mapping[str, Interval],
    c: Mapping[str, Interval],
    d: Mapping[str, Interval],
    ids: Tuple[str, str, str] = ("B", "C", "D"),
) -> Tuple[LiftedBox, LiftedBox, LiftedBox]:
    """
    Complete each view box with the axis it lacks.

    3D-1B = (x, z from B; y from C)
    3D-nC = (x, y from C; z from D)
    3D-nD = (y, z from D; x from B)
    """
    b_id, c_id, d_id = ids
    box_b = LiftedBox(Box3D.from_intervals(b["x"], c["y"], b["z"]), "3D-1B", b_id, c_id)
    box_c = LiftedBox(Box3D.from_intervals(c["x"], c["y"], d["z"]), "3D-nC", c_id, d_id)
    box_d = LiftedBox(Box3D.from_intervals(b["x"], d["y"], d["z"]), "3D-nD", d_id, b_id)
    return box_b, box_c, box_d


def pairwise_scores(lifted: Tuple[LiftedBox, LiftedBox, LiftedBox],
                    pairs: Sequence[str] = ALL_PAIRS) -> Dict[str, float]:
    box_b, box_c, box_d = (lb.box for lb in lifted)
    table = {
        PAIR_BC: lambda: diou_3d(box_b, box_c),
        PAIR_BD: lambda: diou_3d(box_b, box_d),
        PAIR_CD: lambda: diou_3d(box_c, box_d),
    }
    return {pair: table[pair]() for pair in pairs}


def fuse_intervals(b: Mapping[str, Interval], c: Mapping[str, Interval],
                   d: Mapping[str, Interval]) -> Box3D:
    """Per-axis mean of the two views observing that axis."""
    def _mean(p: Interval, q: Interval) -> Interval:
        return (0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]))

    return Box3D.from_intervals(_mean(b["x"], c["x"]), _mean(c["y"], d["y"]), _mean(b["z"], d["z"]))


# =============================================================================
# Classification and depth
# =============================================================================

def classify(labels: Tuple[ClassLabel, ClassLabel, ClassLabel]) -> Orientation:
    """(1-B, n-C, n-D) -> orientation n. Anything else is a conflict."""
    b, c, d = labels
    if b.view is not ViewKind.BSCAN or c.view is not ViewKind.CSCAN or d.view is not ViewKind.DSCAN:
        raise LabelConflictError(f"Labels ({b}, {c}, {d}) are not one per B/C/D view")
    if c.variant != d.variant:
        raise LabelConflictError(f"Conflicting labels {c} and {d}: variants differ")
    return Orientation.from_variant(c.variant)


def depth_from_hyperbola(obs: ApexObservation) -> float:
    """
    d = (v / 2) * sqrt((t0 / 2)^2 - (x0 / v)^2).

    At x0 = 0 this gives v * t0 / 4, half of the two-way-time inversion
    used by `depth_from_apex`.
    """
    half_t = obs.t0 / 2.0
    lateral = obs.x0 / obs.v
    radicand = half_t ** 2 - lateral ** 2
    if radicand < 0.0:
        # Rounding residue of an exactly-zero radicand
        if radicand >= -1e-12 * half_t ** 2:
            radicand = 0.0
        else:
            raise DepthDomainError(
                f"Negative radicand {radicand:.6g}: x0/v = {lateral:.6g} ns exceeds t0/2 = {half_t:.6g} ns"
            )
    return (obs.v / 2.0) * math.sqrt(radicand)


def depth_from_apex(obs: ApexObservation) -> float:
    """Two-way travel-time inversion at the apex: d = v * t0 / 2."""
    return obs.v * obs.t0 / 2.0


def apex_from_box(box: Box3D, v: float) -> ApexObservation:
    """Apex of the pipeline centred in `box`: x0 at the x centre, t0 = 2 z_c / v."""
    cx, _, cz = box.center
    return ApexObservation(x0=float(cx), t0=max(2.0 * float(cz) / v, 1e-12), v=v)


# =============================================================================
# Matching
# =============================================================================

def suppress_duplicates(boxes: Sequence[ViewBox2D], iou_threshold: float
                        ) -> Tuple[List[ViewBox2D], List[ViewBox2D]]:
    """
    Greedy non-maximum suppression within one view.

    Higher confidence wins, ties by box id. A box is suppressed when its IoU
    with an already kept box exceeds `iou_threshold`.
    """
    order = sorted(boxes, key=lambda b: (-b.confidence, b.box_id))
    kept: List[ViewBox2D] = []
    suppressed: List[ViewBox2D] = []
    for box in order:
        if any(iou_2d(box.rect, k.rect) > iou_threshold for k in kept):
            suppressed.append(box)
        else:
            kept.append(box)
    return kept, suppressed


@dataclass(frozen=True)
class _Observed:
    box: ViewBox2D
    intervals: Dict[str, Interval]


def _prepare_view(boxes: Sequence[ViewBox2D], view: ViewKind, frame: ViewFrame,
                  cfg: MatchConfig, discarded: List[Tuple[str, str]]) -> List[_Observed]:
    confident = []
    for box in boxes:
        if box.view is not view:
            raise LabelConflictError(f"Box {box.box_id} labelled {box.label} was passed as a {view.value}-scan box")
        if box.confidence < cfg.confidence_threshold:
            discarded.append((box.box_id, "confidence"))
        else:
            confident.append(box)

    kept, suppressed = suppress_duplicates(confident, cfg.prediction_iou_threshold)
    discarded.extend((box.box_id, "duplicate") for box in suppressed)

    observed = []
    for box in sorted(kept, key=lambda b: b.box_id):
        rect = normalize_box(box, frame, cfg.clamp_tolerance_px)
        observed.append(_Observed(box, to_scene_meters(rect, view, frame)))
    return observed


def match_triples(
    b_boxes: Sequence[ViewBox2D],
    c_boxes: Sequence[ViewBox2D],
    d_boxes: Sequence[ViewBox2D],
    frames: Mapping[ViewKind, ViewFrame],
    cfg: Optional[MatchConfig] = None,
) -> MatchResult:
    """
    Match per-view boxes into pipeline detections.

    Steps: confidence filter, within-view duplicate suppression, enumeration
    of (1-B, n-C, n-D) candidates with equal C/D variants, lifting, pairwise
    3D-DIoU, qualification by the minimum score, then greedy acceptance by
    descending score sum (ties by box ids) without member reuse.
    """
    cfg = cfg or MatchConfig()
    result = MatchResult()

    seen = set()
    for box in (*b_boxes, *c_boxes, *d_boxes):
        if box.box_id in seen:
            raise LabelConflictError(f"Duplicate box id {box.box_id}; ids must be unique across views")
        seen.add(box.box_id)

    obs_b = _prepare_view(b_boxes, ViewKind.BSCAN, frames[ViewKind.BSCAN], cfg, result.discarded)
    obs_c = _prepare_view(c_boxes, ViewKind.CSCAN, frames[ViewKind.CSCAN], cfg, result.discarded)
    obs_d = _prepare_view(d_boxes, ViewKind.DSCAN, frames[ViewKind.DSCAN], cfg, result.discarded)

    candidates = []
    for ob in obs_b:
        for oc in obs_c:
            for od in obs_d:
                if oc.box.label.variant != od.box.label.variant:
                    continue
                ids = (ob.box.box_id, oc.box.box_id, od.box.box_id)
                lifted = lift_to_3d(ob.intervals, oc.intervals, od.intervals, ids)
                scores = pairwise_scores(lifted, cfg.pairs)
                if min(scores.values()) < cfg.matching_threshold:
                    continue
                total = sum(scores[p] for p in cfg.pairs)
                candidates.append((-total, ids, ob, oc, od, scores))

    logger.debug(f"{len(candidates)} qualifying candidate triples")
    candidates.sort(key=lambda cand: (cand[0], cand[1]))

    consumed = set()
    for _, ids, ob, oc, od, scores in candidates:
        if consumed.intersection(ids):
            continue
        consumed.update(ids)
        labels = (ob.box.label, oc.box.label, od.box.label)
        fused = fuse_intervals(ob.intervals, oc.intervals, od.intervals)
        depth = depth_from_apex(apex_from_box(fused, cfg.wave_velocity))
        result.detections.append(PipelineDetection(
            orientation=classify(labels),
            members=ids,
            labels=labels,
            scores=scores,
            fused=fused,
            depth_m=depth,
        ))

    result.unmatched = sorted(
        (o.box for o in (*obs_b, *obs_c, *obs_d) if o.box.box_id not in consumed),
        key=lambda b: (b.view.value, b.box_id),
    )
    result.discarded.sort()
    result.observed = {o.box.box_id: o.intervals for o in (*obs_b, *obs_c, *obs_d)}
    logger.info(
        f"Matched {len(result.detections)} pipelines; "
        f"{len(result.unmatched)} unmatched, {len(result.discarded)} discarded boxes"
    )
    return result
