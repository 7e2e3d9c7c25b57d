"""
Synthetic pipeline scenes with exact ground truth.

Pipes are straight cylinders in the scene frame (x survey, y transverse,
z depth). A scene projects to one ground-truth box per view per pipe, renders
to point-target hyperbola B-scans, and perturbs into detector-like boxes.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ParameterError, PlacementError, UnsupportedGeometryError
from .geometry import Box3D, Rect2
from .signal_prep import Radargram
from .view_fusion import (
    ApexObservation,
    ClassLabel,
    Orientation,
    ViewBox2D,
    ViewFrame,
    ViewKind,
)

logger = logging.getLogger(__name__)

Point = Tuple[float, float, float]

DEFAULT_EXTENTS = (6.0, 2.0, 3.0)
DEFAULT_VELOCITY = 0.1  # m/ns
IMAGE_SIZE_PX = (1620, 760)
ANGLE_TOLERANCE_DEG = 1.0

# Random scene sampling ranges (m)
DIAMETER_RANGE = (0.4, 0.5)
RUN_LENGTH_RANGE = (1.0, 1.5)
LATERAL_SHIFT_RANGE = (0.2, 0.6)
DEPTH_SHIFT_RANGE = (0.15, 0.4)
COVER_DEPTH = 0.1
FOOTPRINT_GAP = 0.05
MAX_TRIES = 200
MAX_RESTARTS = 50

RICKER_FREQ_GHZ = 0.6
AMPLITUDE_FLOOR = 0.1


@dataclass(frozen=True)
class PipelineSpec:
    p0: Point
    p1: Point
    diameter: float
    family: Orientation

    def __post_init__(self):
        p0 = tuple(float(v) for v in self.p0)
        p1 = tuple(float(v) for v in self.p1)
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "family", Orientation(self.family))
        if self.diameter <= 0:
            raise ParameterError(f"Pipe diameter must be positive, got {self.diameter}")
        declared = classify_geometry(p0, p1)
        if declared is not self.family:
            raise ParameterError(f"Pipe {p0}->{p1} is {declared.value}, declared {self.family.value}")

    @property
    def radius(self) -> float:
        return 0.5 * self.diameter

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.p0) + np.asarray(self.p1))

    def bounding_box(self) -> Box3D:
        """AABB of the cylinder: endpoints widened by r * sqrt(1 - u_i^2) per axis."""
        p0, p1 = np.asarray(self.p0), np.asarray(self.p1)
        u = (p1 - p0) / np.linalg.norm(p1 - p0)
        half = self.radius * np.sqrt(np.clip(1.0 - u * u, 0.0, 1.0))
        return Box3D(tuple(np.minimum(p0, p1) - half), tuple(np.maximum(p0, p1) + half))


@dataclass(frozen=True)
class SceneSpec:
    extents: Tuple[float, float, float] = DEFAULT_EXTENTS
    velocity: float = DEFAULT_VELOCITY
    pipelines: Tuple[PipelineSpec, ...] = ()
    seed: int = 0
    scene_id: str = "scene_0000"

    def __post_init__(self):
        extents = tuple(float(v) for v in self.extents)
        object.__setattr__(self, "extents", extents)
        object.__setattr__(self, "pipelines", tuple(self.pipelines))
        if len(extents) != 3 or min(extents) <= 0:
            raise ParameterError(f"Scene extents must be three positive lengths, got {extents}")
        if self.velocity <= 0:
            raise ParameterError(f"Wave velocity must be positive, got {self.velocity}")
        for k, pipe in enumerate(self.pipelines):
            for p in (pipe.p0, pipe.p1):
                if any(c < -1e-9 or c > e + 1e-9 for c, e in zip(p, extents)):
                    raise ParameterError(f"{self.scene_id}: pipe {k} endpoint {p} outside extents {extents}")
        for i in range(len(self.pipelines)):
            for j in range(i + 1, len(self.pipelines)):
                a, b = self.pipelines[i], self.pipelines[j]
                dist = segment_distance(a.p0, a.p1, b.p0, b.p1)
                if dist <= a.radius + b.radius:
                    raise ParameterError(
                        f"{self.scene_id}: pipes {i} and {j} overlap "
                        f"(axis distance {dist:.3f} m <= {a.radius + b.radius:.3f} m)"
                    )

    @property
    def bounds(self) -> Box3D:
        return Box3D((0.0, 0.0, 0.0), self.extents)

    def frame(self) -> ViewFrame:
        return ViewFrame.for_extents(self.extents, *IMAGE_SIZE_PX)


@dataclass(frozen=True)
class PipelineTruth:
    index: int
    family: Orientation
    box: Box3D
    views: Dict[ViewKind, ViewBox2D]
    apex: ApexObservation

    @property
    def members(self) -> Tuple[str, str, str]:
        return tuple(self.views[v].box_id for v in ViewKind)


@dataclass(frozen=True)
class GroundTruth:
    scene_id: str
    frames: Dict[ViewKind, ViewFrame]
    pipelines: Tuple[PipelineTruth, ...] = field(default_factory=tuple)

    def boxes(self, view: ViewKind) -> List[ViewBox2D]:
        return [p.views[ViewKind(view)] for p in self.pipelines]


# =============================================================================
# Geometry
# =============================================================================

def segment_distance(p0: Point, p1: Point, q0: Point, q1: Point) -> float:
    """Minimum distance between segments p0-p1 and q0-q1."""
    p0, p1, q0, q1 = (np.asarray(v, dtype=np.float64) for v in (p0, p1, q0, q1))
    d1, d2, r = p1 - p0, q1 - q0, p0 - q0
    a, e, f = d1 @ d1, d2 @ d2, d2 @ r
    eps = 1e-15
    if a <= eps and e <= eps:
        return float(np.linalg.norm(r))
    if a <= eps:
        s, t = 0.0, float(np.clip(f / e, 0.0, 1.0))
    else:
        c = d1 @ r
        if e <= eps:
            s, t = float(np.clip(-c / a, 0.0, 1.0)), 0.0
        else:
            b = d1 @ d2
            denom = a * e - b * b
            s = float(np.clip((b * f - c * e) / denom, 0.0, 1.0)) if denom > eps else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                s, t = float(np.clip(-c / a, 0.0, 1.0)), 0.0
            elif t > 1.0:
                s, t = float(np.clip((b - c) / a, 0.0, 1.0)), 1.0
    return float(np.linalg.norm((p0 + d1 * s) - (q0 + d2 * t)))


def inclination_angles(p0: Point, p1: Point) -> Tuple[float, float]:
    """(horizontal, depth) inclination in degrees: asin of the x and z components of the unit axis."""
    d = np.asarray(p1, dtype=np.float64) - np.asarray(p0, dtype=np.float64)
    norm = float(np.linalg.norm(d))
    if norm == 0.0:
        raise ParameterError(f"Pipe endpoints coincide at {tuple(p0)}")
    u = np.abs(d) / norm
    return math.degrees(math.asin(min(u[0], 1.0))), math.degrees(math.asin(min(u[2], 1.0)))


def classify_geometry(p0: Point, p1: Point, tolerance_deg: float = ANGLE_TOLERANCE_DEG) -> Orientation:
    horizontal, depth = inclination_angles(p0, p1)
    if horizontal > tolerance_deg and depth > tolerance_deg:
        raise UnsupportedGeometryError(
            f"Pipe {tuple(p0)}->{tuple(p1)} is inclined both horizontally ({horizontal:.2f} deg) "
            f"and in depth ({depth:.2f} deg)"
        )
    if horizontal > tolerance_deg:
        return Orientation.HORIZONTAL_INCLINED
    if depth > tolerance_deg:
        return Orientation.DEEPLY_INCLINED
    return Orientation.VERTICAL


# Reference pipes on a 6 x 2 x 3 m model, 0.5 m diameter
_REFERENCE_ENDPOINTS = {
    Orientation.VERTICAL: ((3.0, 0.0, 1.3), (3.0, 2.0, 1.3)),
    Orientation.HORIZONTAL_INCLINED: ((2.7, 0.0, 1.3), (3.3, 2.0, 1.3)),
    Orientation.DEEPLY_INCLINED: ((3.0, 0.0, 1.1), (3.0, 2.0, 1.5)),
}


def reference_pipeline(family: Union[Orientation, str]) -> PipelineSpec:
    """Reference forward-model pipe of the given family."""
    family = Orientation(family)
    p0, p1 = _REFERENCE_ENDPOINTS[family]
    return PipelineSpec(p0, p1, 0.5, family)


def reference_scene(family: Union[Orientation, str], scene_id: str = "reference") -> SceneSpec:
    return SceneSpec(DEFAULT_EXTENTS, DEFAULT_VELOCITY, (reference_pipeline(family),), 0, scene_id)


# =============================================================================
# Scene generation
# =============================================================================

def _sample_pipe(rng: np.random.Generator, family: Orientation,
                 extents: Tuple[float, float, float]) -> PipelineSpec:
    lx, ly, lz = extents
    r = 0.5 * rng.uniform(*DIAMETER_RANGE)
    run_hi = min(RUN_LENGTH_RANGE[1], ly - 2 * r)
    if run_hi <= 0:
        raise PlacementError(f"y-span {ly} m cannot hold a pipe of radius {r:.2f} m")
    run = rng.uniform(min(RUN_LENGTH_RANGE[0], run_hi), run_hi)
    y0 = rng.uniform(r, ly - r - run)
    y1 = y0 + run

    dx = dz = 0.0
    if family is Orientation.HORIZONTAL_INCLINED:
        dx = rng.uniform(*LATERAL_SHIFT_RANGE) * rng.choice((-1.0, 1.0))
    elif family is Orientation.DEEPLY_INCLINED:
        dz = rng.uniform(*DEPTH_SHIFT_RANGE) * rng.choice((-1.0, 1.0))

    x_lo, x_hi = r + max(0.0, -dx), lx - r - max(0.0, dx)
    z_lo, z_hi = COVER_DEPTH + r + max(0.0, -dz), lz - r - max(0.0, dz)
    if x_lo >= x_hi or z_lo >= z_hi:
        raise PlacementError(f"Extents {extents} too small for a {family.value} pipe")
    x0 = rng.uniform(x_lo, x_hi)
    z0 = rng.uniform(z_lo, z_hi)
    return PipelineSpec((x0, y0, z0), (x0 + dx, y1, z0 + dz), 2 * r, family)


def _footprints_disjoint(a: Box3D, b: Box3D, gap: float) -> bool:
    for axis in (0, 2):
        if not (a.hi[axis] + gap <= b.lo[axis] or b.hi[axis] + gap <= a.lo[axis]):
            return False
    return True


def generate_scene(
    seed: int,
    n_pipes: int,
    extents: Sequence[float] = DEFAULT_EXTENTS,
    velocity: float = DEFAULT_VELOCITY,
    scene_id: Optional[str] = None,
) -> Tuple[SceneSpec, GroundTruth]:
    """
    Random scene of `n_pipes` pipes with exact ground truth.

    Families are drawn uniformly. Pipes get pairwise disjoint x and z
    footprints (with a small gap), so each view alone separates them.
    """
    if n_pipes < 0:
        raise ParameterError(f"n_pipes must be >= 0, got {n_pipes}")
    extents = tuple(float(v) for v in extents)
    if len(extents) != 3 or min(extents) <= 0:
        raise ParameterError(f"Scene extents must be three positive lengths, got {extents}")
    scene_id = scene_id or f"scene_{seed:04d}"
    rng = np.random.default_rng(seed)
    families = list(Orientation)

    for restart in range(MAX_RESTARTS):
        pipes: List[PipelineSpec] = []
        boxes: List[Box3D] = []
        for _ in range(n_pipes):
            for _ in range(MAX_TRIES):
                pipe = _sample_pipe(rng, families[int(rng.integers(len(families)))], extents)
                box = pipe.bounding_box()
                if all(_footprints_disjoint(box, other, FOOTPRINT_GAP) for other in boxes):
                    pipes.append(pipe)
                    boxes.append(box)
                    break
            else:
                break
        if len(pipes) == n_pipes:
            scene = SceneSpec(extents, velocity, tuple(pipes), seed, scene_id)
            logger.debug(f"{scene_id}: placed {n_pipes} pipes after {restart} restarts")
            return scene, project_views(scene)

    raise PlacementError(
        f"{scene_id}: could not place {n_pipes} pipes in {extents} after {MAX_RESTARTS} restarts"
    )


# =============================================================================
# Ground-truth projection
# =============================================================================

def _view_rect(box: Box3D, view: ViewKind, frame: ViewFrame) -> Rect2:
    h_axis, v_axis = view.axes
    h_lo, h_hi = box.interval("xyz".index(h_axis))
    v_lo, v_hi = box.interval("xyz".index(v_axis))
    sx = frame.width_px / frame.span(h_axis)
    sy = frame.height_px / frame.span(v_axis)
    return Rect2(
        frame.origin_x_px + h_lo * sx,
        frame.origin_y_px + v_lo * sy,
        frame.origin_x_px + h_hi * sx,
        frame.origin_y_px + v_hi * sy,
    )


def project_views(scene: SceneSpec) -> GroundTruth:
    """
    One labelled pixel box per view per pipe.

    Each view box is the projection of the pipe's axis-aligned bounding box,
    clipped to the scene, onto the view's two axes. Box ids are B000, C000,
    D000, ... in pipe order.
    """
    frame = scene.frame()
    pipelines = []
    for k, pipe in enumerate(scene.pipelines):
        box = pipe.bounding_box().clip(scene.bounds)
        views = {}
        for view in ViewKind:
            variant = 1 if view is ViewKind.BSCAN else pipe.family.variant
            views[view] = ViewBox2D(
                box_id=f"{view.value}{k:03d}",
                label=ClassLabel(view, variant),
                rect=_view_rect(box, view, frame),
                confidence=1.0,
            )
        mid = pipe.midpoint
        apex = ApexObservation(x0=float(mid[0]), t0=2.0 * float(mid[2]) / scene.velocity, v=scene.velocity)
        pipelines.append(PipelineTruth(k, pipe.family, box, views, apex))
    return GroundTruth(scene.scene_id, {view: frame for view in ViewKind}, tuple(pipelines))


def perturb_boxes(
    gt: GroundTruth,
    sigma_px: float,
    seed: Union[int, Sequence[int], np.random.Generator, None],
    floor_px: float = 0.0,
    views: Sequence[ViewKind] = tuple(ViewKind),
) -> Dict[ViewKind, List[ViewBox2D]]:
    """
    Detector-like copies of the ground-truth boxes.

    Every edge of a box in `views` moves by N(0, sigma_px^2 + floor_px^2)
    pixels, then is clamped to the frame; other views keep exact edges.
    Confidences are drawn from [0.6, 1.0).
    """
    if sigma_px < 0 or floor_px < 0:
        raise ParameterError(f"Jitter must be >= 0, got sigma {sigma_px}, floor {floor_px}")
    rng = np.random.default_rng(seed)
    scale = math.hypot(sigma_px, floor_px)
    jittered = {ViewKind(v) for v in views}
    out: Dict[ViewKind, List[ViewBox2D]] = {view: [] for view in ViewKind}

    for pipe in gt.pipelines:
        for view in ViewKind:
            box = pipe.views[view]
            frame = gt.frames[view]
            r = box.rect
            edges = np.array([r.min_x, r.min_y, r.max_x, r.max_y])
            noise = rng.normal(0.0, 1.0, size=4) * scale
            confidence = float(rng.uniform(0.6, 1.0))
            if view in jittered and scale > 0:
                edges = edges + noise
            xs = np.clip(np.sort(edges[[0, 2]]), frame.origin_x_px, frame.origin_x_px + frame.width_px)
            ys = np.clip(np.sort(edges[[1, 3]]), frame.origin_y_px, frame.origin_y_px + frame.height_px)
            out[view].append(ViewBox2D(box.box_id, box.label, Rect2(xs[0], ys[0], xs[1], ys[1]), confidence))
    return out


# =============================================================================
# Radargram rendering
# =============================================================================

def travel_time(x: Union[float, np.ndarray], x_c: float, d: float, v: float) -> Union[float, np.ndarray]:
    """Two-way time (ns) from surface position x to a point target at (x_c, d)."""
    return (2.0 / v) * np.sqrt(d * d + (np.asarray(x) - x_c) ** 2)


def ricker(tau_ns: np.ndarray, freq_ghz: float = RICKER_FREQ_GHZ) -> np.ndarray:
    arg = (np.pi * freq_ghz * tau_ns) ** 2
    return (1.0 - 2.0 * arg) * np.exp(-arg)


def _stamp_hyperbola(data: np.ndarray, xs: np.ndarray, times: np.ndarray, x_c: float, d: float,
                     v: float, freq_ghz: float, floor: float) -> None:
    t = travel_time(xs, x_c, d, v)
    amplitude = (2.0 * d / v) / t
    visible = amplitude >= floor
    if not np.any(visible):
        return
    tau = times[None, :] - t[visible, None]
    data[visible] += amplitude[visible, None] * ricker(tau, freq_ghz)


def _station_point(pipe: PipelineSpec, y: float) -> Optional[np.ndarray]:
    p0, p1 = np.asarray(pipe.p0), np.asarray(pipe.p1)
    y_lo, y_hi = sorted((p0[1], p1[1]))
    if not y_lo <= y <= y_hi:
        return None
    if p1[1] == p0[1]:
        return pipe.midpoint
    return p0 + (y - p0[1]) / (p1[1] - p0[1]) * (p1 - p0)


def render_bscan(
    scene: SceneSpec,
    y_station: Optional[float] = None,
    spacing_m: float = 0.05,
    dt_ns: float = 0.1,
    window_ns: float = 60.0,
    freq_ghz: float = RICKER_FREQ_GHZ,
    floor: float = AMPLITUDE_FLOOR,
) -> Radargram:
    """
    Point-target hyperbolas of every pipe crossing the station y_station.

    Traces sit at x = i * spacing across the scene; amplitude decays as
    t0 / t and traces under `floor` times the apex amplitude are skipped.
    """
    if spacing_m <= 0 or dt_ns <= 0 or window_ns <= 0:
        raise ParameterError(f"Render grid must be positive, got {spacing_m} m, {dt_ns} ns, {window_ns} ns")
    lx, ly, _ = scene.extents
    y = 0.5 * ly if y_station is None else float(y_station)
    if not 0.0 <= y <= ly:
        raise ParameterError(f"Station y = {y} m outside scene y-span {ly} m")

    xs = np.arange(int(round(lx / spacing_m)) + 1) * spacing_m
    times = np.arange(int(round(window_ns / dt_ns))) * dt_ns
    data = np.zeros((xs.size, times.size))
    for pipe in scene.pipelines:
        point = _station_point(pipe, y)
        if point is not None:
            _stamp_hyperbola(data, xs, times, float(point[0]), float(point[2]), scene.velocity, freq_ghz, floor)
    return Radargram(data, spacing_m, dt_ns)


def read_apex(r: Radargram, v: float = DEFAULT_VELOCITY) -> ApexObservation:
    """
    Apex of the strongest hyperbola: the earliest sub-sample peak time among
    traces reaching half the global peak amplitude.
    """
    mag = np.abs(r.data)
    peak = float(mag.max())
    if peak == 0.0:
        raise ParameterError("Radargram is empty; no apex to read")
    best_t, best_i = math.inf, 0
    for i in np.flatnonzero(mag.max(axis=1) >= 0.5 * peak):
        j = int(np.argmax(mag[i]))
        offset = 0.0
        if 0 < j < r.n_samples - 1:
            y0, y1, y2 = mag[i, j - 1], mag[i, j], mag[i, j + 1]
            denom = y0 - 2.0 * y1 + y2
            if denom != 0.0:
                offset = 0.5 * (y0 - y2) / denom
        t = (j + offset) * r.dt_ns
        if t < best_t:
            best_t, best_i = t, int(i)
    return ApexObservation(x0=best_i * r.trace_spacing_m, t0=max(best_t, 1e-12), v=v)


# =============================================================================
# Preprocessing corpus
# =============================================================================

FIELD_ATTENUATION = 0.05  # 1/ns


def field_radargram(
    seed: int,
    n_traces: int = 121,
    spacing_m: float = 0.05,
    dt_ns: float = 0.1,
    window_ns: float = 60.0,
    beta: float = FIELD_ATTENUATION,
    clutter_sigma: float = 0.1,
    v: float = DEFAULT_VELOCITY,
) -> Radargram:
    """
    Field-like raw B-scan for preprocessing studies.

    1-3 point-target hyperbolas plus Gaussian clutter and a trace-invariant
    direct wave and surface reflection, all attenuated by exp(-beta t).
    On top sit 3 GHz interference bursts confined to blocks of traces.
    """
    rng = np.random.default_rng(seed)
    xs = np.arange(n_traces) * spacing_m
    times = np.arange(int(round(window_ns / dt_ns))) * dt_ns
    data = np.zeros((n_traces, times.size))

    lx = xs[-1] if n_traces > 1 else 1.0
    for _ in range(int(rng.integers(1, 4))):
        x_c = rng.uniform(0.15 * lx, 0.85 * lx)
        d = rng.uniform(0.4, 2.5)
        _stamp_hyperbola(data, xs, times, x_c, d, v, RICKER_FREQ_GHZ, AMPLITUDE_FLOOR)
    data += rng.normal(0.0, clutter_sigma, size=data.shape)

    direct = 40.0 * ricker(times - 1.5) + 15.0 * ricker(times - 3.0)
    data += direct[None, :]
    data *= np.exp(-beta * times)[None, :]

    for _ in range(3):
        center = rng.uniform(10.0, 50.0)
        width = int(rng.integers(10, 31))
        first = int(rng.integers(0, max(n_traces - width, 0) + 1))
        burst = 5.0 * np.exp(-0.5 * (times - center) ** 2) * np.sin(2.0 * np.pi * 3.0 * (times - center))
        data[first:first + width] += burst[None, :]

    return Radargram(data, spacing_m, dt_ns)
