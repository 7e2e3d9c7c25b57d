"""
On-disk formats.

    scene file        JSON: extents, velocity, seed, pipelines
    detections file   JSON: scene id, per-view frames, boxes
    ground truth      detections file plus per-pipe members, 3D box and apex
    YOLO directory    <scene>_B.txt / _C.txt / _D.txt lines "cls cx cy w h [conf]"
                      normalized to the image, a classes.txt label map and an
                      optional frames.json of per-scene view frames
    radargram         raw little-endian float32, trace-major, with a JSON sidecar

All JSON is written with sorted keys, two-space indent and a trailing newline.
"""
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import DataError, FormatError, PipefuseError
from .geometry import Box3D, Rect2
from .scene_synth import GroundTruth, PipelineSpec, PipelineTruth, SceneSpec
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

PathLike = Union[str, Path]

# Default class order of classes.txt
YOLO_CLASSES = ("1-B", "1-C", "1-D", "2-C", "2-D", "3-C", "3-D")

# Per-scene view frames written next to YOLO labels
YOLO_FRAMES_FILE = "frames.json"


@dataclass
class DetectionSet:
    """Boxes of one scene, grouped by view, with the frames they live in."""
    scene_id: str
    frames: Dict[ViewKind, ViewFrame]
    boxes: Dict[ViewKind, List[ViewBox2D]] = field(default_factory=lambda: {v: [] for v in ViewKind})

    def all_boxes(self) -> List[ViewBox2D]:
        return [b for view in ViewKind for b in self.boxes.get(view, [])]


# =============================================================================
# JSON plumbing
# =============================================================================

def dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_json(path: PathLike, obj: Any) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(dumps(obj), encoding="utf-8")
    except OSError as e:
        raise DataError(f"Cannot write {path}: {e.strerror}") from e
    return path


def read_json(path: PathLike) -> Any:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise FormatError(f"cannot read file: {e.strerror}", path) from e
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid JSON: {e.msg}", path, e.lineno) from e


def _require(data: Dict[str, Any], key: str, path: PathLike) -> Any:
    if not isinstance(data, dict) or key not in data:
        raise FormatError(f"missing field {key!r}", path)
    return data[key]


# =============================================================================
# Frames and boxes
# =============================================================================

def frame_to_dict(frame: ViewFrame) -> Dict[str, float]:
    return {k: float(v) for k, v in asdict(frame).items()}


def frame_from_dict(data: Dict[str, Any], path: PathLike = None) -> ViewFrame:
    if not isinstance(data, dict):
        raise FormatError(f"frame must be an object, got {type(data).__name__}", path)
    try:
        return ViewFrame(**{k: float(v) for k, v in data.items()})
    except (TypeError, ValueError) as e:
        raise FormatError(f"invalid frame: {e}", path) from e


def box_to_dict(box: ViewBox2D) -> Dict[str, Any]:
    r = box.rect
    return {
        "id": box.box_id,
        "view": box.view.value,
        "variant": box.label.variant,
        "rect_px": [float(r.min_x), float(r.min_y), float(r.max_x), float(r.max_y)],
        "confidence": float(box.confidence),
    }


def box_from_dict(data: Dict[str, Any], path: PathLike = None) -> ViewBox2D:
    try:
        label = ClassLabel(ViewKind(data["view"]), int(data["variant"]))
        x0, y0, x1, y1 = (float(v) for v in data["rect_px"])
        return ViewBox2D(str(data["id"]), label, Rect2(x0, y0, x1, y1), float(data.get("confidence", 1.0)))
    except KeyError as e:
        raise FormatError(f"box missing field {e.args[0]!r}", path) from e
    except PipefuseError as e:
        raise FormatError(f"box {data.get('id', '?')}: {e}", path) from e
    except (TypeError, ValueError) as e:
        raise FormatError(f"box {data.get('id', '?')}: {e}", path) from e


def detections_to_dict(dets: DetectionSet) -> Dict[str, Any]:
    return {
        "scene_id": dets.scene_id,
        "frames": {v.value: frame_to_dict(f) for v, f in sorted(dets.frames.items(), key=lambda kv: kv[0].value)},
        "boxes": [box_to_dict(b) for b in dets.all_boxes()],
    }


def detections_from_dict(data: Dict[str, Any], path: PathLike = None) -> DetectionSet:
    scene_id = str(_require(data, "scene_id", path))
    raw_frames = _require(data, "frames", path)
    frames = {}
    for view in ViewKind:
        if view.value not in raw_frames:
            raise FormatError(f"scene {scene_id}: no frame for the {view.value}-scan view", path)
        frames[view] = frame_from_dict(raw_frames[view.value], path)
    boxes: Dict[ViewKind, List[ViewBox2D]] = {v: [] for v in ViewKind}
    seen = set()
    for raw in _require(data, "boxes", path):
        box = box_from_dict(raw, path)
        if box.box_id in seen:
            raise FormatError(f"scene {scene_id}: duplicate box id {box.box_id}", path)
        seen.add(box.box_id)
        boxes[box.view].append(box)
    return DetectionSet(scene_id, frames, boxes)


def write_detections(path: PathLike, dets: DetectionSet) -> Path:
    return write_json(path, detections_to_dict(dets))


def read_detections(path: PathLike) -> DetectionSet:
    return detections_from_dict(read_json(path), path)


# =============================================================================
# Scenes and ground truth
# =============================================================================

def scene_to_dict(scene: SceneSpec) -> Dict[str, Any]:
    return {
        "scene_id": scene.scene_id,
        "seed": int(scene.seed),
        "extents": [float(v) for v in scene.extents],
        "velocity": float(scene.velocity),
        "pipelines": [
            {
                "p0": [float(v) for v in p.p0],
                "p1": [float(v) for v in p.p1],
                "diameter": float(p.diameter),
                "family": p.family.value,
            }
            for p in scene.pipelines
        ],
    }


def scene_from_dict(data: Dict[str, Any], path: PathLike = None) -> SceneSpec:
    try:
        pipes = tuple(
            PipelineSpec(tuple(p["p0"]), tuple(p["p1"]), float(p["diameter"]), Orientation(p["family"]))
            for p in _require(data, "pipelines", path)
        )
        return SceneSpec(
            extents=tuple(_require(data, "extents", path)),
            velocity=float(_require(data, "velocity", path)),
            pipelines=pipes,
            seed=int(data.get("seed", 0)),
            scene_id=str(_require(data, "scene_id", path)),
        )
    except KeyError as e:
        raise FormatError(f"pipeline missing field {e.args[0]!r}", path) from e
    except FormatError:
        raise
    except (PipefuseError, TypeError, ValueError) as e:
        raise FormatError(f"invalid scene: {e}", path) from e


def write_scene(path: PathLike, scene: SceneSpec) -> Path:
    return write_json(path, scene_to_dict(scene))


def read_scene(path: PathLike) -> SceneSpec:
    return scene_from_dict(read_json(path), path)


def truth_to_detections(gt: GroundTruth) -> DetectionSet:
    return DetectionSet(gt.scene_id, dict(gt.frames), {v: gt.boxes(v) for v in ViewKind})


def truth_to_dict(gt: GroundTruth) -> Dict[str, Any]:
    data = detections_to_dict(truth_to_detections(gt))
    data["pipelines"] = [
        {
            "index": p.index,
            "orientation": p.family.value,
            "members": list(p.members),
            "box3d": {"lo": list(p.box.lo), "hi": list(p.box.hi)},
            "apex": {"x0": p.apex.x0, "t0": p.apex.t0, "v": p.apex.v},
        }
        for p in gt.pipelines
    ]
    return data


def truth_from_dict(data: Dict[str, Any], path: PathLike = None) -> GroundTruth:
    dets = detections_from_dict(data, path)
    by_id = {b.box_id: b for b in dets.all_boxes()}
    pipelines = []
    for raw in _require(data, "pipelines", path):
        try:
            members = [by_id[m] for m in raw["members"]]
            views = {box.view: box for box in members}
            if set(views) != set(ViewKind):
                raise FormatError(f"pipeline {raw['index']} members {raw['members']} are not one per view", path)
            pipelines.append(PipelineTruth(
                index=int(raw["index"]),
                family=Orientation(raw["orientation"]),
                box=Box3D(tuple(raw["box3d"]["lo"]), tuple(raw["box3d"]["hi"])),
                views=views,
                apex=ApexObservation(**raw["apex"]),
            ))
        except KeyError as e:
            raise FormatError(f"pipeline entry references unknown key or box {e.args[0]!r}", path) from e
        except FormatError:
            raise
        except (PipefuseError, TypeError, ValueError) as e:
            raise FormatError(f"invalid pipeline entry: {e}", path) from e
    return GroundTruth(dets.scene_id, dets.frames, tuple(pipelines))


def write_truth(path: PathLike, gt: GroundTruth) -> Path:
    return write_json(path, truth_to_dict(gt))


def read_truth(path: PathLike) -> GroundTruth:
    return truth_from_dict(read_json(path), path)


# =============================================================================
# YOLO text annotations
# =============================================================================

def write_class_map(path: PathLike, classes: Sequence[str] = YOLO_CLASSES) -> Path:
    path = Path(path)
    path.write_text("".join(f"{c}\n" for c in classes), encoding="utf-8")
    return path


def read_class_map(path: PathLike) -> List[ClassLabel]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise FormatError(f"cannot read class map: {e.strerror}", path) from e
    labels = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            labels.append(ClassLabel.parse(line))
        except PipefuseError as e:
            raise FormatError(str(e), path, lineno) from e
    if not labels:
        raise FormatError("class map is empty", path)
    return labels


def write_yolo(path: PathLike, boxes: Sequence[ViewBox2D], image_size: Tuple[float, float],
               classes: Sequence[str] = YOLO_CLASSES) -> Path:
    """One line per box, normalized to the image size, with its confidence appended."""
    width, height = image_size
    index = {label: i for i, label in enumerate(classes)}
    lines = []
    for box in boxes:
        r = box.rect
        cx, cy = r.center
        values = (cx / width, cy / height, r.width / width, r.height / height, box.confidence)
        lines.append(f"{index[str(box.label)]} " + " ".join(f"{float(v):.17g}" for v in values))
    path = Path(path)
    path.write_text("".join(f"{line}\n" for line in lines), encoding="utf-8")
    return path


def read_yolo(path: PathLike, view: ViewKind, classes: Sequence[ClassLabel],
              image_size: Tuple[float, float]) -> List[ViewBox2D]:
    """Parse one view's YOLO file; box ids are <view><line order>, e.g. C002."""
    path = Path(path)
    width, height = image_size
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise FormatError(f"cannot read annotations: {e.strerror}", path) from e

    boxes = []
    for lineno, line in enumerate(lines, start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) not in (5, 6):
            raise FormatError(f"expected 'cls cx cy w h [conf]', got {len(parts)} fields", path, lineno)
        try:
            cls = int(parts[0])
            cx, cy, w, h = (float(v) for v in parts[1:5])
            conf = float(parts[5]) if len(parts) == 6 else 1.0
        except ValueError as e:
            raise FormatError(f"non-numeric field: {e}", path, lineno) from e
        if not 0 <= cls < len(classes):
            raise FormatError(f"class index {cls} not in class map of {len(classes)} entries", path, lineno)
        label = classes[cls]
        if label.view is not view:
            raise FormatError(f"class {label} found in {view.value}-scan file", path, lineno)
        if w < 0 or h < 0:
            raise FormatError(f"negative box size {w} x {h}", path, lineno)
        rect = Rect2((cx - w / 2) * width, (cy - h / 2) * height, (cx + w / 2) * width, (cy + h / 2) * height)
        try:
            boxes.append(ViewBox2D(f"{view.value}{len(boxes):03d}", label, rect, conf))
        except PipefuseError as e:
            raise FormatError(str(e), path, lineno) from e
    return boxes


def yolo_paths(directory: PathLike, scene_id: str) -> Dict[ViewKind, Path]:
    directory = Path(directory)
    return {view: directory / f"{scene_id}_{view.value}.txt" for view in ViewKind}


def write_yolo_scene(directory: PathLike, dets: DetectionSet, image_size: Tuple[float, float]) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for view, path in yolo_paths(directory, dets.scene_id).items():
        write_yolo(path, dets.boxes.get(view, []), image_size)


def read_yolo_scene(directory: PathLike, scene_id: str, classes: Sequence[ClassLabel],
                    frames: Dict[ViewKind, ViewFrame], image_size: Tuple[float, float]) -> DetectionSet:
    boxes = {}
    for view, path in yolo_paths(directory, scene_id).items():
        if not path.exists():
            raise DataError(f"Scene {scene_id}: missing {view.value}-scan file {path}")
        boxes[view] = read_yolo(path, view, classes, image_size)
    return DetectionSet(scene_id, dict(frames), boxes)


def write_yolo_frames(directory: PathLike, frames_by_scene: Mapping[str, Mapping[ViewKind, ViewFrame]]) -> Path:
    """Frames of every scene in a YOLO directory, keyed by scene id then view."""
    return write_json(Path(directory) / YOLO_FRAMES_FILE, {
        scene_id: {v.value: frame_to_dict(f) for v, f in frames.items()}
        for scene_id, frames in frames_by_scene.items()
    })


def read_yolo_frames(directory: PathLike) -> Optional[Dict[str, Dict[ViewKind, ViewFrame]]]:
    """Per-scene frames of a YOLO directory, or None when it has no frames file."""
    path = Path(directory) / YOLO_FRAMES_FILE
    if not path.exists():
        return None
    data = read_json(path)
    if not isinstance(data, dict):
        raise FormatError(f"expected an object keyed by scene id, got {type(data).__name__}", path)
    result = {}
    for scene_id, raw in data.items():
        if not isinstance(raw, dict):
            raise FormatError(f"scene {scene_id}: frames must be an object keyed by B, C, D", path)
        frames = {}
        for view in ViewKind:
            if view.value not in raw:
                raise FormatError(f"scene {scene_id}: no frame for the {view.value}-scan view", path)
            frames[view] = frame_from_dict(raw[view.value], path)
        result[scene_id] = frames
    return result


def yolo_scene_ids(directory: PathLike) -> List[str]:
    """Scene ids with at least one view file in `directory`."""
    ids = set()
    for view in ViewKind:
        suffix = f"_{view.value}.txt"
        ids.update(p.name[:-len(suffix)] for p in Path(directory).glob(f"*{suffix}"))
    return sorted(ids)


# =============================================================================
# Radargrams
# =============================================================================

def radargram_paths(path: PathLike) -> Tuple[Path, Path]:
    """
    (raw data path, sidecar path) for a radargram stem, .f32 or .json path.

    Suffixes are appended to the stem, so dots inside it are kept:
    `line.processed` maps to `line.processed.f32` and `line.processed.json`.
    """
    path = Path(path)
    stem = path.with_suffix("") if path.suffix in (".f32", ".json") else path
    return stem.with_name(f"{stem.name}.f32"), stem.with_name(f"{stem.name}.json")


def write_radargram(path: PathLike, r: Radargram) -> Tuple[Path, Path]:
    raw_path, meta_path = radargram_paths(path)
    try:
        raw_path.parent.mkdir(parents=True, exist_ok=True)
        raw_path.write_bytes(np.ascontiguousarray(r.data, dtype="<f4").tobytes())
    except OSError as e:
        raise DataError(f"Cannot write {raw_path}: {e.strerror}") from e
    write_json(meta_path, {
        "n_traces": r.n_traces,
        "n_samples": r.n_samples,
        "trace_spacing_m": float(r.trace_spacing_m),
        "dt_ns": float(r.dt_ns),
        "dtype": "<f4",
    })
    return raw_path, meta_path


def read_radargram(path: PathLike) -> Radargram:
    raw_path, meta_path = radargram_paths(path)
    meta = read_json(meta_path)
    try:
        n_traces, n_samples = int(meta["n_traces"]), int(meta["n_samples"])
        spacing, dt = float(meta["trace_spacing_m"]), float(meta["dt_ns"])
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"invalid radargram header: {e}", meta_path) from e
    try:
        raw = raw_path.read_bytes()
    except OSError as e:
        raise FormatError(f"cannot read radargram data: {e.strerror}", raw_path) from e
    expected = n_traces * n_samples * 4
    if len(raw) != expected:
        raise FormatError(f"expected {expected} bytes for {n_traces} x {n_samples} float32, got {len(raw)}", raw_path)
    data = np.frombuffer(raw, dtype="<f4").reshape(n_traces, n_samples).astype(np.float64)
    try:
        return Radargram(data, spacing, dt)
    except PipefuseError as e:
        raise FormatError(str(e), raw_path) from e
