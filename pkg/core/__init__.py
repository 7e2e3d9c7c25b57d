"""pipefuse: three-view GPR pipeline fusion."""
from .config import RunConfig
from .errors import ConfigError, DataError, PipefuseError, UsageError
from .geometry import Box3D, Rect2, diou_2d, diou_3d, iou_2d, iou_3d
from .view_fusion import (
    ClassLabel,
    MatchConfig,
    MatchResult,
    Orientation,
    PipelineDetection,
    ViewBox2D,
    ViewFrame,
    ViewKind,
    match_triples,
)
from .reporter import MatchReport, ReportGenerator, SceneReport

__all__ = [
    "RunConfig",
    "PipefuseError",
    "ConfigError",
    "UsageError",
    "DataError",
    "Box3D",
    "Rect2",
    "iou_2d",
    "diou_2d",
    "iou_3d",
    "diou_3d",
    "ClassLabel",
    "MatchConfig",
    "MatchResult",
    "Orientation",
    "PipelineDetection",
    "ViewBox2D",
    "ViewFrame",
    "ViewKind",
    "match_triples",
    "MatchReport",
    "SceneReport",
    "ReportGenerator",
]
