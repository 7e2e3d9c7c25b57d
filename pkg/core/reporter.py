"""
Match report model and emitters.

A MatchReport holds one SceneReport per scene plus the configuration used.
ReportGenerator writes it as JSON (machine-readable), HTML (summary page)
and an optional SVG histogram of the pairwise 3D-DIoU scores. Nothing
time-dependent is written, so identical runs give identical files.
"""
import html
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .errors import FormatError
from .formats import read_json, write_json
from .view_fusion import ALL_PAIRS, MatchResult, Orientation

logger = logging.getLogger(__name__)

HIST_BINS = 20
HIST_RANGE = (-1.0, 1.0)


def histogram(values: List[float], bins: int = HIST_BINS,
              value_range: Tuple[float, float] = HIST_RANGE) -> Dict[str, List[float]]:
    """Histogram as {"edges": [...], "counts": [...]}; the last bin is closed."""
    counts, edges = np.histogram(np.asarray(values, dtype=np.float64), bins=bins, range=value_range)
    return {"edges": [float(e) for e in edges], "counts": [int(c) for c in counts]}


@dataclass
class DetectionRecord:
    """Serializable view of a PipelineDetection."""
    orientation: str
    members: List[str]
    labels: List[str]
    scores: Dict[str, float]
    fused_lo: List[float]
    fused_hi: List[float]
    depth_m: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "orientation": self.orientation,
            "members": list(self.members),
            "labels": list(self.labels),
            "scores": {k: float(v) for k, v in self.scores.items()},
            "fused_box": {"lo": list(self.fused_lo), "hi": list(self.fused_hi)},
            "depth_m": float(self.depth_m),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DetectionRecord":
        return cls(
            orientation=data["orientation"],
            members=list(data["members"]),
            labels=list(data["labels"]),
            scores={k: float(v) for k, v in data["scores"].items()},
            fused_lo=[float(v) for v in data["fused_box"]["lo"]],
            fused_hi=[float(v) for v in data["fused_box"]["hi"]],
            depth_m=float(data["depth_m"]),
        )


@dataclass
class SceneReport:
    """Match outcome of one scene."""
    scene_id: str
    detections: List[DetectionRecord] = field(default_factory=list)
    unmatched: List[str] = field(default_factory=list)
    discarded: List[Tuple[str, str]] = field(default_factory=list)
    # box id -> {"x": [lo, hi], ...} in scene meters, for boxes that survived filtering
    boxes: Dict[str, Dict[str, List[float]]] = field(default_factory=dict)

    @classmethod
    def from_result(cls, scene_id: str, result: MatchResult) -> "SceneReport":
        detections = [
            DetectionRecord(
                orientation=d.orientation.value,
                members=list(d.members),
                labels=[str(label) for label in d.labels],
                scores=dict(d.scores),
                fused_lo=list(d.fused.lo),
                fused_hi=list(d.fused.hi),
                depth_m=d.depth_m,
            )
            for d in result.detections
        ]
        return cls(
            scene_id=scene_id,
            detections=detections,
            unmatched=[b.box_id for b in result.unmatched],
            discarded=list(result.discarded),
            boxes={
                box_id: {axis: [float(lo), float(hi)] for axis, (lo, hi) in sorted(iv.items())}
                for box_id, iv in sorted(result.observed.items())
            },
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scene_id": self.scene_id,
            "detections": [d.to_dict() for d in self.detections],
            "unmatched": list(self.unmatched),
            "discarded": [{"id": box_id, "reason": reason} for box_id, reason in self.discarded],
            "boxes": self.boxes,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SceneReport":
        return cls(
            scene_id=data["scene_id"],
            detections=[DetectionRecord.from_dict(d) for d in data["detections"]],
            unmatched=list(data["unmatched"]),
            discarded=[(d["id"], d["reason"]) for d in data["discarded"]],
            boxes={k: {a: [float(v) for v in iv] for a, iv in axes.items()} for k, axes in data["boxes"].items()},
        )


@dataclass
class MatchReport:
    """Report over a batch of scenes."""
    title: str = "Pipefuse Match Report"
    config: Dict[str, Any] = field(default_factory=dict)
    scenes: List[SceneReport] = field(default_factory=list)

    @property
    def total_scenes(self) -> int:
        return len(self.scenes)

    @property
    def total_detections(self) -> int:
        return sum(len(s.detections) for s in self.scenes)

    @property
    def total_unmatched(self) -> int:
        return sum(len(s.unmatched) for s in self.scenes)

    @property
    def total_discarded(self) -> int:
        return sum(len(s.discarded) for s in self.scenes)

    def orientation_counts(self) -> Dict[str, int]:
        counts = {o.value: 0 for o in Orientation}
        for scene in self.scenes:
            for d in scene.detections:
                counts[d.orientation] += 1
        return counts

    def pair_scores(self) -> Dict[str, List[float]]:
        """Pairwise scores of accepted detections, by pair type."""
        scores: Dict[str, List[float]] = {pair: [] for pair in ALL_PAIRS}
        for scene in self.scenes:
            for d in scene.detections:
                for pair, value in d.scores.items():
                    scores[pair].append(value)
        return scores

    def histograms(self) -> Dict[str, Dict[str, List[float]]]:
        return {pair: histogram(values) for pair, values in self.pair_scores().items()}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "title": self.title,
            "config": self.config,
            "summary": {
                "scenes": self.total_scenes,
                "detections": self.total_detections,
                "unmatched": self.total_unmatched,
                "discarded": self.total_discarded,
                "orientations": self.orientation_counts(),
            },
            "histograms": self.histograms(),
            "scenes": [s.to_dict() for s in sorted(self.scenes, key=lambda s: s.scene_id)],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], path=None) -> "MatchReport":
        try:
            return cls(
                title=data["title"],
                config=data["config"],
                scenes=[SceneReport.from_dict(s) for s in data["scenes"]],
            )
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"invalid match report: {e}", path) from e


class ReportGenerator:
    """Writes match reports as JSON, HTML and SVG."""

    def __init__(self, output_dir: str = "out"):
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def generate_html(self, report: MatchReport) -> str:
        """Generate the HTML summary page in markdown-like style."""
        scenes_html = ""
        for scene in sorted(report.scenes, key=lambda s: s.scene_id):
            scene_icon = "🟢" if scene.detections and not scene.unmatched else "🟡"
            scenes_html += f'''
            <div class="scene">
                <h3>{scene_icon} {html.escape(scene.scene_id)}</h3>
                <ul>
            '''
            for d in scene.detections:
                scores = ", ".join(f"{pair} {value:.3f}" for pair, value in sorted(d.scores.items()))
                scenes_html += f'''
                    <li class="detection">
                        <code>{" / ".join(html.escape(m) for m in d.members)}</code>
                        {d.orientation} <span class="depth">(depth {d.depth_m:.3f} m)</span>
                        <div class="scores">{scores}</div>
                    </li>
                '''
            if scene.unmatched:
                unmatched = ", ".join(html.escape(b) for b in scene.unmatched)
                scenes_html += f'<li class="unmatched"><strong>Unmatched:</strong> {unmatched}</li>'
            if scene.discarded:
                discarded = ", ".join(f"{html.escape(b)} ({reason})" for b, reason in scene.discarded)
                scenes_html += f'<li class="unmatched"><strong>Discarded:</strong> {discarded}</li>'
            scenes_html += '''
                </ul>
            </div>
            '''

        counts = report.orientation_counts()
        cfg = report.config
        return f'''<!DOCTYPE html>
<html lang="en">
<head>
    <meta charset="UTF-8">
    <meta name="viewport" content="width=device-width, initial-scale=1.0">
    <title>{html.escape(report.title)}</title>
    <style>
        body {{
            font-family: -apple-system, BlinkMacSystemFont, 'Segoe UI', Helvetica, Arial, sans-serif;
            max-width: 900px;
            margin: 0 auto;
            padding: 40px 20px;
            color: #24292e;
            line-height: 1.6;
            background: #fff;
        }}
        h1, h2 {{
            border-bottom: 1px solid #eaecef;
            padding-bottom: 8px;
        }}
        table {{
            border-collapse: collapse;
            width: 100%;
            margin: 16px 0;
        }}
        th, td {{
            border: 1px solid #dfe2e5;
            padding: 8px 12px;
            text-align: left;
        }}
        th {{
            background: #f6f8fa;
            font-weight: 600;
        }}
        code {{
            background: #f6f8fa;
            padding: 2px 6px;
            border-radius: 3px;
            font-size: 0.9em;
        }}
        .depth, .scores {{
            color: #6a737d;
            font-size: 0.85em;
        }}
        .detection {{
            margin: 8px 0;
            padding: 8px;
            border: 1px solid #e1e4e8;
            border-left: 4px solid #28a745;
            border-radius: 6px;
            list-style: none;
        }}
        .unmatched {{
            color: #b08800;
            list-style: none;
        }}
        .footer {{
            color: #6a737d;
            font-size: 0.85em;
            margin-top: 40px;
            padding-top: 16px;
            border-top: 1px solid #eaecef;
        }}
    </style>
</head>
<body>
    <h1>{html.escape(report.title)}</h1>

    <h2>Summary</h2>
    <table>
        <tr>
            <th>Confidence</th>
            <th>Prediction IoU</th>
            <th>Matching 3D-DIoU</th>
            <th>Pairs</th>
        </tr>
        <tr>
            <td>{cfg.get("confidence_threshold", "")}</td>
            <td>{cfg.get("prediction_iou_threshold", "")}</td>
            <td>{cfg.get("matching_threshold", "")}</td>
            <td>{cfg.get("pairwise_mode", "")}</td>
        </tr>
    </table>

    <table>
        <tr>
            <th>Scenes</th>
            <th>Detections</th>
            <th>Vertical</th>
            <th>Horizontal inclined</th>
            <th>Deeply inclined</th>
            <th>Unmatched boxes</th>
        </tr>
        <tr>
            <td>{report.total_scenes}</td>
            <td>🟢 {report.total_detections}</td>
            <td>{counts[Orientation.VERTICAL.value]}</td>
            <td>{counts[Orientation.HORIZONTAL_INCLINED.value]}</td>
            <td>{counts[Orientation.DEEPLY_INCLINED.value]}</td>
            <td>{"🟡 " + str(report.total_unmatched) if report.total_unmatched > 0 else "0"}</td>
        </tr>
    </table>

    <h2>Scenes</h2>
    {scenes_html}

    <div class="footer">
        Generated by pipefuse
    </div>
</body>
</html>'''

    def generate_svg(self, report: MatchReport) -> str:
        """Histogram of pairwise 3D-DIoU scores per pair type."""
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt

        matplotlib.rcParams["svg.hashsalt"] = "pipefuse"
        fig, ax = plt.subplots(figsize=(6.4, 3.6))
        scores = report.pair_scores()
        edges = np.linspace(HIST_RANGE[0], HIST_RANGE[1], HIST_BINS + 1)
        for pair in ALL_PAIRS:
            if scores[pair]:
                ax.hist(scores[pair], bins=edges, histtype="step", label=pair)
        threshold = report.config.get("matching_threshold")
        if threshold is not None:
            ax.axvline(threshold, color="#cb2431", linestyle="--", linewidth=1)
        ax.set_xlabel("3D-DIoU")
        ax.set_ylabel("Accepted triples")
        if any(scores.values()):
            ax.legend(loc="upper left")
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
        return buf.getvalue()

    def save_report(self, report: MatchReport, filename: Optional[str] = None) -> str:
        """Save report to HTML file and return the path."""
        filepath = self.output_dir / (filename or "report.html")
        filepath.write_text(self.generate_html(report), encoding="utf-8")
        return str(filepath)

    def save_json(self, report: MatchReport, filename: str = "report.json") -> str:
        return str(write_json(self.output_dir / filename, report.to_dict()))

    def save_histogram(self, report: MatchReport, filename: str = "diou_hist.svg") -> str:
        filepath = self.output_dir / filename
        filepath.write_text(self.generate_svg(report), encoding="utf-8")
        return str(filepath)


def load_report(path) -> MatchReport:
    return MatchReport.from_dict(read_json(path), path)
