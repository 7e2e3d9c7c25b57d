"""
Scoring match reports against ground truth: precision, recall, per-class
counts and the fraction of true triples whose pairwise 3D-DIoU exceeds a
threshold, per pair type.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

from .errors import DataError
from .reporter import MatchReport, SceneReport
from .scene_synth import GroundTruth
from .view_fusion import ALL_PAIRS, Orientation, lift_to_3d, pairwise_scores

logger = logging.getLogger(__name__)

# Score level the per-pair exceedance shares are reported against
EXCEEDANCE_THRESHOLD = 0.4


def _ratio(num: int, den: int) -> float:
    # Nothing to find and nothing reported counts as perfect
    return 1.0 if den == 0 else num / den


def exceedance(scores: Sequence[float], threshold: float) -> Dict[str, float]:
    """Share of scores strictly above `threshold`; above + below = 1."""
    n = len(scores)
    above = _ratio(sum(1 for s in scores if s > threshold), n) if n else 0.0
    return {"above": above, "below": 1.0 - above if n else 0.0, "n": n}


@dataclass
class EvalSummary:
    threshold: float = EXCEEDANCE_THRESHOLD
    n_truth: int = 0
    n_detections: int = 0
    n_correct: int = 0
    per_class: Dict[str, Dict[str, int]] = field(
        default_factory=lambda: {o.value: {"truth": 0, "detected": 0, "correct": 0} for o in Orientation}
    )
    true_pair_scores: Dict[str, List[float]] = field(default_factory=lambda: {p: [] for p in ALL_PAIRS})
    missing_triples: int = 0

    @property
    def precision(self) -> float:
        return _ratio(self.n_correct, self.n_detections)

    @property
    def recall(self) -> float:
        return _ratio(self.n_correct, self.n_truth)

    def exceedance(self) -> Dict[str, Dict[str, float]]:
        return {pair: exceedance(self.true_pair_scores[pair], self.threshold) for pair in ALL_PAIRS}

    def to_dict(self) -> Dict[str, object]:
        return {
            "threshold": self.threshold,
            "truth": self.n_truth,
            "detections": self.n_detections,
            "correct": self.n_correct,
            "precision": self.precision,
            "recall": self.recall,
            "per_class": self.per_class,
            "exceedance": self.exceedance(),
            "missing_triples": self.missing_triples,
        }


def evaluate_scene(scene: SceneReport, truth: GroundTruth, summary: EvalSummary) -> None:
    """Accumulate one scene into `summary`."""
    expected = {p.members: p.family.value for p in truth.pipelines}
    summary.n_truth += len(expected)
    summary.n_detections += len(scene.detections)
    for orientation in expected.values():
        summary.per_class[orientation]["truth"] += 1

    for d in scene.detections:
        summary.per_class[d.orientation]["detected"] += 1
        if expected.get(tuple(d.members)) == d.orientation:
            summary.n_correct += 1
            summary.per_class[d.orientation]["correct"] += 1

    for members in expected:
        try:
            b, c, d = ({axis: tuple(iv) for axis, iv in scene.boxes[m].items()} for m in members)
        except KeyError:
            summary.missing_triples += 1
            continue
        scores = pairwise_scores(lift_to_3d(b, c, d, members), ALL_PAIRS)
        for pair, value in scores.items():
            summary.true_pair_scores[pair].append(value)


def evaluate(report: MatchReport, truths: Mapping[str, GroundTruth],
             threshold: Optional[float] = None) -> EvalSummary:
    """
    Score every scene of `report` against its ground truth.

    A detection is correct when its member ids equal a true triple's ids and
    its orientation matches. Scene ids must agree exactly between the two.
    Exceedance shares use `threshold`, 0.4 unless given, whatever threshold
    the report was matched with.
    """
    if threshold is None:
        threshold = EXCEEDANCE_THRESHOLD
    report_ids = {s.scene_id for s in report.scenes}
    missing = sorted(report_ids - set(truths))
    extra = sorted(set(truths) - report_ids)
    if missing or extra:
        raise DataError(f"Scene ids differ: no truth for {missing}, no report for {extra}")

    summary = EvalSummary(threshold=threshold)
    for scene in sorted(report.scenes, key=lambda s: s.scene_id):
        evaluate_scene(scene, truths[scene.scene_id], summary)
    logger.info(
        f"Evaluated {len(report.scenes)} scenes: precision {summary.precision:.3f}, recall {summary.recall:.3f}"
    )
    return summary
