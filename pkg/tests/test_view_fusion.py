"""
Three-view matching: normalization, lifting, classification, depth and
the full match_triples pipeline.
"""
import itertools
import random

import pytest

from core.errors import DepthDomainError, LabelConflictError, OutOfFrameError, ParameterError
from core.geometry import Box3D, Rect2, diou_3d
from core.view_fusion import (
    ALL_PAIRS,
    PAIR_BC,
    PAIR_BD,
    PAIR_CD,
    ApexObservation,
    ClassLabel,
    MatchConfig,
    Orientation,
    ViewBox2D,
    ViewFrame,
    ViewKind,
    apex_from_box,
    classify,
    depth_from_hyperbola,
    depth_from_apex,
    fuse_intervals,
    lift_to_3d,
    match_triples,
    normalize_box,
    pairwise_scores,
    suppress_duplicates,
    to_scene_meters,
)
from .fusion_helpers import FRAMES, exhaustive_assignment, ids_of, pipe_boxes, view_box


def _two_pipes():
    first = pipe_boxes(0, 1, (1.0, 1.5), (0.2, 1.8), (0.5, 1.0))
    second = pipe_boxes(1, 2, (3.0, 3.6), (0.3, 1.7), (1.5, 2.0))
    return [first[0], second[0]], [first[1], second[1]], [first[2], second[2]]


# =============================================================================
# Normalization and lifting
# =============================================================================

def test_normalize_box_offsets_frame_origin():
    frame = ViewFrame(100.0, 0.0, 800.0, 760.0)
    box = ViewBox2D("B000", ClassLabel(ViewKind.BSCAN, 1), Rect2(300.0, 0.0, 500.0, 380.0))
    rect = normalize_box(box, frame)
    assert rect.min_x == pytest.approx(0.25)
    assert rect.max_x == pytest.approx(0.5)
    assert rect.min_y == 0.0
    assert rect.max_y == pytest.approx(0.5)


def test_normalize_box_edge_at_origin_is_zero():
    frame = ViewFrame(40.0, 20.0, 800.0, 600.0)
    box = ViewBox2D("B000", ClassLabel(ViewKind.BSCAN, 1), Rect2(40.0, 20.0, 80.0, 80.0))
    rect = normalize_box(box, frame)
    assert (rect.min_x, rect.min_y) == (0.0, 0.0)


def test_normalize_box_clamps_within_tolerance():
    frame = ViewFrame(0.0, 0.0, 100.0, 100.0)
    box = ViewBox2D("C000", ClassLabel(ViewKind.CSCAN, 1), Rect2(-1.5, 10.0, 101.0, 50.0))
    rect = normalize_box(box, frame, clamp_px=2.0)
    assert (rect.min_x, rect.max_x) == (0.0, 1.0)


def test_normalize_box_rejects_far_outside():
    frame = ViewFrame(0.0, 0.0, 100.0, 100.0)
    box = ViewBox2D("C007", ClassLabel(ViewKind.CSCAN, 1), Rect2(-10.0, 10.0, 50.0, 50.0))
    with pytest.raises(OutOfFrameError, match="C007"):
        normalize_box(box, frame, clamp_px=2.0)


def test_to_scene_meters_scales_view_axes():
    frame = ViewFrame()
    intervals = to_scene_meters(Rect2(0.1, 0.25, 0.2, 0.75), ViewKind.CSCAN, frame)
    assert set(intervals) == {"x", "y"}
    assert intervals["x"] == pytest.approx((3.0, 6.0))
    assert intervals["y"] == pytest.approx((0.33, 0.99))
    point = to_scene_meters(Rect2(0.5, 0.5, 0.5, 0.5), ViewKind.DSCAN, frame)
    assert point["y"] == pytest.approx((0.66, 0.66))
    assert point["z"] == pytest.approx((1.5, 1.5))


B_VIEW = {"x": (1.0, 2.0), "z": (0.5, 1.0)}
C_VIEW = {"x": (1.0, 2.0), "y": (0.3, 0.8)}
D_VIEW = {"y": (0.3, 0.8), "z": (0.5, 1.0)}


def test_lift_consistent_views_gives_identical_boxes():
    lifted = lift_to_3d(B_VIEW, C_VIEW, D_VIEW)
    expected = Box3D((1.0, 0.3, 0.5), (2.0, 0.8, 1.0))
    assert [lb.box for lb in lifted] == [expected] * 3
    assert [lb.provenance for lb in lifted] == ["3D-1B", "3D-nC", "3D-nD"]
    assert pairwise_scores(lifted) == {PAIR_BC: 1.0, PAIR_BD: 1.0, PAIR_CD: 1.0}


def test_lift_shifted_c_view_moves_only_nc_box():
    shifted = {"x": (1.1, 2.1), "y": (0.3, 0.8)}
    box_b, box_c, box_d = lift_to_3d(B_VIEW, shifted, D_VIEW)
    expected = Box3D((1.0, 0.3, 0.5), (2.0, 0.8, 1.0))
    assert box_b.box == expected
    assert box_d.box == expected
    assert box_c.box == Box3D((1.1, 0.3, 0.5), (2.1, 0.8, 1.0))
    scores = pairwise_scores((box_b, box_c, box_d))
    assert scores[PAIR_BC] < 1.0
    assert scores[PAIR_BC] == pytest.approx(diou_3d(box_b.box, box_c.box))
    assert scores[PAIR_BD] == 1.0


def test_pairwise_table_mode_skips_cd():
    lifted = lift_to_3d(B_VIEW, C_VIEW, D_VIEW)
    assert set(pairwise_scores(lifted, MatchConfig(pairwise_mode="table").pairs)) == {PAIR_BC, PAIR_BD}


def test_fuse_intervals_averages_observing_views():
    fused = fuse_intervals({"x": (1.0, 2.0), "z": (0.4, 1.0)}, {"x": (1.2, 2.2), "y": (0.3, 0.8)},
                           {"y": (0.5, 0.8), "z": (0.6, 1.0)})
    assert fused.lo == pytest.approx((1.1, 0.4, 0.5))
    assert fused.hi == pytest.approx((2.1, 0.8, 1.0))


# =============================================================================
# Labels and depth
# =============================================================================

CLASSIFY_CASES = [(1, Orientation.VERTICAL), (2, Orientation.HORIZONTAL_INCLINED), (3, Orientation.DEEPLY_INCLINED)]


@pytest.mark.parametrize("variant,expected", CLASSIFY_CASES, ids=lambda x: f"{x}" if isinstance(x, int) else x.value)
def test_classify(variant, expected):
    labels = (ClassLabel(ViewKind.BSCAN, 1), ClassLabel(ViewKind.CSCAN, variant), ClassLabel(ViewKind.DSCAN, variant))
    assert classify(labels) is expected


def test_classify_rejects_conflicting_variants():
    labels = (ClassLabel(ViewKind.BSCAN, 1), ClassLabel(ViewKind.CSCAN, 2), ClassLabel(ViewKind.DSCAN, 3))
    with pytest.raises(LabelConflictError, match="2-C"):
        classify(labels)


@pytest.mark.parametrize("text", ["2-B", "4-C", "1-E", "C"], ids=lambda x: f"Label_{x}")
def test_invalid_labels(text):
    with pytest.raises(LabelConflictError):
        ClassLabel.parse(text)


def test_label_round_trip():
    for text in ("1-B", "1-C", "2-C", "3-C", "1-D", "2-D", "3-D"):
        assert str(ClassLabel.parse(text)) == text


HYPERBOLA_DEPTH_CASES = {
    "apex_at_origin": (0.0, 0.5),
    "lateral_offset": (0.6, 0.4),
}


@pytest.mark.parametrize("case", HYPERBOLA_DEPTH_CASES, ids=lambda x: f"Depth_{x}")
def test_depth_from_hyperbola(case):
    x0, expected = HYPERBOLA_DEPTH_CASES[case]
    assert depth_from_hyperbola(ApexObservation(x0=x0, t0=20.0, v=0.1)) == pytest.approx(expected, abs=1e-12)


def test_depth_from_hyperbola_negative_radicand():
    with pytest.raises(DepthDomainError):
        depth_from_hyperbola(ApexObservation(x0=1.5, t0=20.0, v=0.1))


@pytest.mark.parametrize("x0, t0, v", [(1.0, 4.0, 0.5), (0.75, 3.0, 0.5), (-1.0, 20.0, 0.1)])
def test_depth_from_hyperbola_zero_radicand(x0, t0, v):
    # |x0| / v == t0 / 2
    assert depth_from_hyperbola(ApexObservation(x0=x0, t0=t0, v=v)) == 0.0


def test_depth_from_hyperbola_is_half_of_two_way_inversion():
    for t0 in (1.0, 7.3, 20.0, 33.3, 50.0):
        for v in (0.08, 0.1, 0.12):
            obs = ApexObservation(x0=0.0, t0=t0, v=v)
            assert 2.0 * depth_from_hyperbola(obs) == depth_from_apex(obs)


def test_depth_from_apex():
    assert depth_from_apex(ApexObservation(0.0, 20.0, 0.1)) == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        ApexObservation(0.0, 0.0, 0.1)


def test_apex_from_box_round_trip():
    box = Box3D((2.0, 0.0, 1.0), (2.4, 2.0, 1.4))
    obs = apex_from_box(box, 0.1)
    assert obs.x0 == pytest.approx(2.2)
    assert obs.t0 == pytest.approx(24.0)
    assert depth_from_apex(obs) == pytest.approx(1.2)


# =============================================================================
# Duplicate suppression
# =============================================================================

def test_suppress_duplicates_keeps_higher_confidence():
    a = view_box("C001", "C", 1, (1.0, 2.0), (0.2, 1.0), confidence=0.7)
    b = view_box("C000", "C", 1, (1.02, 2.02), (0.2, 1.0), confidence=0.9)
    c = view_box("C002", "C", 1, (4.0, 5.0), (0.2, 1.0), confidence=0.6)
    kept, suppressed = suppress_duplicates([a, b, c], 0.7)
    assert [k.box_id for k in kept] == ["C000", "C002"]
    assert [s.box_id for s in suppressed] == ["C001"]


def test_suppress_duplicates_ties_broken_by_id():
    a = view_box("C001", "C", 1, (1.0, 2.0), (0.2, 1.0), confidence=0.8)
    b = view_box("C000", "C", 1, (1.0, 2.0), (0.2, 1.0), confidence=0.8)
    kept, suppressed = suppress_duplicates([a, b], 0.7)
    assert [k.box_id for k in kept] == ["C000"]
    assert [s.box_id for s in suppressed] == ["C001"]


# =============================================================================
# match_triples
# =============================================================================

def test_match_two_pipes():
    b, c, d = _two_pipes()
    result = match_triples(b, c, d, FRAMES)
    assert ids_of(result.detections) == [("B000", "C000", "D000"), ("B001", "C001", "D001")]
    orientations = {det.members[0]: det.orientation for det in result.detections}
    assert orientations == {"B000": Orientation.VERTICAL, "B001": Orientation.HORIZONTAL_INCLINED}
    for det in result.detections:
        assert set(det.scores) == set(ALL_PAIRS)
        assert det.min_score == pytest.approx(1.0)
    assert result.unmatched == []
    assert result.discarded == []


def test_match_depth_from_fused_box():
    b, c, d = _two_pipes()
    result = match_triples(b, c, d, FRAMES)
    depths = {det.members[0]: det.depth_m for det in result.detections}
    assert depths["B000"] == pytest.approx(0.75)
    assert depths["B001"] == pytest.approx(1.75)


def test_match_is_permutation_stable(base_seed):
    b, c, d = _two_pipes()
    extra = view_box("C009", "C", 2, (0.0, 0.4), (1.0, 1.9), confidence=0.95)
    reference = ids_of(match_triples(b, c + [extra], d, FRAMES).detections)
    rng = random.Random(base_seed)
    for _ in range(20):
        shuffled = [rng.sample(v, len(v)) for v in (b, c + [extra], d)]
        assert ids_of(match_triples(*shuffled, FRAMES).detections) == reference


def test_match_confidence_filter():
    b, c, d = _two_pipes()
    low = ViewBox2D(c[1].box_id, c[1].label, c[1].rect, 0.3)
    result = match_triples(b, [c[0], low], d, FRAMES)
    assert ids_of(result.detections) == [("B000", "C000", "D000")]
    assert result.discarded == [("C001", "confidence")]
    assert {box.box_id for box in result.unmatched} == {"B001", "D001"}


def test_match_requires_equal_cd_variant():
    b, c, d = _two_pipes()
    wrong = ViewBox2D(d[1].box_id, ClassLabel(ViewKind.DSCAN, 3), d[1].rect, d[1].confidence)
    result = match_triples(b, c, [d[0], wrong], FRAMES)
    assert ids_of(result.detections) == [("B000", "C000", "D000")]


def test_match_rejects_box_in_wrong_view():
    b, c, d = _two_pipes()
    with pytest.raises(LabelConflictError, match="C000"):
        match_triples(c, b, d, FRAMES)


def test_match_rejects_duplicate_ids_across_views():
    b, c, d = _two_pipes()
    clash = ViewBox2D("B001", d[1].label, d[1].rect, d[1].confidence)
    with pytest.raises(LabelConflictError, match="Duplicate box id B001"):
        match_triples(b, c, [d[0], clash], FRAMES)


def test_match_rejects_duplicate_ids_within_view():
    b, c, d = _two_pipes()
    with pytest.raises(LabelConflictError, match="Duplicate box id C000"):
        match_triples(b, [c[0], c[0]], d, FRAMES)


def test_match_threshold_above_one_accepts_nothing():
    b, c, d = _two_pipes()
    result = match_triples(b, c, d, FRAMES, MatchConfig(matching_threshold=1.01))
    assert result.detections == []
    assert len(result.unmatched) == 6


@pytest.mark.parametrize("threshold", [float("nan"), -1.5], ids=lambda x: f"Threshold_{x}")
def test_match_config_rejects_bad_threshold(threshold):
    with pytest.raises(ParameterError):
        MatchConfig(matching_threshold=threshold)


def _ambiguous_scene():
    """Two pipes plus a second, slightly shifted C-box for the first pipe."""
    b, c, d = _two_pipes()
    near = view_box("C005", "C", 1, (1.08, 1.58), (0.25, 1.85), confidence=0.85)
    return b, c + [near], d


def test_match_threshold_monotone():
    b, c, d = _ambiguous_scene()
    counts = []
    for threshold in (0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 1.0):
        cfg = MatchConfig(prediction_iou_threshold=0.95, matching_threshold=threshold)
        counts.append(len(match_triples(b, c, d, FRAMES, cfg).detections))
    if any(later > earlier for earlier, later in zip(counts, counts[1:])):
        pytest.fail(f"Detection counts increase with the threshold: {counts}")


def test_match_no_member_reuse_and_matches_exhaustive_count():
    b, c, d = _ambiguous_scene()
    cfg = MatchConfig(prediction_iou_threshold=0.95, matching_threshold=0.2)
    result = match_triples(b, c, d, FRAMES, cfg)
    members = [m for det in result.detections for m in det.members]
    assert len(members) == len(set(members))

    candidates = {}
    for ob, oc, od in itertools.product(b, c, d):
        if oc.label.variant != od.label.variant:
            continue
        ids = (ob.box_id, oc.box_id, od.box_id)
        lifted = lift_to_3d(result.observed[ids[0]], result.observed[ids[1]], result.observed[ids[2]], ids)
        scores = pairwise_scores(lifted, cfg.pairs)
        if min(scores.values()) >= cfg.matching_threshold:
            candidates[ids] = sum(scores.values())
    best_count, _ = exhaustive_assignment(candidates)
    assert len(result.detections) == best_count
    # The exact C-box beats the shifted one
    assert ("B000", "C000", "D000") in ids_of(result.detections)


def test_match_duplicate_is_suppressed_with_default_pred_iou():
    b, c, d = _two_pipes()
    duplicate = view_box("C005", "C", 1, (1.02, 1.52), (0.2, 1.8), confidence=0.8)
    result = match_triples(b, c + [duplicate], d, FRAMES)
    assert ("C005", "duplicate") in result.discarded
    assert len(result.detections) == 2


def test_match_empty_views():
    result = match_triples([], [], [], FRAMES)
    assert result.detections == []
    assert result.unmatched == []
