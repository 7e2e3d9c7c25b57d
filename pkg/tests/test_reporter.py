"""
Match report model and its JSON, HTML and SVG emitters.
"""
import re

import pytest

from core.errors import FormatError
from core.reporter import (
    HIST_BINS,
    MatchReport,
    ReportGenerator,
    SceneReport,
    histogram,
    load_report,
)
from core.view_fusion import MatchConfig, match_triples

from .fusion_helpers import FRAMES, pipe_boxes, view_box


def _two_pipe_report(threshold=0.4):
    b0, c0, d0 = pipe_boxes(0, 1, (1.0, 1.5), (0.5, 1.5), (1.0, 1.5))
    b1, c1, d1 = pipe_boxes(1, 2, (3.0, 4.5), (0.4, 0.9), (2.0, 2.5))
    stray = view_box("C009", "C", 3, (5.0, 5.5), (1.5, 1.9))
    low = view_box("D009", "D", 1, (0.1, 0.3), (0.2, 0.4), confidence=0.1)
    result = match_triples([b0, b1], [c0, c1, stray], [d0, d1, low], FRAMES,
                           MatchConfig(matching_threshold=threshold))
    scene = SceneReport.from_result("scene_0001", result)
    return MatchReport(config={"matching_threshold": threshold, "pairwise_mode": "all"}, scenes=[scene])


def test_histogram_counts_every_value():
    values = [-1.0, -0.05, 0.0, 0.33, 0.99, 1.0]
    h = histogram(values)
    assert len(h["edges"]) == HIST_BINS + 1
    assert h["edges"][0] == -1.0 and h["edges"][-1] == 1.0
    assert sum(h["counts"]) == len(values)
    assert h["counts"][-1] == 2, "the last bin is closed on the right"


def test_scene_report_from_result():
    report = _two_pipe_report()
    (scene,) = report.scenes

    assert [d.members for d in scene.detections] == [["B000", "C000", "D000"], ["B001", "C001", "D001"]]
    assert scene.unmatched == ["C009"]
    assert [box_id for box_id, _ in scene.discarded] == ["D009"]
    assert "D009" not in scene.boxes
    assert scene.boxes["C009"]["x"] == pytest.approx([5.0, 5.5])
    assert report.total_detections == 2
    assert report.total_unmatched == 1
    assert report.total_discarded == 1
    assert report.orientation_counts() == {"Vertical": 1, "HorizontalInclined": 1, "DeeplyInclined": 0}


def test_json_round_trip(tmp_path):
    report = _two_pipe_report()
    path = ReportGenerator(str(tmp_path)).save_json(report)

    loaded = load_report(path)

    assert loaded.to_dict() == report.to_dict()
    data = report.to_dict()
    assert data["summary"]["detections"] == 2
    assert sum(data["histograms"]["B-C"]["counts"]) == 2


def test_invalid_report_rejected(tmp_path):
    path = tmp_path / "report.json"
    path.write_text('{"title": "x", "scenes": []}\n', encoding="utf-8")
    with pytest.raises(FormatError, match="invalid match report"):
        load_report(path)


def test_html_is_deterministic(tmp_path):
    report = _two_pipe_report()
    generator = ReportGenerator(str(tmp_path))

    first = generator.generate_html(report)
    second = generator.generate_html(_two_pipe_report())

    assert first == second
    assert "scene_0001" in first
    assert "B000 / C000 / D000" in first
    assert "C009" in first
    if re.search(r"\d{4}-\d{2}-\d{2}", first):
        pytest.fail("HTML report must not carry a timestamp")


def test_html_escapes_scene_ids(tmp_path):
    report = MatchReport(scenes=[SceneReport("<scene>")])
    page = ReportGenerator(str(tmp_path)).generate_html(report)
    assert "&lt;scene&gt;" in page
    assert "<scene>" not in page


def test_svg_histogram(tmp_path):
    generator = ReportGenerator(str(tmp_path))
    path = generator.save_histogram(_two_pipe_report())

    text = (tmp_path / "diou_hist.svg").read_text(encoding="utf-8")
    assert path.endswith("diou_hist.svg")
    assert text.lstrip().startswith("<?xml")
    assert "<svg" in text
    assert generator.generate_svg(_two_pipe_report()) == text


def test_empty_report_renders(tmp_path):
    generator = ReportGenerator(str(tmp_path))
    report = MatchReport()
    assert "Scenes" in generator.generate_html(report)
    assert "<svg" in generator.generate_svg(report)
