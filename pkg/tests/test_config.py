"""
Run configuration: defaults, config files, command-line overrides and
validation.
"""
import json

import pytest

from core.config import RunConfig
from core.errors import ConfigError
from core.view_fusion import ViewFrame, ViewKind


def _write(tmp_path, data, name="pipefuse.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def test_defaults():
    cfg = RunConfig()
    assert cfg.confidence_threshold == 0.5
    assert cfg.prediction_iou_threshold == 0.7
    assert cfg.matching_threshold == 0.4
    assert cfg.pairwise_mode == "all"
    assert cfg.validate()

    frames = cfg.view_frames()
    assert set(frames) == set(ViewKind)
    assert frames[ViewKind.CSCAN] == ViewFrame()


def test_file_then_overrides(tmp_path):
    path = _write(tmp_path, {"matching_threshold": 0.6, "threads": 3, "pairwise_mode": "table"})

    cfg = RunConfig.load(str(path), matching_threshold=0.2, threads=None)

    assert cfg.matching_threshold == 0.2, "command-line flag must win over the file"
    assert cfg.threads == 3, "unset flag must keep the file value"
    assert cfg.pairwise_mode == "table"
    assert cfg.match_config().pairs == ("B-C", "B-D")


def test_frames_from_file(tmp_path):
    path = _write(tmp_path, {"frames": {"D": {"origin_x_px": 40.0, "width_px": 400.0}}})
    cfg = RunConfig.load(str(path))

    assert cfg.frames["D"].origin_x_px == 40.0
    assert cfg.frames["D"].width_px == 400.0
    assert cfg.frames["D"].height_px == ViewFrame().height_px
    assert cfg.frames["B"] == ViewFrame()


BAD_CONFIGS = {
    "unknown_key": ({"matching_threshhold": 0.5}, "unknown config keys"),
    "confidence": ({"confidence_threshold": 1.5}, "confidence_threshold"),
    "prediction_iou": ({"prediction_iou_threshold": -0.1}, "prediction_iou_threshold"),
    "pairwise_mode": ({"pairwise_mode": "pairs"}, "pairwise_mode"),
    "threads": ({"threads": 0}, "threads"),
    "seed": ({"seed": -1}, "seed"),
    "gray_levels": ({"gray_levels": 1}, "gray_levels"),
    "lowpass_band": ({"lowpass_pass_mhz": 2500.0}, "lowpass band"),
    "frame_view": ({"frames": {"E": {}}}, "unknown view"),
    "frame_field": ({"frames": {"B": {"pixels": 3}}}, "frames.B"),
    "frame_size": ({"frames": {"C": {"width_px": 0.0}}}, "frames.C"),
    "not_object": ([1, 2], "expected a JSON object"),
}


@pytest.mark.parametrize("case", list(BAD_CONFIGS), ids=lambda x: f"config_{x}")
def test_bad_config_rejected(tmp_path, case):
    data, message = BAD_CONFIGS[case]
    path = _write(tmp_path, data)

    with pytest.raises(ConfigError) as exc:
        RunConfig.load(str(path))

    if message not in str(exc.value):
        pytest.fail(f"Expected '{message}' in error, got: {exc.value}")
    assert exc.value.exit_code == 1


def test_invalid_json_names_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "seed": 1,\n  oops\n}\n', encoding="utf-8")
    with pytest.raises(ConfigError, match=r"broken\.json:3: invalid JSON"):
        RunConfig.load(str(path))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="Cannot read config file"):
        RunConfig.load(str(tmp_path / "absent.json"))


def test_to_dict_round_trip():
    cfg = RunConfig(matching_threshold=0.55, seed=9)
    data = cfg.to_dict()
    assert set(data["frames"]) == {"B", "C", "D"}
    assert RunConfig.from_dict(data) == cfg
