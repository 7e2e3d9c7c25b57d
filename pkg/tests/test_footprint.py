"""
Data-volume comparison of the image pipeline and the 3D volume.
"""
import pytest

from core.errors import ParameterError
from core.footprint import FootprintParams, footprint_report, format_footprint


def test_default_footprint():
    report = footprint_report()

    assert report["image_mb"] == pytest.approx(300.0)
    assert report["volume_points"] == 20000 * 35 * 2048
    assert report["volume_mb"] == pytest.approx(5734.4)
    assert report["volume_mib"] == pytest.approx(5468.75)
    assert report["raw_pixels_per_image"] == 1620 * 760


def test_ratios_bracket_stated_value():
    ratio = footprint_report()["ratio_pct"]

    assert ratio["decimal"] == pytest.approx(5.2315, abs=1e-3)
    assert ratio["mixed"] == pytest.approx(5.4857, abs=1e-3)
    assert ratio["binary"] == pytest.approx(ratio["decimal"]), "same units on both sides cancel"
    assert ratio["four_bit"] == pytest.approx(41.85, abs=0.01)
    for name in ("decimal", "binary", "mixed"):
        if not 5.2 <= ratio[name] <= 5.7:
            pytest.fail(f"{name} ratio {ratio[name]:.3f}% far from the stated 5.6%")


def test_ratio_scales_with_survey_length():
    short = footprint_report(FootprintParams(survey_km=0.5))
    assert short["ratio_pct"]["decimal"] == pytest.approx(2 * footprint_report()["ratio_pct"]["decimal"])


@pytest.mark.parametrize("name", ["n_images", "kb_per_image", "channels", "depth_points", "bytes_per_point"],
                         ids=lambda x: f"nonpositive_{x}")
def test_nonpositive_parameter_rejected(name):
    with pytest.raises(ParameterError, match=name):
        FootprintParams(**{name: 0})


def test_format_lines():
    lines = format_footprint(footprint_report())
    assert lines[0].startswith("Image pipeline : 300.0 MB")
    assert any("5.23%" in line for line in lines)
    assert any("5.49%" in line for line in lines)
    assert lines[-1] == "Stated ratio   : 5.6%"
