"""
Data-volume comparison between the three-view image pipeline and direct
processing of the 3D radar volume.

Sizes are reported in decimal (1 MB = 10^6 B) and binary (1 MiB = 2^20 B)
units, and the volume side under both a 4-byte and a 4-bit reading of the
per-point size.
"""
from dataclasses import asdict, dataclass
from typing import Dict, List

from .errors import ParameterError

MB = 1000 ** 2
MIB = 1024 ** 2

# Reference figures the computed values are compared against
STATED_RATIO_PCT = 5.6
STATED_VOLUME_MB = 5470.0


@dataclass(frozen=True)
class FootprintParams:
    n_images: int = 1200
    kb_per_image: float = 250.0
    image_width_px: int = 1620
    image_height_px: int = 760
    channels: int = 35
    samples_per_km: int = 20000
    survey_km: float = 1.0
    depth_points: int = 2048
    bytes_per_point: float = 4.0

    def __post_init__(self):
        for name, value in asdict(self).items():
            if value <= 0:
                raise ParameterError(f"Footprint parameter {name} must be positive, got {value}")


def footprint_report(params: FootprintParams = FootprintParams()) -> Dict[str, object]:
    image_bytes = params.n_images * params.kb_per_image * 1000
    points = params.samples_per_km * params.survey_km * params.channels * params.depth_points
    volume_bytes = points * params.bytes_per_point
    volume_bytes_4bit = points * 0.5

    image_mb = image_bytes / MB
    volume_mb = volume_bytes / MB
    volume_mib = volume_bytes / MIB
    return {
        "params": asdict(params),
        "image_bytes": image_bytes,
        "image_mb": image_mb,
        "image_mib": image_bytes / MIB,
        "raw_pixels_per_image": params.image_width_px * params.image_height_px,
        "volume_points": points,
        "volume_bytes": volume_bytes,
        "volume_mb": volume_mb,
        "volume_mib": volume_mib,
        "ratio_pct": {
            "decimal": 100.0 * image_mb / volume_mb,
            "binary": 100.0 * (image_bytes / MIB) / volume_mib,
            # Decimal image MB against the binary-sized volume
            "mixed": 100.0 * image_mb / volume_mib,
            "four_bit": 100.0 * image_bytes / volume_bytes_4bit,
        },
        "stated": {"ratio_pct": STATED_RATIO_PCT, "volume_mb": STATED_VOLUME_MB},
    }


def format_footprint(report: Dict[str, object]) -> List[str]:
    ratio = report["ratio_pct"]
    return [
        f"Image pipeline : {report['image_mb']:.1f} MB ({report['image_mib']:.1f} MiB)",
        f"Volume pipeline: {report['volume_mb']:.1f} MB ({report['volume_mib']:.2f} MiB), "
        f"stated {STATED_VOLUME_MB:.0f} MB",
        f"Ratio decimal  : {ratio['decimal']:.2f}%",
        f"Ratio binary   : {ratio['binary']:.2f}%",
        f"Ratio mixed    : {ratio['mixed']:.2f}% (MB image vs MiB volume)",
        f"Ratio 4-bit    : {ratio['four_bit']:.2f}% (if points are 4 bits)",
        f"Stated ratio   : {STATED_RATIO_PCT:.1f}%",
    ]
