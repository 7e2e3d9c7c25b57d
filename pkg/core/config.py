"""
Run configuration for pipefuse.

Values come from built-in defaults, then an optional JSON config file, then
command-line flags. Nothing is read from the environment.
"""
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Literal, Optional

from .errors import ConfigError, ParameterError
from .view_fusion import MatchConfig, ViewFrame, ViewKind

# Pairwise scoring modes
PairwiseMode = Literal["all", "table"]


def _default_frames() -> Dict[str, ViewFrame]:
    return {view.value: ViewFrame() for view in ViewKind}


@dataclass
class RunConfig:
    """Configuration of one pipefuse run."""
    confidence_threshold: float = 0.5
    prediction_iou_threshold: float = 0.7
    matching_threshold: float = 0.4
    pairwise_mode: PairwiseMode = "all"
    clamp_tolerance_px: float = 2.0
    wave_velocity: float = 0.1
    seed: int = 0
    threads: int = 1
    gray_levels: int = 256
    gain_alpha: float = 0.05
    lowpass_pass_mhz: float = 1200.0
    lowpass_stop_mhz: float = 2000.0
    image_width_px: int = 1620
    image_height_px: int = 760
    frames: Dict[str, ViewFrame] = field(default_factory=_default_frames)

    # Threshold sweep and noise levels used by `bench`.
    # Every level carries the detector floor; the level adds extra edge jitter (px).
    SWEEP_THRESHOLDS = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
    DETECTOR_FLOOR_PX = 2.0
    NOISE_LEVELS = {
        "original": 0.0,
        "medium": 4.0,
        "high": 8.0,
    }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], source: str = "config") -> "RunConfig":
        """Build a config from a mapping; unknown keys are rejected."""
        if not isinstance(data, dict):
            raise ConfigError(f"{source}: expected a JSON object, got {type(data).__name__}")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"{source}: unknown config keys {unknown}")

        values = dict(data)
        if "frames" in values:
            values["frames"] = cls._parse_frames(values["frames"], source)
        try:
            cfg = cls(**values)
            cfg.validate()
        except TypeError as e:
            raise ConfigError(f"{source}: {e}") from e
        return cfg

    @staticmethod
    def _parse_frames(raw: Any, source: str) -> Dict[str, ViewFrame]:
        if not isinstance(raw, dict):
            raise ConfigError(f"{source}: 'frames' must be an object keyed by B, C, D")
        frames = _default_frames()
        for key, value in raw.items():
            if key not in frames:
                raise ConfigError(f"{source}: unknown view {key!r} in 'frames'")
            try:
                frames[key] = replace(frames[key], **value)
            except (TypeError, ParameterError) as e:
                raise ConfigError(f"{source}: frames.{key}: {e}") from e
        return frames

    @classmethod
    def load(cls, path: Optional[str] = None, **overrides: Any) -> "RunConfig":
        """
        Load configuration.

        Args:
            path: Optional JSON config file
            overrides: Values taken from command-line flags; None means unset
        """
        data: Dict[str, Any] = {}
        if path is not None:
            try:
                data = json.loads(Path(path).read_text(encoding="utf-8"))
            except OSError as e:
                raise ConfigError(f"Cannot read config file {path}: {e.strerror}") from e
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}:{e.lineno}: invalid JSON: {e.msg}") from e
            if not isinstance(data, dict):
                raise ConfigError(f"{path}: expected a JSON object")
        data = {**data, **{k: v for k, v in overrides.items() if v is not None}}
        return cls.from_dict(data, source=str(path) if path else "config")

    def validate(self) -> bool:
        """Check every field; raises ConfigError naming the first bad one."""
        try:
            self.match_config()
        except ParameterError as e:
            raise ConfigError(str(e)) from e
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.gray_levels < 2:
            raise ConfigError(f"gray_levels must be >= 2, got {self.gray_levels}")
        if self.gain_alpha < 0:
            raise ConfigError(f"gain_alpha must be >= 0, got {self.gain_alpha}")
        if not 0 <= self.lowpass_pass_mhz < self.lowpass_stop_mhz:
            raise ConfigError(
                f"lowpass band invalid: pass {self.lowpass_pass_mhz} MHz, stop {self.lowpass_stop_mhz} MHz"
            )
        if self.image_width_px <= 0 or self.image_height_px <= 0:
            raise ConfigError(f"image size must be positive, got {self.image_width_px}x{self.image_height_px}")
        if set(self.frames) != {"B", "C", "D"}:
            raise ConfigError(f"frames must define B, C and D, got {sorted(self.frames)}")
        return True

    def match_config(self) -> MatchConfig:
        return MatchConfig(
            confidence_threshold=self.confidence_threshold,
            prediction_iou_threshold=self.prediction_iou_threshold,
            matching_threshold=self.matching_threshold,
            pairwise_mode=self.pairwise_mode,
            clamp_tolerance_px=self.clamp_tolerance_px,
            wave_velocity=self.wave_velocity,
        )

    def view_frames(self) -> Dict[ViewKind, ViewFrame]:
        return {ViewKind(k): v for k, v in self.frames.items()}

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["frames"] = {k: asdict(v) for k, v in sorted(self.frames.items())}
        return data
