"""
Radargram preprocessing: selective DFT reconstruction, background removal,
gradual low-pass, exponential gain, gray-level quantization, information
entropy and Gaussian noise injection.

Radargram layout: axis 0 is the trace (scan position), axis 1 the time sample.
"""
import itertools
import logging
from dataclasses import dataclass, replace
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np
from scipy.stats import entropy

from .errors import ParameterError, ShapeError

logger = logging.getLogger(__name__)

# Optional steps in the order they are applied
CHAIN_ORDER = ("gain", "background", "lowpass")


@dataclass(frozen=True)
class SpectralTrace:
    """Frequency components S(f_k) at strictly increasing frequencies f_k (Hz)."""
    freqs_hz: np.ndarray
    amplitudes: np.ndarray

    def __post_init__(self):
        freqs = np.asarray(self.freqs_hz, dtype=np.float64).ravel()
        amps = np.asarray(self.amplitudes, dtype=np.complex128).ravel()
        if freqs.size < 1:
            raise ShapeError("Spectral trace needs at least one component")
        if freqs.shape != amps.shape:
            raise ShapeError(f"{freqs.size} frequencies but {amps.size} amplitudes")
        if np.any(np.diff(freqs) <= 0):
            raise ParameterError("Spectral trace frequencies must be strictly increasing")
        object.__setattr__(self, "freqs_hz", freqs)
        object.__setattr__(self, "amplitudes", amps)


@dataclass(frozen=True)
class TimeTrace:
    """Complex samples s(t) at strictly increasing times (s)."""
    times_s: np.ndarray
    samples: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times_s, dtype=np.float64).ravel()
        samples = np.asarray(self.samples, dtype=np.complex128).ravel()
        if times.shape != samples.shape:
            raise ShapeError(f"{times.size} times but {samples.size} samples")
        if np.any(np.diff(times) <= 0):
            raise ParameterError("Trace times must be strictly increasing")
        object.__setattr__(self, "times_s", times)
        object.__setattr__(self, "samples", samples)

    @property
    def sample_interval_ns(self) -> float:
        if self.times_s.size < 2:
            return float("nan")
        return float(np.median(np.diff(self.times_s)) * 1e9)


@dataclass(frozen=True)
class Radargram:
    """Real-valued B-scan grid with trace spacing (m) and sample interval (ns)."""
    data: np.ndarray
    trace_spacing_m: float = 0.05
    dt_ns: float = 0.1

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ShapeError(f"Radargram must be a non-empty 2D grid, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ParameterError("Radargram contains non-finite values")
        if self.trace_spacing_m <= 0 or self.dt_ns <= 0:
            raise ParameterError(
                f"Radargram spacing must be positive, got {self.trace_spacing_m} m / {self.dt_ns} ns"
            )
        object.__setattr__(self, "data", data)

    @property
    def n_traces(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def times_ns(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt_ns

    def with_data(self, data: np.ndarray) -> "Radargram":
        return replace(self, data=data)


@dataclass(frozen=True)
class GrayImage:
    levels: np.ndarray
    n_levels: int = 256

    def __post_init__(self):
        if self.n_levels < 2:
            raise ParameterError(f"Gray image needs at least 2 levels, got {self.n_levels}")
        levels = np.asarray(self.levels)
        if not np.issubdtype(levels.dtype, np.integer):
            raise ParameterError(f"Gray levels must be integers, got {levels.dtype}")
        if levels.size and (levels.min() < 0 or levels.max() > self.n_levels - 1):
            raise ParameterError(f"Gray levels outside [0, {self.n_levels - 1}]")
        object.__setattr__(self, "levels", levels)


@dataclass(frozen=True)
class ChainParams:
    gain_alpha: float = 0.05
    pass_hz: float = 1.2e9
    stop_hz: float = 2.0e9


# =============================================================================
# Selective DFT
# =============================================================================

def isdft(spec: SpectralTrace, times: Sequence[float]) -> TimeTrace:
    """s(t) = sum_k S(f_k) exp(j 2 pi f_k t), by direct summation."""
    t = np.asarray(times, dtype=np.float64).ravel()
    phase = np.exp(2j * np.pi * np.outer(t, spec.freqs_hz))
    return TimeTrace(t, phase @ spec.amplitudes)


def sdft(trace: TimeTrace, freqs: Sequence[float]) -> SpectralTrace:
    """S(f_k) = (1/M) sum_m s(t_m) exp(-j 2 pi f_k t_m) over the M samples."""
    f = np.asarray(freqs, dtype=np.float64).ravel()
    phase = np.exp(-2j * np.pi * np.outer(f, trace.times_s))
    return SpectralTrace(f, (phase @ trace.samples) / trace.samples.size)


# =============================================================================
# Radargram filters
# =============================================================================

def background_removal(r: Radargram) -> Radargram:
    """Subtract the mean trace from every trace."""
    if r.n_traces < 2:
        raise ParameterError(f"Background removal needs at least 2 traces, got {r.n_traces}")
    return r.with_data(r.data - np.mean(r.data, axis=0, keepdims=True))


def lowpass_mask(freqs_hz: np.ndarray, pass_hz: float, stop_hz: float) -> np.ndarray:
    """1 up to pass_hz, raised-cosine roll-off to 0 at stop_hz, 0 beyond."""
    mask = np.zeros_like(freqs_hz, dtype=np.float64)
    mask[freqs_hz <= pass_hz] = 1.0
    taper = (freqs_hz > pass_hz) & (freqs_hz < stop_hz)
    if np.any(taper):
        x = (freqs_hz[taper] - pass_hz) / (stop_hz - pass_hz)
        mask[taper] = 0.5 * (1.0 + np.cos(np.pi * x))
    return mask


def lowpass_gradual(r: Radargram, pass_hz: float, stop_hz: float) -> Radargram:
    dt_s = r.dt_ns * 1e-9
    nyquist = 0.5 / dt_s
    if not 0.0 <= pass_hz < stop_hz <= nyquist * (1 + 1e-12):
        raise ParameterError(
            f"Low-pass band invalid: need 0 <= pass ({pass_hz:.4g} Hz) < stop ({stop_hz:.4g} Hz) "
            f"<= Nyquist ({nyquist:.4g} Hz)"
        )
    freqs = np.fft.rfftfreq(r.n_samples, dt_s)
    spectrum = np.fft.rfft(r.data, axis=1)
    spectrum *= lowpass_mask(freqs, pass_hz, stop_hz)[None, :]
    return r.with_data(np.fft.irfft(spectrum, n=r.n_samples, axis=1))


def exp_gain(r: Radargram, alpha_per_ns: float) -> Radargram:
    """Multiply the sample at time t (ns) by exp(alpha t)."""
    if alpha_per_ns < 0:
        raise ParameterError(f"Gain alpha must be >= 0, got {alpha_per_ns}")
    if alpha_per_ns == 0:
        return r.with_data(r.data.copy())
    return r.with_data(r.data * np.exp(alpha_per_ns * r.times_ns)[None, :])


# =============================================================================
# Entropy and noise
# =============================================================================

def quantize(r: Union[Radargram, np.ndarray], levels: int = 256) -> GrayImage:
    """Linear min-max mapping onto [0, levels - 1]; constant input maps to 0."""
    if levels < 2:
        raise ParameterError(f"Need at least 2 gray levels, got {levels}")
    data = r.data if isinstance(r, Radargram) else np.asarray(r, dtype=np.float64)
    lo, hi = float(np.min(data)), float(np.max(data))
    if hi == lo:
        return GrayImage(np.zeros(data.shape, dtype=np.int64), levels)
    scaled = np.rint((data - lo) / (hi - lo) * (levels - 1)).astype(np.int64)
    return GrayImage(np.clip(scaled, 0, levels - 1), levels)


def information_entropy(img: GrayImage) -> float:
    """Shannon entropy (bits) of the gray-level histogram; empty levels contribute 0."""
    counts = np.bincount(img.levels.ravel(), minlength=img.n_levels)
    if counts.sum() == 0:
        return 0.0
    return max(float(entropy(counts, base=2)), 0.0)


def add_gaussian_noise(r: Radargram, sigma: float,
                       seed: Union[int, np.random.Generator, None] = 0) -> Radargram:
    """Add i.i.d. N(0, sigma^2) noise; sigma = 0 returns an identical copy."""
    if sigma < 0:
        raise ParameterError(f"Noise sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return r.with_data(r.data.copy())
    rng = np.random.default_rng(seed)
    return r.with_data(r.data + rng.normal(0.0, sigma, size=r.data.shape))


# =============================================================================
# Chain and ablation
# =============================================================================

def apply_chain(r: Radargram, steps: Iterable[str], params: ChainParams = ChainParams()) -> Radargram:
    """Apply the selected optional steps in CHAIN_ORDER regardless of the order given."""
    selected = set(steps)
    unknown = selected - set(CHAIN_ORDER)
    if unknown:
        raise ParameterError(f"Unknown preprocessing steps {sorted(unknown)}; known: {list(CHAIN_ORDER)}")
    out = r
    for step in CHAIN_ORDER:
        if step not in selected:
            continue
        if step == "gain":
            out = exp_gain(out, params.gain_alpha)
        elif step == "background":
            out = background_removal(out)
        elif step == "lowpass":
            out = lowpass_gradual(out, params.pass_hz, params.stop_hz)
        logger.debug(f"Applied {step}")
    return out


def chain_entropy(r: Radargram, steps: Iterable[str], params: ChainParams = ChainParams(),
                  levels: int = 256) -> float:
    return information_entropy(quantize(apply_chain(r, steps, params), levels))


def ablation_rows() -> List[Tuple[str, ...]]:
    """Every subset of the optional steps, full chain first, raw input last."""
    rows = []
    for size in range(len(CHAIN_ORDER), -1, -1):
        rows.extend(itertools.combinations(CHAIN_ORDER, size))
    return rows
