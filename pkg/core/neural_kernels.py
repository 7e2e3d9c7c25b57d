"""
Forward-pass kernels for the detector's three operators, on H x W x C numpy
tensors with externally supplied weights:

    DySample          dynamic upsampling by an offset-perturbed bilinear grid
    CGLU              gated linear unit with a 3x3 depthwise conv in the gate
    OutlookAttention  centre-token weighted K x K window aggregation, folded back

No training; outputs are deterministic functions of inputs and weights.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Mapping, Tuple, Union

import numpy as np
from scipy.special import erf, expit, softmax

from .errors import FormatError, ParameterError, ShapeError

logger = logging.getLogger(__name__)

TensorHWC = np.ndarray


def _as_hwc(X, name: str = "X") -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or min(X.shape) < 1:
        raise ShapeError(f"{name} must be a non-empty H x W x C tensor, got shape {X.shape}")
    return X


@dataclass(frozen=True)
class LinearWeights:
    """Per-pixel linear layer: y = x @ weight + bias, weight is (in, out)."""
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        weight = np.asarray(self.weight, dtype=np.float64)
        bias = np.asarray(self.bias, dtype=np.float64)
        if weight.ndim != 2:
            raise ShapeError(f"Linear weight must be 2D (in, out), got shape {weight.shape}")
        if bias.shape != (weight.shape[1],):
            raise ShapeError(f"Linear bias shape {bias.shape} does not match out_features {weight.shape[1]}")
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "bias", bias)

    @property
    def in_features(self) -> int:
        return self.weight.shape[0]

    @property
    def out_features(self) -> int:
        return self.weight.shape[1]

    def __call__(self, X: TensorHWC) -> TensorHWC:
        if X.shape[-1] != self.in_features:
            raise ShapeError(f"Linear layer expects {self.in_features} channels, got {X.shape[-1]}")
        return X @ self.weight + self.bias


@dataclass(frozen=True)
class DepthwiseKernel:
    """3 x 3 x C stack, one 3 x 3 kernel per channel."""
    kernels: np.ndarray

    def __post_init__(self):
        k = np.asarray(self.kernels, dtype=np.float64)
        if k.ndim != 3 or k.shape[:2] != (3, 3):
            raise ShapeError(f"Depthwise kernel must be 3 x 3 x C, got shape {k.shape}")
        object.__setattr__(self, "kernels", k)

    @property
    def channels(self) -> int:
        return self.kernels.shape[2]


# =============================================================================
# Rearrangement and sampling
# =============================================================================

def pixel_shuffle(X: TensorHWC, s: int) -> TensorHWC:
    """Depth-to-space: H x W x (C' s^2) -> sH x sW x C'. Channel c' s^2 + p s + q lands at (i s + p, j s + q)."""
    X = _as_hwc(X)
    if s < 1:
        raise ParameterError(f"Shuffle factor must be >= 1, got {s}")
    H, W, C = X.shape
    if C % (s * s):
        raise ShapeError(f"Channel count {C} is not divisible by s^2 = {s * s}")
    c_out = C // (s * s)
    return X.reshape(H, W, c_out, s, s).transpose(0, 3, 1, 4, 2).reshape(H * s, W * s, c_out)


def pixel_unshuffle(X: TensorHWC, s: int) -> TensorHWC:
    """Space-to-depth, the inverse of `pixel_shuffle`."""
    X = _as_hwc(X)
    if s < 1:
        raise ParameterError(f"Shuffle factor must be >= 1, got {s}")
    H, W, C = X.shape
    if H % s or W % s:
        raise ShapeError(f"Spatial size {H} x {W} is not divisible by {s}")
    return X.reshape(H // s, s, W // s, s, C).transpose(0, 2, 4, 1, 3).reshape(H // s, W // s, C * s * s)


def static_grid(H: int, W: int, s: int) -> np.ndarray:
    """
    Half-pixel-aligned upsampling grid in input pixel coordinates.

    Output pixel (P, Q) samples x = (Q + 0.5) / s - 0.5, y = (P + 0.5) / s - 0.5.
    Shape (sH, sW, 2) with [..., 0] = x (column) and [..., 1] = y (row).
    """
    ys = (np.arange(H * s) + 0.5) / s - 0.5
    xs = (np.arange(W * s) + 0.5) / s - 0.5
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx, gy], axis=-1)


def grid_sample_bilinear(X: TensorHWC, S: np.ndarray) -> TensorHWC:
    """
    Bilinear interpolation of X at grid S (..., 2) of (x, y) pixel coordinates.

    Coordinates outside the input are clamped to the border, so integer
    coordinates reproduce input values exactly.
    """
    X = _as_hwc(X)
    S = np.asarray(S, dtype=np.float64)
    if S.shape[-1] != 2:
        raise ShapeError(f"Sampling grid must end in (x, y) pairs, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise ParameterError("Sampling grid contains non-finite coordinates")
    H, W, _ = X.shape

    x = np.clip(S[..., 0], 0.0, W - 1)
    y = np.clip(S[..., 1], 0.0, H - 1)
    x0 = np.clip(np.floor(x).astype(np.int64), 0, max(W - 2, 0))
    y0 = np.clip(np.floor(y).astype(np.int64), 0, max(H - 2, 0))
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    wx = (x - x0)[..., None]
    wy = (y - y0)[..., None]

    top = X[y0, x0] * (1.0 - wx) + X[y0, x1] * wx
    bottom = X[y1, x0] * (1.0 - wx) + X[y1, x1] * wx
    return top * (1.0 - wy) + bottom * wy


def bilinear_upsample(X: TensorHWC, s: int) -> TensorHWC:
    X = _as_hwc(X)
    H, W, _ = X.shape
    return grid_sample_bilinear(X, static_grid(H, W, s))


# =============================================================================
# DySample
# =============================================================================

def dysample_offsets(X: TensorHWC, w1: LinearWeights, w2: LinearWeights, s: int) -> np.ndarray:
    """
    O = 0.5 * sigmoid(linear1(X)) * linear2(X), shape H x W x 2s^2.

    The first s^2 components are x offsets, the next s^2 y offsets, one per
    sub-position of the s x s output block.
    """
    X = _as_hwc(X)
    if s < 1:
        raise ParameterError(f"Upsampling factor must be >= 1, got {s}")
    C = X.shape[2]
    for name, w in (("linear1", w1), ("linear2", w2)):
        if w.in_features != C or w.out_features != 2 * s * s:
            raise ShapeError(
                f"{name} must map {C} -> {2 * s * s} features, got {w.in_features} -> {w.out_features}"
            )
    return 0.5 * expit(w1(X)) * w2(X)


def dysample_upsample(X: TensorHWC, w1: LinearWeights, w2: LinearWeights, s: int) -> TensorHWC:
    """Sample X at S = G + O, offsets pixel-shuffled onto the s-times grid."""
    X = _as_hwc(X)
    H, W, _ = X.shape
    offsets = dysample_offsets(X, w1, w2, s)
    ss = s * s
    dx = pixel_shuffle(offsets[..., :ss], s)[..., 0]
    dy = pixel_shuffle(offsets[..., ss:], s)[..., 0]
    grid = static_grid(H, W, s) + np.stack([dx, dy], axis=-1)
    return grid_sample_bilinear(X, grid)


# =============================================================================
# CGLU
# =============================================================================

def gelu(x: np.ndarray) -> np.ndarray:
    """Exact GELU, x * Phi(x)."""
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)))


def depthwise_conv3x3(X: TensorHWC, dk: DepthwiseKernel) -> TensorHWC:
    """Zero-padded 3 x 3 depthwise cross-correlation."""
    X = _as_hwc(X)
    H, W, C = X.shape
    if dk.channels != C:
        raise ShapeError(f"Depthwise kernel has {dk.channels} channels, input has {C}")
    padded = np.pad(X, ((1, 1), (1, 1), (0, 0)))
    out = np.zeros_like(X)
    for a in range(3):
        for b in range(3):
            out += padded[a:a + H, b:b + W, :] * dk.kernels[a, b, :]
    return out


def cglu(X: TensorHWC, w1: LinearWeights, w2: LinearWeights, dk: DepthwiseKernel) -> TensorHWC:
    """Linear1(X) * GELU(DWConv(Linear2(X)))."""
    X = _as_hwc(X)
    C = X.shape[2]
    if w1.in_features != C or w2.in_features != C:
        raise ShapeError(f"CGLU linears must take {C} channels, got {w1.in_features} and {w2.in_features}")
    if w1.out_features != w2.out_features or dk.channels != w1.out_features:
        raise ShapeError(
            f"CGLU widths disagree: linear1 -> {w1.out_features}, linear2 -> {w2.out_features}, "
            f"kernel {dk.channels}"
        )
    return w1(X) * gelu(depthwise_conv3x3(w2(X), dk))


# =============================================================================
# Outlook attention
# =============================================================================

def _check_window(K: int):
    if K < 1 or K % 2 == 0:
        raise ParameterError(f"Window size K must be a positive odd number, got {K}")


def unfold(V: TensorHWC, K: int) -> np.ndarray:
    """
    K x K windows around every position, zero-padded: shape (C, H W, K^2).

    Element (c, n, m) with n = i W + j and m = a K + b is V[i + a - K//2, j + b - K//2, c].
    """
    V = _as_hwc(V, "V")
    _check_window(K)
    H, W, C = V.shape
    p = K // 2
    padded = np.pad(V, ((p, p), (p, p), (0, 0)))
    cols = np.empty((C, H * W, K * K), dtype=np.float64)
    for a in range(K):
        for b in range(K):
            cols[:, :, a * K + b] = padded[a:a + H, b:b + W, :].reshape(H * W, C).T
    return cols


def fold(cols: np.ndarray, H: int, W: int, K: int) -> TensorHWC:
    """Adjoint of `unfold`: accumulate every window element back onto its cell."""
    _check_window(K)
    cols = np.asarray(cols, dtype=np.float64)
    if cols.ndim != 3 or cols.shape[1:] != (H * W, K * K):
        raise ShapeError(f"Expected windows of shape (C, {H * W}, {K * K}), got {cols.shape}")
    C = cols.shape[0]
    p = K // 2
    out = np.zeros((H + 2 * p, W + 2 * p, C), dtype=np.float64)
    for a in range(K):
        for b in range(K):
            out[a:a + H, b:b + W, :] += cols[:, :, a * K + b].T.reshape(H, W, C)
    return out[p:p + H, p:p + W, :]


def _outlook_inputs(X, wv: LinearWeights, wa: LinearWeights, K: int):
    X = _as_hwc(X)
    _check_window(K)
    C = X.shape[2]
    if wv.in_features != C or wv.out_features != C:
        raise ShapeError(f"Value projection must map {C} -> {C}, got {wv.in_features} -> {wv.out_features}")
    if wa.in_features != C or wa.out_features != K * K:
        raise ShapeError(
            f"Attention projection must map {C} -> {K * K}, got {wa.in_features} -> {wa.out_features}"
        )
    return X, wv(X), softmax(wa(X), axis=-1)


def outlook_aggregate(X: TensorHWC, wv: LinearWeights, wa: LinearWeights, K: int
                      ) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pre-fold window outputs (C, H W) and attention weights (H, W, K^2).

    Each position's K^2 weights come from its own token and are shared
    across channels.
    """
    X, V, A = _outlook_inputs(X, wv, wa, K)
    H, W, _ = X.shape
    window_out = np.einsum("cnm,nm->cn", unfold(V, K), A.reshape(H * W, K * K))
    return window_out, A


def outlook_attention(X: TensorHWC, wv: LinearWeights, wa: LinearWeights, K: int) -> TensorHWC:
    """Aggregate each window, repeat the result over the K^2 offsets and fold back to H x W x C."""
    X = _as_hwc(X)
    H, W, _ = X.shape
    window_out, _ = outlook_aggregate(X, wv, wa, K)
    return fold(np.repeat(window_out[:, :, None], K * K, axis=2), H, W, K)


# =============================================================================
# Weights files
# =============================================================================

def load_weights(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    """
    Read a weights document: {name: {"shape": [...], "data": [...]}}.

    Data is row-major; its length must equal the product of the shape.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise FormatError(f"cannot read weights: {e.strerror}", path) from e
    except json.JSONDecodeError as e:
        raise FormatError(f"invalid JSON: {e.msg}", path, e.lineno) from e
    if not isinstance(raw, dict):
        raise FormatError("weights document must be an object of named arrays", path)

    weights = {}
    for name, entry in sorted(raw.items()):
        if not isinstance(entry, dict) or "shape" not in entry or "data" not in entry:
            raise FormatError(f"array {name!r} needs 'shape' and 'data'", path)
        shape = tuple(int(d) for d in entry["shape"])
        data = np.asarray(entry["data"], dtype=np.float64).ravel()
        if data.size != int(np.prod(shape)):
            raise ShapeError(f"{path}: array {name!r} has {data.size} values for shape {shape}")
        weights[name] = data.reshape(shape)
    logger.debug(f"Loaded {len(weights)} arrays from {path}")
    return weights


def save_weights(weights: Mapping[str, np.ndarray], path: Union[str, Path]) -> None:
    doc = {
        name: {"shape": list(np.shape(arr)), "data": np.asarray(arr, dtype=np.float64).ravel().tolist()}
        for name, arr in weights.items()
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def linear_from(weights: Mapping[str, np.ndarray], prefix: str) -> LinearWeights:
    try:
        return LinearWeights(weights[f"{prefix}.weight"], weights[f"{prefix}.bias"])
    except KeyError as e:
        raise ShapeError(f"Missing weight array {e.args[0]!r}") from e


# Array names each kernel consumes
KERNEL_ARRAYS = {
    "dysample": ("linear1.weight", "linear1.bias", "linear2.weight", "linear2.bias"),
    "cglu": ("linear1.weight", "linear1.bias", "linear2.weight", "linear2.bias", "dwconv"),
    "outlook": ("value.weight", "value.bias", "attn.weight", "attn.bias"),
}


def validate_kernel_weights(weights: Mapping[str, np.ndarray], kernel: str, channels: int,
                            factor: int = 2) -> None:
    """
    Check presence and shapes of a kernel's arrays before any evaluation.

    `factor` is the upsampling factor s for dysample and the window size K
    for outlook; cglu ignores it.
    """
    if kernel not in KERNEL_ARRAYS:
        raise ParameterError(f"Unknown kernel {kernel!r}; known: {sorted(KERNEL_ARRAYS)}")
    missing = [name for name in KERNEL_ARRAYS[kernel] if name not in weights]
    if missing:
        raise ShapeError(f"{kernel} weights missing arrays {missing}")

    if kernel == "dysample":
        w1, w2 = linear_from(weights, "linear1"), linear_from(weights, "linear2")
        expected = (channels, 2 * factor * factor)
        for name, w in (("linear1", w1), ("linear2", w2)):
            if (w.in_features, w.out_features) != expected:
                raise ShapeError(f"dysample {name} is {w.weight.shape}, expected {expected}")
    elif kernel == "cglu":
        w1, w2 = linear_from(weights, "linear1"), linear_from(weights, "linear2")
        dk = DepthwiseKernel(weights["dwconv"])
        if w1.in_features != channels or w2.in_features != channels:
            raise ShapeError(f"cglu linears must take {channels} channels")
        if not w1.out_features == w2.out_features == dk.channels:
            raise ShapeError(
                f"cglu widths disagree: {w1.out_features}, {w2.out_features}, kernel {dk.channels}"
            )
    else:
        _check_window(factor)
        wv, wa = linear_from(weights, "value"), linear_from(weights, "attn")
        if (wv.in_features, wv.out_features) != (channels, channels):
            raise ShapeError(f"outlook value projection is {wv.weight.shape}, expected {(channels, channels)}")
        if (wa.in_features, wa.out_features) != (channels, factor * factor):
            raise ShapeError(
                f"outlook attention projection is {wa.weight.shape}, expected {(channels, factor * factor)}"
            )
