"""Affine uint8 quantization: parameter derivation, (de)quantization,
percentile-based range calibration, and batch-norm folding.

Scheme: q = clamp(round(x / scale) + zero_point, 0, 255) with real zero
exactly representable. Rounding is half away from zero on every platform.
Weights are quantized from their exact min/max; activations use calibrated,
percentile-clipped ranges. Everything simulates quantization by
quantize-then-dequantize while the arithmetic itself stays in fp32.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import BatchNormParams
from .tensor import DTYPE, Tensor, WeightTensor

QMIN = 0
QMAX = 255
NUM_BITS = 8

# Half-width applied to a degenerate (min == max) range so scale stays > 0.
DEGENERATE_WIDTH = 1e-6

PER_TENSOR = "per_tensor"
PER_CHANNEL = "per_channel"
WEIGHT_MODES = (PER_TENSOR, PER_CHANNEL)


@dataclass(frozen=True)
class QuantParams:
    """Affine uint8 mapping: real = scale * (q - zero_point)."""

    scale: float
    zero_point: int

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError(f"scale must be finite and > 0, got {self.scale}")
        if not QMIN <= self.zero_point <= QMAX:
            raise ValueError(f"zero_point must be in [{QMIN}, {QMAX}], got {self.zero_point}")

    @property
    def min_value(self) -> float:
        """Smallest representable real value (nudged range minimum)."""
        return self.scale * (QMIN - self.zero_point)

    @property
    def max_value(self) -> float:
        return self.scale * (QMAX - self.zero_point)


@dataclass(frozen=True)
class QTensor:
    """uint8 payload plus the parameters needed to dequantize it.

    ``params`` is a single QuantParams for per-tensor encoding or a tuple
    with one entry per channel of the last axis.
    """

    data: np.ndarray
    params: QuantParams | tuple[QuantParams, ...]

    def __post_init__(self):
        if self.data.dtype != np.uint8:
            raise ValueError("QTensor payload must be uint8")
        if isinstance(self.params, tuple) and len(self.params) != self.data.shape[-1]:
            raise ValueError(
                f"per-channel params count {len(self.params)} does not match "
                f"channel dim {self.data.shape[-1]}"
            )

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape


@dataclass(frozen=True)
class RangeRecord:
    """Calibrated live range of one capture point."""

    layer: str
    min: float
    max: float
    source: str = "activations"  # weights | bn_fold_weights | activations

    def __post_init__(self):
        if not (math.isfinite(self.min) and math.isfinite(self.max)):
            raise ValueError(f"range for {self.layer!r} must be finite")
        if not self.min < self.max:
            raise ValueError(f"range for {self.layer!r} must satisfy min < max")

    def scaled(self, factor: float) -> "RangeRecord":
        return RangeRecord(self.layer, self.min * factor, self.max * factor, self.source)


def widen_range(rmin: float, rmax: float) -> tuple[float, float]:
    """Make a raw range usable: split degenerate ranges, then include zero."""
    rmin, rmax = float(rmin), float(rmax)
    if not (math.isfinite(rmin) and math.isfinite(rmax)):
        raise ValueError(f"range must be finite, got ({rmin}, {rmax})")
    if rmin > rmax:
        raise ValueError(f"range must have min <= max, got ({rmin}, {rmax})")
    if rmin == rmax:
        rmin, rmax = rmin - DEGENERATE_WIDTH, rmax + DEGENERATE_WIDTH
    return min(rmin, 0.0), max(rmax, 0.0)


def quant_params_from_range(rmin: float, rmax: float) -> QuantParams:
    """Scale and zero point for a real range; zero ends up exactly representable."""
    rmin, rmax = widen_range(rmin, rmax)
    scale = (rmax - rmin) / (QMAX - QMIN)
    # -rmin/scale >= 0, so half away from zero is floor(x + 0.5)
    zero_point = int(min(max(math.floor(-rmin / scale + 0.5), QMIN), QMAX))
    return QuantParams(scale=scale, zero_point=zero_point)


def round_half_away(v: np.ndarray) -> np.ndarray:
    """Round to nearest with ties away from zero (not banker's rounding)."""
    return np.trunc(v + np.copysign(0.5, v))


def _encode(values: np.ndarray, scale, zero_point) -> np.ndarray:
    q = round_half_away(values.astype(np.float64) / scale) + zero_point
    return np.clip(q, QMIN, QMAX).astype(np.uint8)


def quantize(x: Tensor | np.ndarray, params: QuantParams) -> QTensor:
    values = x.data if isinstance(x, Tensor) else np.asarray(x)
    return QTensor(_encode(values, params.scale, params.zero_point), params)


def dequantize(q: QTensor) -> np.ndarray:
    """fp32 array of scale * (code - zero_point); exact zero at the zero point."""
    if isinstance(q.params, tuple):
        scales = np.array([p.scale for p in q.params], dtype=np.float64)
        zps = np.array([p.zero_point for p in q.params], dtype=np.float64)
        real = (q.data.astype(np.float64) - zps) * scales
    else:
        real = (q.data.astype(np.float64) - q.params.zero_point) * q.params.scale
    return real.astype(DTYPE)


def fake_quant(values: np.ndarray, params: QuantParams) -> np.ndarray:
    """Quantize-then-dequantize; the simulated uint8 view of fp32 values."""
    return dequantize(quantize(values, params))


def percentile_range(samples: np.ndarray, p: float) -> tuple[float, float]:
    """Nearest-rank percentile clip: values at ranks floor(p*(n-1)) and
    ceil((1-p)*(n-1)) of the sorted samples, clipping p mass per tail."""
    flat = np.asarray(samples).reshape(-1)
    if flat.size == 0:
        raise ValueError("percentile_range needs at least one sample")
    if not 0.0 <= p < 0.5:
        raise ValueError(f"percentile fraction must be in [0, 0.5), got {p}")
    n = flat.size
    lo_rank = math.floor(p * (n - 1))
    hi_rank = math.ceil((1.0 - p) * (n - 1))
    picked = np.partition(flat, [lo_rank, hi_rank])
    return float(picked[lo_rank]), float(picked[hi_rank])


def bn_fold(w: WeightTensor, bn: BatchNormParams,
            bias: np.ndarray | None = None) -> tuple[WeightTensor, np.ndarray]:
    """Fold inference-mode batch norm into the preceding layer.

    w_fold = gamma * w / sqrt(moving_var + eps) per output channel, and
    bias_fold = beta + gamma * (bias - moving_mean) / sqrt(moving_var + eps).
    """
    channels = w.out_channels
    if bn.channels != channels:
        raise ValueError(
            f"batch norm has {bn.channels} channels but weights have {channels}"
        )
    if np.any(bn.moving_var < 0):
        raise ValueError("moving_var must be >= 0")
    gamma = bn.effective_gamma().astype(np.float64)
    inv_std = gamma / np.sqrt(bn.moving_var.astype(np.float64) + bn.epsilon)
    folded = WeightTensor(w.layout, (w.data.astype(np.float64) * inv_std).astype(DTYPE))
    b0 = np.zeros(channels, dtype=np.float64) if bias is None else bias.astype(np.float64)
    folded_bias = (bn.beta.astype(np.float64)
                   + (b0 - bn.moving_mean.astype(np.float64)) * inv_std).astype(DTYPE)
    return folded, folded_bias


def bn_inference(values: np.ndarray, bn: BatchNormParams) -> np.ndarray:
    """Standalone inference-mode batch norm over the last (channel) axis."""
    gamma = bn.effective_gamma()
    inv_std = gamma / np.sqrt(bn.moving_var + DTYPE(bn.epsilon))
    return (values - bn.moving_mean) * inv_std + bn.beta


def weight_quant_params(w: WeightTensor, mode: str) -> QuantParams | tuple[QuantParams, ...]:
    """Quantization params for a weight tensor from its exact min/max ranges."""
    if mode == PER_TENSOR:
        return quant_params_from_range(float(w.data.min()), float(w.data.max()))
    if mode == PER_CHANNEL:
        flat = w.data.reshape(-1, w.out_channels)
        return tuple(
            quant_params_from_range(float(flat[:, c].min()), float(flat[:, c].max()))
            for c in range(w.out_channels)
        )
    raise ValueError(f"unknown weight mode {mode!r}; expected one of {WEIGHT_MODES}")


def quantize_weights_per_tensor(w: WeightTensor) -> QTensor:
    return quantize(w.data, weight_quant_params(w, PER_TENSOR))


def quantize_weights_per_channel(w: WeightTensor) -> QTensor:
    """Independent params per channel of the last axis (output channel for
    dense convs, the single per-input-channel kernel for depthwise)."""
    params = weight_quant_params(w, PER_CHANNEL)
    codes = np.empty(w.data.shape, dtype=np.uint8)
    flat = w.data.reshape(-1, w.out_channels)
    out = codes.reshape(-1, w.out_channels)
    for c, p in enumerate(params):
        out[:, c] = _encode(flat[:, c], p.scale, p.zero_point)
    return QTensor(codes, params)


def fake_quant_weights(w: WeightTensor, mode: str) -> WeightTensor:
    """Weights as the quantized model sees them (quantize-then-dequantize)."""
    if mode == PER_TENSOR:
        q = quantize_weights_per_tensor(w)
    else:
        q = quantize_weights_per_channel(w)
    return WeightTensor(w.layout, dequantize(q))
