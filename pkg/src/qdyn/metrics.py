"""Distributional statistics and quantization-error metrics.

Layerwise statistics: dynamic range, per-channel ranges, and average
precision (mean per-channel-range/tensor-range ratio, a channel/tensor
mismatch indicator in (0, 1]). Error metrics: QMSE/QCE/QKL-Div between fp32
and dequantized-uint8 activations, computed on 256-bin histograms for hidden
layers and directly on softmax rows for the model output. Natural log
throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import CaptureTrace, capture_points
from .graph import BatchNorm, ModelGraph
from .quantize import bn_fold
from .tensor import Tensor, WeightTensor

HISTOGRAM_BINS = 256  # one bin per uint8 code
HISTOGRAM_SMOOTHING = 1e-10

WEIGHTS = "weights"
BN_FOLD_WEIGHTS = "bn_fold_weights"
ACTIVATIONS = "activations"


def per_channel_ranges(values: np.ndarray) -> np.ndarray:
    """max - min per channel of the last axis."""
    flat = values.reshape(-1, values.shape[-1]).astype(np.float64)
    return flat.max(axis=0) - flat.min(axis=0)


def average_precision(channel_ranges, tensor_range: float) -> float:
    """Mean per-channel range over the whole-tensor range; 1.0 means every
    channel spans the full tensor range, low values signal mismatch."""
    ranges = np.asarray(channel_ranges, dtype=np.float64)
    if ranges.size < 1:
        raise ValueError("need at least one channel range")
    if not tensor_range > 0:
        raise ValueError(f"tensor range must be > 0, got {tensor_range}")
    return float(ranges.mean() / tensor_range)


@dataclass(frozen=True)
class Histogram:
    """256 uniform bins over a shared support, smoothed so no bin is empty."""

    edges: np.ndarray  # bins + 1 ascending edges
    probs: np.ndarray  # sums to 1

    def entropy(self) -> float:
        return float(-np.sum(self.probs * np.log(self.probs)))


def build_histogram(fp32_values: np.ndarray, quant_values: np.ndarray,
                    bins: int = HISTOGRAM_BINS,
                    smoothing: float = HISTOGRAM_SMOOTHING) -> tuple[Histogram, Histogram]:
    """Histograms of both sample sets over their shared union support."""
    a = np.asarray(fp32_values, dtype=np.float64).reshape(-1)
    b = np.asarray(quant_values, dtype=np.float64).reshape(-1)
    if a.size == 0 or b.size == 0:
        raise ValueError("histogram inputs must be non-empty")
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    edges = np.linspace(lo, hi, bins + 1)

    def hist(values):
        counts, _ = np.histogram(values, bins=edges)
        probs = counts / counts.sum() + smoothing
        probs /= probs.sum()
        return Histogram(edges=edges, probs=probs)

    return hist(a), hist(b)


def qmse(a: Tensor | np.ndarray, b: Tensor | np.ndarray) -> float:
    """Mean squared error over all elements, accumulated in float64."""
    av = (a.data if isinstance(a, Tensor) else np.asarray(a)).astype(np.float64)
    bv = (b.data if isinstance(b, Tensor) else np.asarray(b)).astype(np.float64)
    if av.shape != bv.shape:
        raise ValueError(f"qmse operands must share a shape, got {av.shape} vs {bv.shape}")
    return float(np.mean((av - bv) ** 2))


def _check_edges(p: Histogram, q: Histogram):
    if p.edges.shape != q.edges.shape or not np.array_equal(p.edges, q.edges):
        raise ValueError("histograms must share bin edges")


def qce(p: Histogram, q: Histogram) -> float:
    """Cross-entropy -sum p ln q (natural log)."""
    _check_edges(p, q)
    return float(-np.sum(p.probs * np.log(q.probs)))


def qkl(p: Histogram, q: Histogram) -> float:
    """KL divergence sum p ln(p/q) (natural log)."""
    _check_edges(p, q)
    return float(np.sum(p.probs * np.log(p.probs / q.probs)))


def output_metrics(fp32_softmax: Tensor, q_softmax: Tensor,
                   tol: float = 1e-4) -> dict[str, float]:
    """QMSE/QCE/QKL-Div between the two softmax outputs, averaged over the
    batch; QCE and QKL-Div are computed rowwise on the class distributions."""
    p = fp32_softmax.data.astype(np.float64).reshape(fp32_softmax.shape[0], -1)
    q = q_softmax.data.astype(np.float64).reshape(q_softmax.shape[0], -1)
    if p.shape != q.shape:
        raise ValueError(f"softmax outputs must share a shape, got {p.shape} vs {q.shape}")
    for name, rows in (("fp32", p), ("quant", q)):
        err = np.abs(rows.sum(axis=1) - 1.0).max()
        if err > tol:
            raise ValueError(f"{name} softmax rows are not normalized (max err {err:.2e})")
    # exp underflow to exact zero is possible for extreme logits; floor before log
    q_safe = np.maximum(q, np.finfo(np.float64).tiny)
    p_safe = np.maximum(p, np.finfo(np.float64).tiny)
    ce = float(np.mean(-np.sum(p * np.log(q_safe), axis=1)))
    kl = float(np.mean(np.sum(p * np.log(p_safe / q_safe), axis=1)))
    return {"qmse": qmse(fp32_softmax, q_softmax), "qce": ce, "qkl_div": kl}


@dataclass(frozen=True)
class LayerStats:
    """Range/precision record for one tensor of one weighted layer."""

    layer: str
    kind: str  # weights | bn_fold_weights | activations
    range: float
    channel_ranges: tuple[float, ...]
    average_precision: float

    @property
    def num_channels(self) -> int:
        return len(self.channel_ranges)


def _stats(layer: str, kind: str, values: np.ndarray) -> LayerStats:
    ranges = per_channel_ranges(values)
    tensor_range = float(values.max() - values.min())
    precision = 1.0 if tensor_range == 0.0 else average_precision(ranges, tensor_range)
    return LayerStats(layer, kind, tensor_range, tuple(float(r) for r in ranges), precision)


def layer_stats(model: ModelGraph, trace: CaptureTrace | None = None) -> list[LayerStats]:
    """Weights, BN-folded weights and (when a trace is supplied) activation
    statistics for every weighted layer, in capture order.

    The weight channel is the output channel; for depthwise layers it is the
    single per-input-channel kernel. Activation channels are the last axis of
    the captured tensor, pooled over the batch.
    """
    by_name = dict(trace) if trace is not None else {}
    stats: list[LayerStats] = []
    for point in capture_points(model):
        if not point.weighted:
            continue
        layer = model.layers[point.anchor]
        w: WeightTensor = layer.weight
        stats.append(_stats(point.name, WEIGHTS, w.data))
        nxt = point.anchor + 1
        if nxt < len(model.layers) and isinstance(model.layers[nxt].spec, BatchNorm):
            folded, _ = bn_fold(w, model.layers[nxt].bn, layer.bias)
            stats.append(_stats(point.name, BN_FOLD_WEIGHTS, folded.data))
        else:
            stats.append(_stats(point.name, BN_FOLD_WEIGHTS, w.data))
        if point.name in by_name:
            stats.append(_stats(point.name, ACTIVATIONS, by_name[point.name].data))
    return stats
