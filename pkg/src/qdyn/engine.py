"""Dual-path execution: reference fp32 forward and simulated-quantized forward.

Capture points sit after each weighted layer's trailing batch-norm + relu
(post-activation) and after each residual add's trailing relu; the final
softmax output is always the last trace entry. The quantized path
fake-quantizes the activation at every capture point with its calibrated
range, so downstream layers see the dequantized uint8 view and quantization
error propagates exactly as it would in a deployed graph. Arithmetic between
capture points stays in fp32, and softmax always runs in fp32 on the
dequantized logits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import MissingRangeError, ShapeError
from .graph import (
    Add,
    BatchNorm,
    Conv2D,
    Dense,
    DepthwiseConv2D,
    Dropout,
    Flatten,
    GlobalAvgPool,
    Layer,
    MaxPool,
    ModelGraph,
    ReLU,
    Softmax,
    WEIGHTED,
)
from . import ops
from .quantize import (
    PER_TENSOR,
    RangeRecord,
    WEIGHT_MODES,
    bn_fold,
    bn_inference,
    fake_quant,
    fake_quant_weights,
    quant_params_from_range,
)
from .tensor import Tensor

CaptureTrace = list[tuple[str, Tensor]]


@dataclass(frozen=True)
class CapturePoint:
    """One quantization/observation point of the graph."""

    name: str      # name of the anchor (weighted or add) layer
    anchor: int    # graph index of that layer
    end: int       # graph index after which the activation is taken
    weighted: bool


def capture_points(model: ModelGraph) -> list[CapturePoint]:
    """Capture points in graph order (excluding the final softmax)."""
    layers = model.layers
    points = []
    for i, layer in enumerate(layers):
        is_weighted = isinstance(layer.spec, WEIGHTED)
        if not (is_weighted or isinstance(layer.spec, Add)):
            continue
        end = i
        j = i + 1
        if is_weighted and j < len(layers) and isinstance(layers[j].spec, BatchNorm):
            end = j
            j += 1
        if j < len(layers) and isinstance(layers[j].spec, ReLU):
            end = j
        points.append(CapturePoint(layer.name, i, end, is_weighted))
    return points


def weighted_capture_names(model: ModelGraph) -> list[str]:
    return [p.name for p in capture_points(model) if p.weighted]


def _effective_weights(model: ModelGraph, fold: bool, weight_mode: str | None):
    """(weights, bias) per weighted layer index, BN-folded and, for the quant
    path, fake-quantized; plus the set of BN layer indices absorbed by folds."""
    effective = {}
    skipped = set()
    for i, layer in model.weighted_layers():
        w, b = layer.weight, layer.bias
        if fold:
            nxt = i + 1
            if nxt < len(model.layers) and isinstance(model.layers[nxt].spec, BatchNorm):
                w, b = bn_fold(w, model.layers[nxt].bn, b)
                skipped.add(nxt)
        if weight_mode is not None:
            w = fake_quant_weights(w, weight_mode)
        effective[i] = (w, b)
    return effective, skipped


def _normalize_ranges(ranges) -> dict[str, RangeRecord]:
    if isinstance(ranges, Mapping):
        return dict(ranges)
    return {r.layer: r for r in ranges}


def _check_input(model: ModelGraph, x: Tensor):
    if x.shape[1:] != model.input_shape:
        raise ShapeError(
            f"input shape {x.shape[1:]} does not match model input {model.input_shape}"
        )


def _run(model: ModelGraph, x: Tensor, *, capture: bool, fold: bool,
         weight_mode: str | None, ranges: dict[str, RangeRecord] | None):
    _check_input(model, x)
    effective, skipped_bn = _effective_weights(model, fold, weight_mode)
    points = capture_points(model)
    if ranges is not None:
        for p in points:
            if p.name not in ranges:
                raise MissingRangeError(p.name)
    capture_at = {p.end: p for p in points}

    # outputs that later layers read through input_from / skip_from
    needed = set()
    for layer in model.layers:
        if layer.input_from is not None:
            needed.add(layer.input_from)
        if isinstance(layer.spec, Add):
            needed.add(layer.spec.skip_from)

    trace: CaptureTrace = []
    stored: dict[int, Tensor] = {}
    cur = x
    for i, layer in enumerate(model.layers):
        inp = cur if layer.input_from is None else stored[layer.input_from]
        spec = layer.spec
        if isinstance(spec, Conv2D):
            w, b = effective[i]
            out = ops.conv2d(inp, w, b, spec.stride, spec.padding)
        elif isinstance(spec, DepthwiseConv2D):
            w, b = effective[i]
            out = ops.depthwise_conv2d(inp, w, b, spec.stride, spec.padding)
        elif isinstance(spec, Dense):
            w, b = effective[i]
            out = ops.dense(inp, w, b)
        elif isinstance(spec, BatchNorm):
            out = inp if i in skipped_bn else Tensor(bn_inference(inp.data, layer.bn))
        elif isinstance(spec, ReLU):
            out = ops.relu(inp)
        elif isinstance(spec, MaxPool):
            out = ops.maxpool(inp, spec.kernel, spec.stride)
        elif isinstance(spec, GlobalAvgPool):
            out = ops.global_avg_pool(inp)
        elif isinstance(spec, Flatten):
            out = ops.flatten(inp)
        elif isinstance(spec, Dropout):
            out = inp  # identity at inference
        elif isinstance(spec, Add):
            out = ops.add(inp, stored[spec.skip_from])
        elif isinstance(spec, Softmax):
            out = ops.softmax(inp)
        else:
            raise ShapeError(f"unsupported layer spec {type(spec).__name__}")

        point = capture_at.get(i)
        if point is not None:
            if ranges is not None:
                rec = ranges[point.name]
                out = Tensor(fake_quant(out.data, quant_params_from_range(rec.min, rec.max)))
            if capture:
                trace.append((point.name, out))
        if isinstance(spec, Softmax) and capture:
            trace.append((layer.name, out))
        if i in needed:
            stored[i] = out
        cur = out
    return cur, trace


def forward_fp32(model: ModelGraph, x: Tensor, capture: bool = False,
                 fold_bn: bool = True) -> tuple[Tensor, CaptureTrace]:
    """Reference fp32 pass. With fold_bn=False batch norm runs standalone on
    its moving statistics; the two modes agree to float rounding."""
    return _run(model, x, capture=capture, fold=fold_bn, weight_mode=None, ranges=None)


def forward_quant(model: ModelGraph, ranges: Sequence[RangeRecord] | Mapping[str, RangeRecord],
                  x: Tensor, weight_mode: str = PER_TENSOR,
                  capture: bool = False) -> tuple[Tensor, CaptureTrace]:
    """Simulated-quantized pass: BN-folded fake-quantized weights, activations
    fake-quantized at every capture point with their calibrated ranges."""
    if weight_mode not in WEIGHT_MODES:
        raise ValueError(f"unknown weight mode {weight_mode!r}; expected one of {WEIGHT_MODES}")
    return _run(model, x, capture=capture, fold=True, weight_mode=weight_mode,
                ranges=_normalize_ranges(ranges))
