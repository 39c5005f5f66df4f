"""Typed layer specifications and the ordered-DAG model container.

A model is an ordered list of layers. Each layer consumes the previous
layer's output unless it names an explicit ``input_from`` index; ``Add``
additionally reads a second operand via ``skip_from``. That is enough for
linear chains plus residual blocks with projection shortcuts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GraphError
from .ops import SAME, out_size
from .tensor import DTYPE, WeightTensor


@dataclass(frozen=True)
class Conv2D:
    out_channels: int
    kernel: int
    stride: int = 1
    padding: str = SAME
    has_bias: bool = False


@dataclass(frozen=True)
class DepthwiseConv2D:
    kernel: int
    stride: int = 1
    padding: str = SAME
    has_bias: bool = False


@dataclass(frozen=True)
class Dense:
    out: int


@dataclass(frozen=True)
class BatchNorm:
    use_gamma: bool = True
    epsilon: float = 1e-3


@dataclass(frozen=True)
class ReLU:
    pass


@dataclass(frozen=True)
class MaxPool:
    kernel: int
    stride: int


@dataclass(frozen=True)
class GlobalAvgPool:
    pass


@dataclass(frozen=True)
class Flatten:
    pass


@dataclass(frozen=True)
class Add:
    skip_from: int  # index of an earlier layer with an identical output shape


@dataclass(frozen=True)
class Softmax:
    pass


@dataclass(frozen=True)
class Dropout:
    """Identity at inference; keep_prob is recorded for provenance only."""

    keep_prob: float = 0.5


LayerSpec = (
    Conv2D | DepthwiseConv2D | Dense | BatchNorm | ReLU | MaxPool
    | GlobalAvgPool | Flatten | Add | Softmax | Dropout
)

WEIGHTED = (Conv2D, DepthwiseConv2D, Dense)


@dataclass(frozen=True)
class BatchNormParams:
    """Inference-time batch-norm statistics and affine parameters.

    ``gamma`` is None when the norm was configured without a scaling
    parameter, in which case folding uses gamma = 1 per channel.
    """

    beta: np.ndarray
    moving_mean: np.ndarray
    moving_var: np.ndarray
    gamma: np.ndarray | None = None
    epsilon: float = 1e-3

    def __post_init__(self):
        for name in ("beta", "moving_mean", "moving_var"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=DTYPE))
        if self.gamma is not None:
            object.__setattr__(self, "gamma", np.asarray(self.gamma, dtype=DTYPE))
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if np.any(self.moving_var < 0):
            raise ValueError("moving_var must be >= 0 elementwise")

    @property
    def channels(self) -> int:
        return self.beta.shape[0]

    def effective_gamma(self) -> np.ndarray:
        if self.gamma is None:
            return np.ones(self.channels, dtype=DTYPE)
        return self.gamma


@dataclass
class Layer:
    """One node of the graph: a spec plus its parameters, if any."""

    name: str
    spec: LayerSpec
    weight: WeightTensor | None = None
    bias: np.ndarray | None = None
    bn: BatchNormParams | None = None
    input_from: int | None = None  # default: previous layer's output


@dataclass
class ModelGraph:
    """Ordered layers over a fixed (h, w, c) input shape."""

    input_shape: tuple[int, int, int]
    layers: list[Layer] = field(default_factory=list)

    def layer_index(self, name: str) -> int:
        for i, layer in enumerate(self.layers):
            if layer.name == name:
                return i
        raise KeyError(name)

    def infer_shapes(self) -> list[tuple[int, int, int]]:
        """Per-layer output shapes as (h, w, c); raises GraphError on any violation."""
        shapes: list[tuple[int, int, int]] = []

        def shape_in(i: int, layer: Layer) -> tuple[int, int, int]:
            src = layer.input_from
            if src is None:
                return self.input_shape if i == 0 else shapes[i - 1]
            if not 0 <= src < i:
                raise GraphError(f"layer {layer.name!r} input_from {src} is not an earlier layer")
            return shapes[src]

        for i, layer in enumerate(self.layers):
            h, w, c = shape_in(i, layer)
            spec = layer.spec
            if isinstance(spec, Conv2D):
                kh, kw, in_c, out_c = layer.weight.shape
                if in_c != c:
                    raise GraphError(
                        f"layer {layer.name!r} expects {in_c} input channels, gets {c}"
                    )
                if (kh, kw, out_c) != (spec.kernel, spec.kernel, spec.out_channels):
                    raise GraphError(f"layer {layer.name!r} weight shape mismatch")
                oh = out_size(h, spec.kernel, spec.stride, spec.padding)
                ow = out_size(w, spec.kernel, spec.stride, spec.padding)
                shapes.append((oh, ow, spec.out_channels))
            elif isinstance(spec, DepthwiseConv2D):
                kh, kw, wc = layer.weight.shape
                if wc != c:
                    raise GraphError(
                        f"layer {layer.name!r} depthwise kernel has {wc} channels, input has {c}"
                    )
                oh = out_size(h, spec.kernel, spec.stride, spec.padding)
                ow = out_size(w, spec.kernel, spec.stride, spec.padding)
                shapes.append((oh, ow, c))
            elif isinstance(spec, Dense):
                feats = h * w * c
                in_f, out_f = layer.weight.shape
                if feats != in_f:
                    raise GraphError(
                        f"layer {layer.name!r} expects {in_f} features, gets {feats}"
                    )
                shapes.append((1, 1, spec.out))
            elif isinstance(spec, BatchNorm):
                if i == 0 or not isinstance(self.layers[i - 1].spec, WEIGHTED):
                    raise GraphError(
                        f"batch norm {layer.name!r} must directly follow a weighted layer"
                    )
                if layer.bn is None or layer.bn.channels != c:
                    raise GraphError(f"batch norm {layer.name!r} has wrong channel count")
                shapes.append((h, w, c))
            elif isinstance(spec, MaxPool):
                shapes.append((
                    out_size(h, spec.kernel, spec.stride, "valid"),
                    out_size(w, spec.kernel, spec.stride, "valid"),
                    c,
                ))
            elif isinstance(spec, GlobalAvgPool):
                shapes.append((1, 1, c))
            elif isinstance(spec, Flatten):
                shapes.append((1, 1, h * w * c))
            elif isinstance(spec, Add):
                if not 0 <= spec.skip_from < i:
                    raise GraphError(f"add {layer.name!r} skip_from must reference an earlier layer")
                other = shapes[spec.skip_from]
                if other != (h, w, c):
                    raise GraphError(
                        f"add {layer.name!r} operand shapes differ: {(h, w, c)} vs {other}"
                    )
                shapes.append((h, w, c))
            elif isinstance(spec, (ReLU, Softmax, Dropout)):
                shapes.append((h, w, c))
            else:
                raise GraphError(f"unknown layer spec {type(spec).__name__}")
        return shapes

    def validate(self):
        names = [layer.name for layer in self.layers]
        if len(set(names)) != len(names):
            raise GraphError("layer names must be unique")
        self.infer_shapes()

    def output_shape(self) -> tuple[int, int, int]:
        return self.infer_shapes()[-1]

    def weighted_layers(self) -> list[tuple[int, Layer]]:
        return [(i, l) for i, l in enumerate(self.layers) if isinstance(l.spec, WEIGHTED)]

    def param_count(self) -> int:
        total = 0
        for layer in self.layers:
            if layer.weight is not None:
                total += layer.weight.data.size
            if layer.bias is not None:
                total += layer.bias.size
            if layer.bn is not None:
                bn = layer.bn
                total += bn.beta.size + bn.moving_mean.size + bn.moving_var.size
                if bn.gamma is not None:
                    total += bn.gamma.size
        return total


def conv_macs(kernel: int, in_c: int, out_c: int, out_h: int, out_w: int) -> int:
    """Multiply-accumulates of one dense convolution on one image."""
    return kernel * kernel * in_c * out_c * out_h * out_w


def depthwise_macs(kernel: int, channels: int, out_h: int, out_w: int) -> int:
    """Multiply-accumulates of one depthwise convolution on one image."""
    return kernel * kernel * channels * out_h * out_w


def model_macs(model: ModelGraph) -> dict[str, int]:
    """Per-weighted-layer MACs for a single image, keyed by layer name."""
    shapes = model.infer_shapes()
    macs: dict[str, int] = {}
    for i, layer in enumerate(model.layers):
        spec = layer.spec
        oh, ow, oc = shapes[i]
        if isinstance(spec, Conv2D):
            in_c = layer.weight.shape[2]
            macs[layer.name] = conv_macs(spec.kernel, in_c, oc, oh, ow)
        elif isinstance(spec, DepthwiseConv2D):
            macs[layer.name] = depthwise_macs(spec.kernel, oc, oh, ow)
        elif isinstance(spec, Dense):
            in_f, out_f = layer.weight.shape
            macs[layer.name] = in_f * out_f
    return macs
