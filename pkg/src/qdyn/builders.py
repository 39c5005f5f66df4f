"""Builders for the three CIFAR-scale architectures under study.

All builders are deterministic in (kind, use_gamma, init, seed). Convolutions
followed by batch norm carry no bias; dense layers carry a zero-initialized
bias. The optional ``heterogeneity`` factor rescales channel i of every
depthwise kernel by a log-spaced factor in [1, sigma], which reproduces the
channel-range mismatch that trained depthwise layers exhibit without needing
a training run.
"""

from __future__ import annotations

import numpy as np

from .graph import (
    Add,
    BatchNorm,
    BatchNormParams,
    Conv2D,
    Dense,
    DepthwiseConv2D,
    Dropout,
    Flatten,
    GlobalAvgPool,
    Layer,
    ModelGraph,
    ReLU,
    Softmax,
)
from .initializers import INITIALIZERS
from .ops import out_size
from .tensor import CONV_HWIO, DENSE_IO, DEPTHWISE_HWC, DTYPE

ARCHITECTURES = ("toynet_regular", "toynet_dws", "mobilenet_v1_cifar", "resnet34_cifar")

BN_EPSILON = 1e-3
INPUT_SHAPE = (32, 32, 3)
NUM_CLASSES = 10
DROPOUT_KEEP_PROB = 0.5


def heterogeneity_factors(channels: int, sigma: float) -> np.ndarray:
    """Log-spaced per-channel scale factors in [1, sigma]."""
    if sigma < 1.0:
        raise ValueError(f"heterogeneity must be >= 1, got {sigma}")
    if channels == 1:
        return np.ones(1, dtype=DTYPE)
    exponents = np.arange(channels, dtype=np.float64) / (channels - 1)
    return (sigma ** exponents).astype(DTYPE)


class _Builder:
    def __init__(self, init: str, seed: int, use_gamma: bool, heterogeneity: float):
        if init not in INITIALIZERS:
            raise ValueError(f"unknown init {init!r}; expected one of {sorted(INITIALIZERS)}")
        self.init = INITIALIZERS[init]
        self.rng = np.random.default_rng(seed)
        self.use_gamma = use_gamma
        if heterogeneity < 1.0:
            raise ValueError(f"heterogeneity must be >= 1, got {heterogeneity}")
        self.heterogeneity = float(heterogeneity)
        self.layers: list[Layer] = []
        self.h, self.w, self.c = INPUT_SHAPE

    def _push(self, layer: Layer) -> int:
        self.layers.append(layer)
        return len(self.layers) - 1

    def _bn_params(self, channels: int) -> BatchNormParams:
        # Moving stats at their init values make the fold a near-identity,
        # which keeps the random-init baseline clean.
        return BatchNormParams(
            beta=np.zeros(channels, dtype=DTYPE),
            moving_mean=np.zeros(channels, dtype=DTYPE),
            moving_var=np.ones(channels, dtype=DTYPE),
            gamma=np.ones(channels, dtype=DTYPE) if self.use_gamma else None,
            epsilon=BN_EPSILON,
        )

    def conv(self, name: str, out_c: int, k: int, stride: int = 1,
             input_from: int | None = None, bn: bool = True, relu: bool = True) -> int:
        weight = self.init(CONV_HWIO, (k, k, self.c, out_c), self.rng)
        idx = self._push(Layer(name, Conv2D(out_c, k, stride), weight=weight,
                               input_from=input_from))
        if input_from is None:
            self.h = out_size(self.h, k, stride, "same")
            self.w = out_size(self.w, k, stride, "same")
        self.c = out_c
        if bn:
            self._push(Layer(f"{name}_bn", BatchNorm(self.use_gamma, BN_EPSILON),
                             bn=self._bn_params(out_c)))
        if relu:
            self._push(Layer(f"{name}_relu", ReLU()))
        return idx

    def depthwise(self, name: str, k: int, stride: int = 1) -> int:
        weight = self.init(DEPTHWISE_HWC, (k, k, self.c), self.rng)
        if self.heterogeneity > 1.0:
            weight = weight.scaled(heterogeneity_factors(self.c, self.heterogeneity))
        idx = self._push(Layer(name, DepthwiseConv2D(k, stride), weight=weight))
        self.h = out_size(self.h, k, stride, "same")
        self.w = out_size(self.w, k, stride, "same")
        self._push(Layer(f"{name}_bn", BatchNorm(self.use_gamma, BN_EPSILON),
                         bn=self._bn_params(self.c)))
        self._push(Layer(f"{name}_relu", ReLU()))
        return idx

    def dense(self, name: str, out: int, relu: bool = False) -> int:
        feats = self.h * self.w * self.c
        weight = self.init(DENSE_IO, (feats, out), self.rng)
        idx = self._push(Layer(name, Dense(out), weight=weight,
                               bias=np.zeros(out, dtype=DTYPE)))
        self.h, self.w, self.c = 1, 1, out
        if relu:
            self._push(Layer(f"{name}_relu", ReLU()))
        return idx

    def flatten(self, name: str = "flatten") -> int:
        idx = self._push(Layer(name, Flatten()))
        self.h, self.w, self.c = 1, 1, self.h * self.w * self.c
        return idx

    def global_avg_pool(self, name: str = "gap") -> int:
        idx = self._push(Layer(name, GlobalAvgPool()))
        self.h, self.w = 1, 1
        return idx

    def dropout(self, name: str) -> int:
        return self._push(Layer(name, Dropout(DROPOUT_KEEP_PROB)))

    def add_relu(self, name: str, skip_from: int) -> int:
        idx = self._push(Layer(name, Add(skip_from)))
        self._push(Layer(f"{name}_relu", ReLU()))
        return idx

    def softmax(self, name: str = "softmax") -> int:
        return self._push(Layer(name, Softmax()))

    def finish(self) -> ModelGraph:
        model = ModelGraph(INPUT_SHAPE, self.layers)
        model.validate()
        return model


def build_toynet(kind: str = "regular", use_gamma: bool = True,
                 init: str = "glorot_uniform", seed: int = 0,
                 heterogeneity: float = 1.0) -> ModelGraph:
    """Five conv stages (32/64/128/256/256, downsampling at 32, 128 and 256)
    feeding FC 256 -> FC 256 -> FC 10; the dws variant swaps every conv after
    the first for a depthwise(3x3) + pointwise(1x1) pair with the same
    input/output dims.
    """
    if kind not in ("regular", "dws"):
        raise ValueError(f"toynet kind must be 'regular' or 'dws', got {kind!r}")
    b = _Builder(init, seed, use_gamma, heterogeneity)
    b.conv("conv1", 32, 3, stride=2)
    stages = [(64, 1), (128, 2), (256, 2), (256, 1)]
    for i, (out_c, stride) in enumerate(stages, start=2):
        if kind == "regular":
            b.conv(f"conv{i}", out_c, 3, stride=stride)
        else:
            b.depthwise(f"conv{i}_dw", 3, stride=stride)
            b.conv(f"conv{i}_pw", out_c, 1)
    b.flatten()
    b.dense("fc1", 256, relu=True)
    b.dropout("fc1_dropout")
    b.dense("fc2", 256, relu=True)
    b.dropout("fc2_dropout")
    b.dense("logits", NUM_CLASSES)
    b.softmax()
    return b.finish()


# (pointwise out_channels, depthwise stride) for the 13 separable blocks,
# with the stride-2 downsamples at the first 128 and first 1024 blocks
# disabled for the 32x32 input.
_MOBILENET_BLOCKS = [
    (64, 1),
    (128, 1),   # stride 2 in the original
    (128, 1),
    (256, 2),
    (256, 1),
    (512, 2),
    (512, 1), (512, 1), (512, 1), (512, 1), (512, 1),
    (1024, 1),  # stride 2 in the original
    (1024, 1),
]


def build_mobilenet_v1_cifar(use_gamma: bool = True, init: str = "glorot_uniform",
                             seed: int = 0, heterogeneity: float = 1.0) -> ModelGraph:
    """MobileNet-V1 body (1 conv + 13 depthwise-separable blocks) adapted to
    32x32 inputs so the global-average-pool input is 4x4x1024."""
    b = _Builder(init, seed, use_gamma, heterogeneity)
    b.conv("conv1", 32, 3, stride=2)
    for i, (out_c, stride) in enumerate(_MOBILENET_BLOCKS, start=1):
        b.depthwise(f"dws{i}_dw", 3, stride=stride)
        b.conv(f"dws{i}_pw", out_c, 1)
    b.global_avg_pool()
    b.flatten()
    b.dense("logits", NUM_CLASSES)
    b.softmax()
    return b.finish()


# (blocks, out_channels, first-block stride) per stage; the original strides
# at the 128 and 512 stages are disabled for the 32x32 input, and the
# post-conv1 max-pool is dropped.
_RESNET34_STAGES = [
    (3, 64, 1),
    (4, 128, 1),   # stride 2 in the original
    (6, 256, 2),
    (3, 512, 1),   # stride 2 in the original
]


def build_resnet34_cifar(use_gamma: bool = True, init: str = "glorot_uniform",
                         seed: int = 0, heterogeneity: float = 1.0) -> ModelGraph:
    """ResNet-34 basic-block body adapted to 32x32 inputs; channel-increase
    blocks use a 1x1 projection shortcut, listed after the block's two 3x3
    convolutions."""
    b = _Builder(init, seed, use_gamma, heterogeneity)
    b.conv("conv1", 64, 7, stride=2)
    for s, (blocks, out_c, first_stride) in enumerate(_RESNET34_STAGES, start=1):
        for blk in range(1, blocks + 1):
            stride = first_stride if blk == 1 else 1
            needs_projection = blk == 1 and (out_c != b.c or stride != 1)
            entry = len(b.layers) - 1
            entry_channels = b.c
            prefix = f"s{s}b{blk}"
            b.conv(f"{prefix}_conv1", out_c, 3, stride=stride)
            b.conv(f"{prefix}_conv2", out_c, 3, relu=False)
            main_end = len(b.layers) - 1
            if needs_projection:
                b.c = entry_channels  # projection reads the block input
                b.conv(f"{prefix}_proj", out_c, 1, stride=stride,
                       input_from=entry, relu=False)
                b.add_relu(f"{prefix}_add", skip_from=main_end)
            else:
                b.add_relu(f"{prefix}_add", skip_from=entry)
    b.global_avg_pool()
    b.flatten()
    b.dense("logits", NUM_CLASSES)
    b.softmax()
    return b.finish()


def build_architecture(arch: str, use_gamma: bool = True, init: str = "glorot_uniform",
                       seed: int = 0, heterogeneity: float = 1.0) -> ModelGraph:
    if arch == "toynet_regular":
        return build_toynet("regular", use_gamma, init, seed, heterogeneity)
    if arch == "toynet_dws":
        return build_toynet("dws", use_gamma, init, seed, heterogeneity)
    if arch == "mobilenet_v1_cifar":
        return build_mobilenet_v1_cifar(use_gamma, init, seed, heterogeneity)
    if arch == "resnet34_cifar":
        return build_resnet34_cifar(use_gamma, init, seed, heterogeneity)
    raise ValueError(f"unknown architecture {arch!r}; expected one of {ARCHITECTURES}")
