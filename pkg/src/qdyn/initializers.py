"""Random weight initializers with layout-aware fan computation."""

from __future__ import annotations

import math

import numpy as np

from .tensor import CONV_HWIO, DENSE_IO, DEPTHWISE_HWC, DTYPE, WeightTensor


def fan_in_out(layout: str, shape: tuple[int, ...]) -> tuple[int, int]:
    """(fan_in, fan_out) for a weight layout.

    Depthwise kernels touch a single channel, so both fans are just the
    receptive-field size.
    """
    if layout == CONV_HWIO:
        kh, kw, in_c, out_c = shape
        return kh * kw * in_c, kh * kw * out_c
    if layout == DEPTHWISE_HWC:
        kh, kw, _ = shape
        return kh * kw, kh * kw
    if layout == DENSE_IO:
        return shape[0], shape[1]
    raise ValueError(f"unknown layout {layout!r}")


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def glorot_uniform(layout: str, shape: tuple[int, ...], seed) -> WeightTensor:
    """i.i.d. uniform on +/- sqrt(6 / (fan_in + fan_out))."""
    rng = _rng(seed)
    fan_in, fan_out = fan_in_out(layout, shape)
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return WeightTensor(layout, rng.uniform(-bound, bound, size=shape).astype(DTYPE))


def he_normal(layout: str, shape: tuple[int, ...], seed) -> WeightTensor:
    """i.i.d. normal with mean 0 and stddev sqrt(2 / fan_in)."""
    rng = _rng(seed)
    fan_in, _ = fan_in_out(layout, shape)
    std = math.sqrt(2.0 / fan_in)
    return WeightTensor(layout, rng.normal(0.0, std, size=shape).astype(DTYPE))


INITIALIZERS = {
    "glorot_uniform": glorot_uniform,
    "he_normal": he_normal,
}
