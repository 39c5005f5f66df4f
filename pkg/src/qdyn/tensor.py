"""Dense fp32 value carriers: rank-4 NHWC activations and typed weight tensors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

DTYPE = np.float32

# Weight layouts and their expected ranks.
CONV_HWIO = "conv_hwio"          # (kh, kw, in_c, out_c)
DEPTHWISE_HWC = "depthwise_hwc"  # (kh, kw, c) — one kernel per input channel
DENSE_IO = "dense_io"            # (in, out)

_LAYOUT_RANK = {CONV_HWIO: 4, DEPTHWISE_HWC: 3, DENSE_IO: 2}


def _as_f32(values) -> np.ndarray:
    return np.ascontiguousarray(values, dtype=DTYPE)


@dataclass(frozen=True)
class Tensor:
    """Rank-4 fp32 array in (n, h, w, c) order.

    Scalars and vectors ride along as (n, 1, 1, c); the layout never changes
    between ops, so every kernel can assume NHWC.
    """

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _as_f32(self.data))
        if self.data.ndim != 4:
            raise ShapeError(f"Tensor must be rank 4 (n, h, w, c), got shape {self.data.shape}")

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.data).all())

    @staticmethod
    def from_array(values) -> "Tensor":
        return Tensor(np.asarray(values))


@dataclass(frozen=True)
class WeightTensor:
    """fp32 weights tagged with their layout (conv_hwio, depthwise_hwc, dense_io)."""

    layout: str
    data: np.ndarray

    def __post_init__(self):
        if self.layout not in _LAYOUT_RANK:
            raise ShapeError(f"unknown weight layout {self.layout!r}")
        object.__setattr__(self, "data", _as_f32(self.data))
        want = _LAYOUT_RANK[self.layout]
        if self.data.ndim != want:
            raise ShapeError(
                f"{self.layout} weights must be rank {want}, got shape {self.data.shape}"
            )

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def out_channels(self) -> int:
        """Output-channel count; for depthwise this is the per-input-channel count."""
        return self.data.shape[-1]

    def scaled(self, per_channel: np.ndarray) -> "WeightTensor":
        """New weights with the last (channel) axis multiplied elementwise."""
        factors = np.asarray(per_channel, dtype=DTYPE)
        if factors.shape != (self.out_channels,):
            raise ShapeError(
                f"need {self.out_channels} channel factors, got shape {factors.shape}"
            )
        return WeightTensor(self.layout, self.data * factors)
