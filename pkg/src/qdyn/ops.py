"""Reference NHWC kernels used by both the fp32 and the simulated-quantized path.

All kernels are pure functions over immutable inputs and compute in fp32.
Reduction order is fixed (same chunking and BLAS path on every call), so
repeated runs on one host are bit-identical.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ShapeError
from .tensor import CONV_HWIO, DENSE_IO, DEPTHWISE_HWC, DTYPE, Tensor, WeightTensor

SAME = "same"
VALID = "valid"

# Images per im2col slab; fixed so the reduction layout never varies between calls.
_CHUNK = 256


def _pads(in_size: int, k: int, stride: int, padding: str) -> tuple[int, int]:
    """SAME/VALID padding for one spatial axis; SAME puts the extra pad at the end."""
    if padding == VALID:
        return 0, 0
    out = -(-in_size // stride)
    total = max((out - 1) * stride + k - in_size, 0)
    return total // 2, total - total // 2


def out_size(in_size: int, k: int, stride: int, padding: str) -> int:
    if padding == SAME:
        return -(-in_size // stride)
    if padding == VALID:
        return -(-(in_size - k + 1) // stride)
    raise ValueError(f"unknown padding {padding!r}")


def _check_padding(padding: str):
    if padding not in (SAME, VALID):
        raise ValueError(f"unknown padding {padding!r}")


def _windows(x: np.ndarray, k: int, stride: int, padding: str) -> np.ndarray:
    """(n, h, w, c) -> (n, oh, ow, c, kh, kw) view of the receptive fields."""
    pt, pb = _pads(x.shape[1], k, stride, padding)
    pl, pr = _pads(x.shape[2], k, stride, padding)
    if pt or pb or pl or pr:
        x = np.pad(x, ((0, 0), (pt, pb), (pl, pr), (0, 0)))
    win = sliding_window_view(x, (k, k), axis=(1, 2))
    return win[:, ::stride, ::stride]


def _bias_vector(bias, out_c: int) -> np.ndarray | None:
    if bias is None:
        return None
    b = np.asarray(bias, dtype=DTYPE).reshape(-1)
    if b.shape[0] != out_c:
        raise ShapeError(f"bias length {b.shape[0]} does not match out_c={out_c}")
    return b


def conv2d(x: Tensor, w: WeightTensor, bias=None, stride: int = 1, padding: str = SAME) -> Tensor:
    """Dense 2-D convolution (cross-correlation) of NHWC input with HWIO weights."""
    _check_padding(padding)
    if w.layout != CONV_HWIO:
        raise ShapeError(f"conv2d needs {CONV_HWIO} weights, got {w.layout}")
    kh, kw, in_c, out_c = w.shape
    if kh != kw:
        raise ShapeError(f"only square kernels supported, got {kh}x{kw}")
    n, h, wdt, c = x.shape
    if c != in_c:
        raise ShapeError(f"input has {c} channels but kernel expects in_c={in_c}")
    b = _bias_vector(bias, out_c)

    wmat = w.data.reshape(kh * kw * in_c, out_c)
    chunks = []
    for lo in range(0, n, _CHUNK):
        win = _windows(x.data[lo:lo + _CHUNK], kh, stride, padding)
        cn, oh, ow = win.shape[:3]
        # (cn, oh, ow, c, kh, kw) -> rows of flattened receptive fields in (kh, kw, c) order
        patches = win.transpose(0, 1, 2, 4, 5, 3).reshape(cn * oh * ow, kh * kw * in_c)
        out = patches @ wmat
        chunks.append(out.reshape(cn, oh, ow, out_c))
    result = np.concatenate(chunks, axis=0) if len(chunks) > 1 else chunks[0]
    if b is not None:
        result = result + b
    return Tensor(result)


def depthwise_conv2d(x: Tensor, w: WeightTensor, bias=None, stride: int = 1,
                     padding: str = SAME) -> Tensor:
    """Per-channel 2-D convolution: output channel i depends only on input channel i."""
    _check_padding(padding)
    if w.layout != DEPTHWISE_HWC:
        raise ShapeError(f"depthwise_conv2d needs {DEPTHWISE_HWC} weights, got {w.layout}")
    kh, kw, wc = w.shape
    if kh != kw:
        raise ShapeError(f"only square kernels supported, got {kh}x{kw}")
    n, h, wdt, c = x.shape
    if c != wc:
        raise ShapeError(f"input has {c} channels but depthwise kernel has {wc}")
    b = _bias_vector(bias, wc)

    chunks = []
    for lo in range(0, n, _CHUNK):
        win = _windows(x.data[lo:lo + _CHUNK], kh, stride, padding)
        # (cn, oh, ow, c, kh, kw) * (kh, kw, c) summed over the kernel window
        out = np.einsum("nhwcij,ijc->nhwc", win, w.data, dtype=DTYPE, casting="same_kind")
        chunks.append(out)
    result = np.concatenate(chunks, axis=0) if len(chunks) > 1 else chunks[0]
    if b is not None:
        result = result + b
    return Tensor(result)


def dense(x: Tensor, w: WeightTensor, bias=None) -> Tensor:
    """Fully connected layer on (n, 1, 1, features) input."""
    if w.layout != DENSE_IO:
        raise ShapeError(f"dense needs {DENSE_IO} weights, got {w.layout}")
    n, h, wdt, c = x.shape
    feats = h * wdt * c
    in_f, out_f = w.shape
    if feats != in_f:
        raise ShapeError(f"input has {feats} features but weights expect in={in_f}")
    b = _bias_vector(bias, out_f)
    out = x.data.reshape(n, feats) @ w.data
    if b is not None:
        out = out + b
    return Tensor(out.reshape(n, 1, 1, out_f))


def relu(x: Tensor) -> Tensor:
    return Tensor(np.maximum(x.data, DTYPE(0)))


def maxpool(x: Tensor, k: int, stride: int, padding: str = VALID) -> Tensor:
    _check_padding(padding)
    n, h, w, c = x.shape
    if padding == VALID and (h < k or w < k):
        raise ShapeError(f"maxpool window {k} exceeds input {h}x{w}")
    win = _windows(x.data, k, stride, padding)
    return Tensor(win.max(axis=(4, 5)))


def global_avg_pool(x: Tensor) -> Tensor:
    """Reduce h and w to 1 by averaging."""
    return Tensor(x.data.mean(axis=(1, 2), keepdims=True, dtype=DTYPE))


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError(f"add requires identical shapes, got {a.shape} vs {b.shape}")
    return Tensor(a.data + b.data)


def flatten(x: Tensor) -> Tensor:
    n, h, w, c = x.shape
    return Tensor(x.data.reshape(n, 1, 1, h * w * c))


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last dim, max-subtracted for stability."""
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return Tensor(e / e.sum(axis=-1, keepdims=True, dtype=DTYPE))
