"""Model persistence: JSON manifest plus a little-endian fp32 weight blob.

Blob layout: for every layer in graph order, its tensors are concatenated as
raw '<f4' values — weight then bias for weighted layers; gamma (only when
use_gamma), beta, moving_mean, moving_var for batch-norm layers. The
manifest records the structure and the blob's sha256, so a load is verified
end to end and round-trips bit-exactly.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np

from .errors import ModelFormatError
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
    MaxPool,
    ModelGraph,
    ReLU,
    Softmax,
)
from .ops import out_size
from .tensor import CONV_HWIO, DENSE_IO, DEPTHWISE_HWC, WeightTensor

FORMAT_VERSION = 1


def _spec_doc(layer: Layer) -> dict:
    spec = layer.spec
    if isinstance(spec, Conv2D):
        return {"kind": "conv2d", "out_channels": spec.out_channels, "kernel": spec.kernel,
                "stride": spec.stride, "padding": spec.padding, "has_bias": layer.bias is not None}
    if isinstance(spec, DepthwiseConv2D):
        return {"kind": "depthwise_conv2d", "kernel": spec.kernel, "stride": spec.stride,
                "padding": spec.padding, "has_bias": layer.bias is not None}
    if isinstance(spec, Dense):
        return {"kind": "dense", "out": spec.out, "has_bias": layer.bias is not None}
    if isinstance(spec, BatchNorm):
        return {"kind": "batch_norm", "use_gamma": spec.use_gamma, "epsilon": spec.epsilon}
    if isinstance(spec, ReLU):
        return {"kind": "relu"}
    if isinstance(spec, MaxPool):
        return {"kind": "max_pool", "kernel": spec.kernel, "stride": spec.stride}
    if isinstance(spec, GlobalAvgPool):
        return {"kind": "global_avg_pool"}
    if isinstance(spec, Flatten):
        return {"kind": "flatten"}
    if isinstance(spec, Add):
        return {"kind": "add", "skip_from": spec.skip_from}
    if isinstance(spec, Softmax):
        return {"kind": "softmax"}
    if isinstance(spec, Dropout):
        return {"kind": "dropout", "keep_prob": spec.keep_prob}
    raise ModelFormatError(f"unknown layer kind {type(spec).__name__!r}")


def model_blob(model: ModelGraph) -> bytes:
    parts = []
    for layer in model.layers:
        if layer.weight is not None:
            parts.append(layer.weight.data.astype("<f4").tobytes())
        if layer.bias is not None:
            parts.append(layer.bias.astype("<f4").tobytes())
        if layer.bn is not None:
            bn = layer.bn
            if bn.gamma is not None:
                parts.append(bn.gamma.astype("<f4").tobytes())
            parts.append(bn.beta.astype("<f4").tobytes())
            parts.append(bn.moving_mean.astype("<f4").tobytes())
            parts.append(bn.moving_var.astype("<f4").tobytes())
    return b"".join(parts)


def model_manifest(model: ModelGraph, blob: bytes) -> dict:
    layers = []
    for layer in model.layers:
        doc = {"name": layer.name}
        doc.update(_spec_doc(layer))
        if layer.input_from is not None:
            doc["input_from"] = layer.input_from
        layers.append(doc)
    return {
        "format_version": FORMAT_VERSION,
        "input_shape": list(model.input_shape),
        "blob_sha256": hashlib.sha256(blob).hexdigest(),
        "layers": layers,
    }


def save_model(model: ModelGraph, manifest_path: str, blob_path: str):
    blob = model_blob(model)
    manifest = model_manifest(model, blob)
    with open(blob_path, "wb") as f:
        f.write(blob)
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")


class _BlobReader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.offset = 0

    def take(self, shape: tuple[int, ...]) -> np.ndarray:
        count = int(np.prod(shape)) if shape else 1
        nbytes = count * 4
        if self.offset + nbytes > len(self.blob):
            raise ModelFormatError(
                f"weight blob too short: need {self.offset + nbytes} bytes, have {len(self.blob)}"
            )
        values = np.frombuffer(self.blob, dtype="<f4", count=count, offset=self.offset)
        self.offset += nbytes
        return values.reshape(shape).astype(np.float32)

    def finish(self):
        if self.offset != len(self.blob):
            raise ModelFormatError(
                f"weight blob length mismatch: consumed {self.offset} of {len(self.blob)} bytes"
            )


def graph_from_manifest(manifest: dict, blob: bytes) -> ModelGraph:
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported format_version {manifest.get('format_version')!r}"
        )
    want_sha = manifest.get("blob_sha256")
    got_sha = hashlib.sha256(blob).hexdigest()
    if want_sha != got_sha:
        raise ModelFormatError(f"blob checksum mismatch: manifest {want_sha}, blob {got_sha}")

    input_shape = tuple(manifest["input_shape"])
    reader = _BlobReader(blob)
    layers: list[Layer] = []
    shapes: list[tuple[int, int, int]] = []  # (h, w, c) per layer

    for i, doc in enumerate(manifest["layers"]):
        kind = doc.get("kind")
        name = doc["name"]
        input_from = doc.get("input_from")
        h, w, c = (
            shapes[input_from] if input_from is not None
            else (input_shape if i == 0 else shapes[i - 1])
        )
        weight = bias = bn = None
        if kind == "conv2d":
            k, out_c, stride = doc["kernel"], doc["out_channels"], doc["stride"]
            weight = WeightTensor(CONV_HWIO, reader.take((k, k, c, out_c)))
            if doc["has_bias"]:
                bias = reader.take((out_c,))
            spec = Conv2D(out_c, k, stride, doc["padding"])
            shapes.append((out_size(h, k, stride, doc["padding"]),
                           out_size(w, k, stride, doc["padding"]), out_c))
        elif kind == "depthwise_conv2d":
            k, stride = doc["kernel"], doc["stride"]
            weight = WeightTensor(DEPTHWISE_HWC, reader.take((k, k, c)))
            if doc["has_bias"]:
                bias = reader.take((c,))
            spec = DepthwiseConv2D(k, stride, doc["padding"])
            shapes.append((out_size(h, k, stride, doc["padding"]),
                           out_size(w, k, stride, doc["padding"]), c))
        elif kind == "dense":
            feats, out = h * w * c, doc["out"]
            weight = WeightTensor(DENSE_IO, reader.take((feats, out)))
            if doc["has_bias"]:
                bias = reader.take((out,))
            spec = Dense(out)
            shapes.append((1, 1, out))
        elif kind == "batch_norm":
            use_gamma, eps = doc["use_gamma"], doc["epsilon"]
            gamma = reader.take((c,)) if use_gamma else None
            bn = BatchNormParams(
                beta=reader.take((c,)),
                moving_mean=reader.take((c,)),
                moving_var=reader.take((c,)),
                gamma=gamma,
                epsilon=eps,
            )
            spec = BatchNorm(use_gamma, eps)
            shapes.append((h, w, c))
        elif kind == "relu":
            spec = ReLU()
            shapes.append((h, w, c))
        elif kind == "max_pool":
            spec = MaxPool(doc["kernel"], doc["stride"])
            shapes.append((out_size(h, doc["kernel"], doc["stride"], "valid"),
                           out_size(w, doc["kernel"], doc["stride"], "valid"), c))
        elif kind == "global_avg_pool":
            spec = GlobalAvgPool()
            shapes.append((1, 1, c))
        elif kind == "flatten":
            spec = Flatten()
            shapes.append((1, 1, h * w * c))
        elif kind == "add":
            spec = Add(doc["skip_from"])
            shapes.append((h, w, c))
        elif kind == "softmax":
            spec = Softmax()
            shapes.append((h, w, c))
        elif kind == "dropout":
            spec = Dropout(doc["keep_prob"])
            shapes.append((h, w, c))
        else:
            raise ModelFormatError(f"unknown layer kind {kind!r}")
        layers.append(Layer(name, spec, weight=weight, bias=bias, bn=bn,
                            input_from=input_from))

    reader.finish()
    model = ModelGraph(input_shape, layers)
    model.validate()
    return model


def load_model(manifest_path: str, blob_path: str) -> ModelGraph:
    with open(manifest_path, "r", encoding="utf-8") as f:
        try:
            manifest = json.load(f)
        except json.JSONDecodeError as e:
            raise ModelFormatError(f"manifest is not valid JSON: {e}") from e
    with open(blob_path, "rb") as f:
        blob = f.read()
    return graph_from_manifest(manifest, blob)
