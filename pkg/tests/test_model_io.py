import json

import numpy as np
import pytest

from qdyn.builders import build_mobilenet_v1_cifar, build_resnet34_cifar, build_toynet
from qdyn.engine import forward_fp32
from qdyn.errors import ModelFormatError
from qdyn.model_io import graph_from_manifest, load_model, model_blob, model_manifest, save_model
from qdyn.tensor import Tensor


def roundtrip(model, tmp_path):
    manifest_path = tmp_path / "model.json"
    blob_path = tmp_path / "model.bin"
    save_model(model, str(manifest_path), str(blob_path))
    return load_model(str(manifest_path), str(blob_path))


@pytest.mark.parametrize("builder", [
    lambda: build_toynet("regular", seed=3),
    lambda: build_toynet("dws", seed=4, use_gamma=False, heterogeneity=4.0),
    lambda: build_resnet34_cifar(seed=5),
])
def test_round_trip_is_bit_exact(builder, tmp_path):
    model = builder()
    loaded = roundtrip(model, tmp_path)
    assert loaded.input_shape == model.input_shape
    assert len(loaded.layers) == len(model.layers)
    for a, b in zip(model.layers, loaded.layers):
        assert a.name == b.name
        assert type(a.spec) is type(b.spec)
        assert a.input_from == b.input_from
        if a.weight is not None:
            assert a.weight.layout == b.weight.layout
            np.testing.assert_array_equal(a.weight.data, b.weight.data)
        if a.bias is not None:
            np.testing.assert_array_equal(a.bias, b.bias)
        if a.bn is not None:
            np.testing.assert_array_equal(a.bn.beta, b.bn.beta)
            np.testing.assert_array_equal(a.bn.moving_var, b.bn.moving_var)
            if a.bn.gamma is None:
                assert b.bn.gamma is None
            else:
                np.testing.assert_array_equal(a.bn.gamma, b.bn.gamma)


def test_loaded_model_forward_matches(tmp_path):
    model = build_toynet("dws", seed=6)
    loaded = roundtrip(model, tmp_path)
    rng = np.random.default_rng(0)
    x = Tensor(rng.normal(0, 0.5, size=(2, 32, 32, 3)).astype(np.float32))
    a, _ = forward_fp32(model, x)
    b, _ = forward_fp32(loaded, x)
    np.testing.assert_array_equal(a.data, b.data)


def test_same_seed_same_blob():
    a = model_blob(build_toynet("regular", seed=7))
    b = model_blob(build_toynet("regular", seed=7))
    assert a == b


def test_truncated_blob_rejected():
    model = build_toynet("regular", seed=8)
    blob = model_blob(model)
    manifest = model_manifest(model, blob)
    # keep the recorded checksum consistent so the length check is what trips
    truncated = blob[:-8]
    manifest["blob_sha256"] = __import__("hashlib").sha256(truncated).hexdigest()
    with pytest.raises(ModelFormatError, match="too short|length mismatch"):
        graph_from_manifest(manifest, truncated)


def test_checksum_mismatch_rejected():
    model = build_toynet("regular", seed=9)
    blob = model_blob(model)
    manifest = model_manifest(model, blob)
    tampered = bytearray(blob)
    tampered[0] ^= 0xFF
    with pytest.raises(ModelFormatError, match="checksum"):
        graph_from_manifest(manifest, bytes(tampered))


def test_version_mismatch_rejected():
    model = build_toynet("regular", seed=10)
    blob = model_blob(model)
    manifest = model_manifest(model, blob)
    manifest["format_version"] = 99
    with pytest.raises(ModelFormatError, match="format_version"):
        graph_from_manifest(manifest, blob)


def test_unknown_layer_kind_named_in_error():
    model = build_toynet("regular", seed=11)
    blob = model_blob(model)
    manifest = model_manifest(model, blob)
    manifest["layers"][2]["kind"] = "gelu"
    with pytest.raises(ModelFormatError, match="unknown layer kind 'gelu'"):
        graph_from_manifest(manifest, blob)


def test_manifest_is_plain_json(tmp_path):
    model = build_mobilenet_v1_cifar(seed=12)
    save_model(model, str(tmp_path / "m.json"), str(tmp_path / "m.bin"))
    doc = json.loads((tmp_path / "m.json").read_text())
    assert doc["format_version"] == 1
    assert doc["input_shape"] == [32, 32, 3]
    assert len(doc["blob_sha256"]) == 64
    kinds = {l["kind"] for l in doc["layers"]}
    assert "conv2d" in kinds and "depthwise_conv2d" in kinds
