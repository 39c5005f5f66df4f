import numpy as np
import pytest

from qdyn.errors import GraphError
from qdyn.graph import (
    Add,
    BatchNorm,
    BatchNormParams,
    Conv2D,
    Dense,
    Flatten,
    Layer,
    ModelGraph,
    ReLU,
    Softmax,
    conv_macs,
    depthwise_macs,
    model_macs,
)
from qdyn.initializers import glorot_uniform
from qdyn.tensor import CONV_HWIO, DENSE_IO


def conv_layer(name, in_c, out_c, k=3, stride=1, seed=0):
    w = glorot_uniform(CONV_HWIO, (k, k, in_c, out_c), seed)
    return Layer(name, Conv2D(out_c, k, stride), weight=w)


def bn_layer(name, channels):
    return Layer(
        name,
        BatchNorm(),
        bn=BatchNormParams(
            beta=np.zeros(channels),
            moving_mean=np.zeros(channels),
            moving_var=np.ones(channels),
            gamma=np.ones(channels),
        ),
    )


def test_shape_inference_linear_chain():
    model = ModelGraph(
        (8, 8, 3),
        [
            conv_layer("c1", 3, 4, stride=2),
            bn_layer("c1_bn", 4),
            Layer("c1_relu", ReLU()),
            Layer("flat", Flatten()),
            Layer("fc", Dense(10), weight=glorot_uniform(DENSE_IO, (64, 10), 1),
                  bias=np.zeros(10, dtype=np.float32)),
            Layer("softmax", Softmax()),
        ],
    )
    shapes = model.infer_shapes()
    assert shapes[0] == (4, 4, 4)
    assert shapes[3] == (1, 1, 64)
    assert model.output_shape() == (1, 1, 10)


def test_channel_mismatch_raises():
    model = ModelGraph((8, 8, 3), [conv_layer("c1", 5, 4)])
    with pytest.raises(GraphError, match="expects 5 input channels"):
        model.validate()


def test_bn_must_follow_weighted_layer():
    model = ModelGraph((8, 8, 3), [Layer("r", ReLU()), bn_layer("bad_bn", 3)])
    with pytest.raises(GraphError, match="must directly follow a weighted layer"):
        model.validate()


def test_add_operand_shapes_must_match():
    model = ModelGraph(
        (8, 8, 3),
        [
            conv_layer("c1", 3, 4),
            conv_layer("c2", 4, 8),
            Layer("bad_add", Add(skip_from=0)),
        ],
    )
    with pytest.raises(GraphError, match="operand shapes differ"):
        model.validate()


def test_duplicate_names_rejected():
    model = ModelGraph((8, 8, 3), [conv_layer("c", 3, 4), conv_layer("c", 4, 4)])
    with pytest.raises(GraphError, match="unique"):
        model.validate()


def test_negative_moving_var_rejected():
    with pytest.raises(ValueError, match="moving_var"):
        BatchNormParams(
            beta=np.zeros(2), moving_mean=np.zeros(2), moving_var=np.array([1.0, -0.5])
        )


def test_mac_reduction_of_separable_factorization():
    # dense 3x3 conv vs depthwise 3x3 + pointwise 1x1, equal channel counts
    def ratio(m, d=16):
        dense_ = conv_macs(3, m, m, d, d)
        dws = depthwise_macs(3, m, d, d) + conv_macs(1, m, m, d, d)
        return dense_ / dws

    assert ratio(72) == pytest.approx(8.0)
    for m in (72, 128, 512):
        assert 8.0 <= ratio(m) <= 9.0
    assert ratio(64) < 8.0  # below the crossover the saving is smaller


def test_model_macs_keys_weighted_layers():
    model = ModelGraph(
        (8, 8, 3),
        [
            conv_layer("c1", 3, 4),
            Layer("flat", Flatten()),
            Layer("fc", Dense(10), weight=glorot_uniform(DENSE_IO, (256, 10), 2),
                  bias=np.zeros(10, dtype=np.float32)),
        ],
    )
    macs = model_macs(model)
    assert macs == {"c1": 3 * 3 * 3 * 4 * 8 * 8, "fc": 2560}
