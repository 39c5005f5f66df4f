import numpy as np
import pytest

from qdyn.builders import build_toynet
from qdyn.engine import forward_fp32
from qdyn.metrics import (
    ACTIVATIONS,
    BN_FOLD_WEIGHTS,
    WEIGHTS,
    average_precision,
    build_histogram,
    layer_stats,
    output_metrics,
    per_channel_ranges,
    qce,
    qkl,
    qmse,
)
from qdyn.ops import softmax
from qdyn.tensor import Tensor


class TestAveragePrecision:
    def test_upper_bound_when_channels_span_tensor(self):
        assert average_precision([2.0, 2.0, 2.0], 2.0) == 1.0

    def test_heterogeneous_example(self):
        assert average_precision([0.1, 0.1, 0.1, 2.0], 2.0) == pytest.approx(0.2875, abs=1e-12)

    def test_scale_invariance(self):
        rng = np.random.default_rng(0)
        values = rng.normal(size=(3, 3, 4, 8)).astype(np.float32)
        base = average_precision(per_channel_ranges(values),
                                 float(values.max() - values.min()))
        scaled = values * 3.5
        up = average_precision(per_channel_ranges(scaled),
                               float(scaled.max() - scaled.min()))
        assert up == pytest.approx(base, rel=1e-6)

    def test_matches_direct_min_max_oracle(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            c = int(rng.integers(1, 12))
            values = rng.normal(size=(int(rng.integers(2, 6)), 3, 3, c))
            got = average_precision(per_channel_ranges(values),
                                    float(values.max() - values.min()))
            # independent oracle: explicit per-channel loops over min/max
            ranges = [values[..., i].max() - values[..., i].min() for i in range(c)]
            want = sum(r / (values.max() - values.min()) for r in ranges) / c
            assert got == pytest.approx(float(want), abs=1e-6)

    def test_zero_tensor_range_rejected(self):
        with pytest.raises(ValueError, match="tensor range"):
            average_precision([0.0], 0.0)


class TestHistograms:
    def test_identical_inputs_identical_histograms(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=5000)
        p, q = build_histogram(x, x)
        np.testing.assert_array_equal(p.probs, q.probs)
        np.testing.assert_array_equal(p.edges, q.edges)

    def test_disjoint_supports_share_only_smoothing(self):
        a = np.linspace(0.0, 1.0, 1000)
        b = np.linspace(5.0, 6.0, 1000)
        p, q = build_histogram(a, b)
        overlap = np.minimum(p.probs, q.probs).sum()
        assert overlap < 1e-6
        assert p.probs.sum() == pytest.approx(1.0, abs=1e-9)

    def test_shifted_gaussian_kl_positive_and_matches_direct_sum(self):
        rng = np.random.default_rng(3)
        a = rng.normal(size=20000)
        width = (a.max() - a.min()) / 256
        p, q = build_histogram(a, a + width)
        got = qkl(p, q)
        want = float(sum(pi * np.log(pi / qi) for pi, qi in zip(p.probs, q.probs)))
        assert got == pytest.approx(want, abs=1e-12)
        assert got > 0

    def test_empty_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            build_histogram(np.array([]), np.array([1.0]))


class TestQmse:
    def test_identical_is_zero(self):
        x = np.arange(12, dtype=np.float32).reshape(1, 2, 2, 3)
        assert qmse(x, x) == 0.0

    def test_constant_offset(self):
        rng = np.random.default_rng(4)
        a = rng.normal(size=(2, 3, 3, 2)).astype(np.float32)
        assert qmse(a, a + np.float32(0.5)) == pytest.approx(0.25, rel=1e-5)

    def test_matches_two_pass_oracle(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=400).astype(np.float32)
        b = rng.normal(size=400).astype(np.float32)
        acc = 0.0
        for x, y in zip(a.tolist(), b.tolist()):
            acc += (x - y) ** 2
        assert qmse(a, b) == pytest.approx(acc / 400, rel=1e-9)


class TestEntropyIdentities:
    def test_kl_zero_and_ce_is_entropy_for_identical(self):
        rng = np.random.default_rng(6)
        x = rng.normal(size=10000)
        p, q = build_histogram(x, x)
        assert qkl(p, q) == 0.0
        assert qce(p, q) == pytest.approx(p.entropy(), abs=1e-12)

    def test_uniform_256_cross_entropy_is_ln_256(self):
        x = np.repeat(np.arange(256, dtype=np.float64), 4)  # exactly uniform
        p, q = build_histogram(x, x)
        assert qce(p, q) == pytest.approx(np.log(256.0), abs=1e-9)

    def test_ce_equals_entropy_plus_kl(self):
        rng = np.random.default_rng(7)
        for seed in range(10):
            r = np.random.default_rng(seed)
            p, q = build_histogram(r.normal(size=3000), r.normal(0.3, 1.2, size=3000))
            assert qce(p, q) == pytest.approx(p.entropy() + qkl(p, q), abs=1e-9)

    def test_gibbs_inequality(self):
        for seed in range(25):
            r = np.random.default_rng(100 + seed)
            p, q = build_histogram(r.normal(size=2000), r.uniform(-3, 3, size=2000))
            assert qkl(p, q) >= 0.0

    def test_mismatched_edges_rejected(self):
        p, _ = build_histogram(np.arange(10.0), np.arange(10.0))
        q, _ = build_histogram(np.arange(20.0), np.arange(20.0))
        with pytest.raises(ValueError, match="share bin edges"):
            qce(p, q)


class TestOutputMetrics:
    def test_identical_outputs(self):
        rng = np.random.default_rng(8)
        logits = Tensor(rng.normal(size=(6, 1, 1, 10)).astype(np.float32))
        s = softmax(logits)
        m = output_metrics(s, s)
        assert m["qmse"] == 0.0
        assert m["qkl_div"] == pytest.approx(0.0, abs=1e-12)
        rows = s.data.astype(np.float64).reshape(6, 10)
        want_entropy = float(np.mean(-np.sum(rows * np.log(rows), axis=1)))
        assert m["qce"] == pytest.approx(want_entropy, abs=1e-9)

    def test_one_hot_vs_uniform_ce_is_ln_10(self):
        hot = np.full((1, 1, 1, 10), 1e-9, dtype=np.float32)
        hot[0, 0, 0, 3] = 1.0 - 9e-9
        uniform = np.full((1, 1, 1, 10), 0.1, dtype=np.float32)
        m = output_metrics(Tensor(hot), Tensor(uniform))
        assert m["qce"] == pytest.approx(np.log(10.0), rel=1e-4)

    def test_unnormalized_rows_rejected(self):
        bad = Tensor(np.full((1, 1, 1, 10), 0.2, dtype=np.float32))
        ok = Tensor(np.full((1, 1, 1, 10), 0.1, dtype=np.float32))
        with pytest.raises(ValueError, match="not normalized"):
            output_metrics(bad, ok)

    def test_kl_nonnegative_on_random_pairs(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            a = softmax(Tensor(rng.normal(size=(4, 1, 1, 10)).astype(np.float32)))
            b = softmax(Tensor(rng.normal(size=(4, 1, 1, 10)).astype(np.float32)))
            assert output_metrics(a, b)["qkl_div"] >= 0.0


class TestLayerStats:
    def test_toynet_emits_three_kinds_per_weighted_layer(self):
        model = build_toynet("regular", seed=0)
        rng = np.random.default_rng(10)
        x = Tensor(rng.normal(0, 0.5, size=(2, 32, 32, 3)).astype(np.float32))
        _, trace = forward_fp32(model, x, capture=True)
        stats = layer_stats(model, trace)
        kinds = {}
        for s in stats:
            kinds.setdefault(s.layer, []).append(s.kind)
        assert set(kinds) == {"conv1", "conv2", "conv3", "conv4", "conv5",
                              "fc1", "fc2", "logits"}
        for layer, ks in kinds.items():
            assert ks == [WEIGHTS, BN_FOLD_WEIGHTS, ACTIVATIONS]

    def test_identity_fold_keeps_weight_stats(self):
        # gamma absent and moving_var = 1 - eps make the fold exact identity
        model = build_toynet("regular", seed=1, use_gamma=False)
        for layer in model.layers:
            if layer.bn is not None:
                object.__setattr__(layer.bn, "moving_var",
                                   np.full(layer.bn.channels, 1.0 - 1e-3, dtype=np.float32))
        stats = layer_stats(model)
        by_key = {(s.layer, s.kind): s for s in stats}
        for name in ("conv1", "conv2", "conv3", "conv4", "conv5"):
            w = by_key[(name, WEIGHTS)]
            f = by_key[(name, BN_FOLD_WEIGHTS)]
            assert f.range == pytest.approx(w.range, rel=1e-6)
            assert f.average_precision == pytest.approx(w.average_precision, rel=1e-6)

    def test_post_relu_activation_range_is_max(self):
        model = build_toynet("regular", seed=2)
        rng = np.random.default_rng(11)
        x = Tensor(rng.normal(0, 0.5, size=(2, 32, 32, 3)).astype(np.float32))
        _, trace = forward_fp32(model, x, capture=True)
        acts = dict(trace)
        stats = {(s.layer, s.kind): s for s in layer_stats(model, trace)}
        for name in ("conv1", "conv2"):
            data = acts[name].data
            assert data.min() >= 0.0
            assert stats[(name, ACTIVATIONS)].range == pytest.approx(float(data.max()), rel=1e-6)

    def test_scaled_channel_lowers_depthwise_precision(self):
        base = build_toynet("dws", seed=3, heterogeneity=1.0)
        het = build_toynet("dws", seed=3, heterogeneity=16.0)
        s0 = {(s.layer, s.kind): s for s in layer_stats(base)}
        s1 = {(s.layer, s.kind): s for s in layer_stats(het)}
        for i in range(2, 6):
            name = f"conv{i}_dw"
            assert s1[(name, WEIGHTS)].average_precision < s0[(name, WEIGHTS)].average_precision
