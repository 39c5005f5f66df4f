import numpy as np
import pytest

from qdyn.datasets import (
    CIFAR_RECORD_BYTES,
    Dataset,
    load_data_path,
    read_cifar10_binary,
    synthetic_dataset,
)


def make_record(label, value):
    return bytes([label]) + bytes([value]) * 3072


class TestCifarReader:
    def test_three_records(self, tmp_path):
        path = tmp_path / "batch.bin"
        path.write_bytes(make_record(0, 0) + make_record(5, 255) + make_record(9, 128))
        ds = read_cifar10_binary(str(path))
        assert len(ds) == 3
        assert ds.images.shape == (3, 32, 32, 3)
        assert list(ds.labels) == [0, 5, 9]

    def test_zero_record_scales_to_minus_one(self, tmp_path):
        path = tmp_path / "zeros.bin"
        path.write_bytes(make_record(0, 0))
        ds = read_cifar10_binary(str(path))
        np.testing.assert_array_equal(ds.images, -1.0)

    def test_full_byte_scales_to_plus_one(self, tmp_path):
        path = tmp_path / "ones.bin"
        path.write_bytes(make_record(1, 255))
        ds = read_cifar10_binary(str(path))
        np.testing.assert_allclose(ds.images, 1.0)

    def test_channel_plane_order(self, tmp_path):
        # R plane 10, G plane 20, B plane 30
        raw = bytes([3]) + bytes([10]) * 1024 + bytes([20]) * 1024 + bytes([30]) * 1024
        path = tmp_path / "planes.bin"
        path.write_bytes(raw)
        ds = read_cifar10_binary(str(path))
        np.testing.assert_allclose(ds.images[0, :, :, 0], 10 / 127.5 - 1.0, rtol=1e-6)
        np.testing.assert_allclose(ds.images[0, :, :, 1], 20 / 127.5 - 1.0, rtol=1e-6)
        np.testing.assert_allclose(ds.images[0, :, :, 2], 30 / 127.5 - 1.0, rtol=1e-6)

    def test_truncated_file_rejected(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(make_record(0, 0)[:-10])
        with pytest.raises(ValueError, match="not a multiple"):
            read_cifar10_binary(str(path))

    def test_label_out_of_range_rejected(self, tmp_path):
        path = tmp_path / "badlabel.bin"
        path.write_bytes(make_record(11, 0))
        with pytest.raises(ValueError, match="label 11"):
            read_cifar10_binary(str(path))

    def test_record_arithmetic_for_official_batch(self):
        assert 10_000 * CIFAR_RECORD_BYTES == 30_730_000

    def test_directory_loading_concatenates(self, tmp_path):
        (tmp_path / "data_batch_1.bin").write_bytes(make_record(1, 1))
        (tmp_path / "data_batch_2.bin").write_bytes(make_record(2, 2) + make_record(3, 3))
        ds = load_data_path(str(tmp_path))
        assert len(ds) == 3
        assert sorted(ds.labels) == [1, 2, 3]

    def test_empty_directory_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="no CIFAR-10"):
            load_data_path(str(tmp_path))


class TestSynthetic:
    def test_deterministic(self):
        a = synthetic_dataset(10, seed=3)
        b = synthetic_dataset(10, seed=3)
        np.testing.assert_array_equal(a.images, b.images)
        np.testing.assert_array_equal(a.labels, b.labels)

    def test_shapes_and_label_range(self):
        ds = synthetic_dataset(50, seed=0)
        assert ds.images.shape == (50, 32, 32, 3)
        assert ds.images.dtype == np.float32
        assert ds.labels.min() >= 0 and ds.labels.max() <= 9

    def test_subset(self):
        ds = synthetic_dataset(20, seed=1)
        sub = ds.subset(np.array([3, 5]))
        assert len(sub) == 2
        np.testing.assert_array_equal(sub.images[0], ds.images[3])
        assert sub.labels[1] == ds.labels[5]
