import numpy as np
import pytest

from irfad.data import (
    BlobParams,
    Dataset,
    gen_blobs,
    gen_toy,
    load_dataset,
    save_dataset,
)
from irfad.errors import DataError, ParameterError


# -- toy generator --------------------------------------------------------------


def test_toy_counts_and_balance():
    train, test = gen_toy(0)
    assert len(train) == 10_000
    assert len(test) == 12_000
    assert np.all(train.labels == 0)
    assert (test.labels == 0).sum() == 6_000
    assert (test.labels == 1).sum() == 6_000
    assert train.sample_shape == (1,)


def test_toy_train_mean_within_standard_error_band():
    train, _ = gen_toy(0)
    band = 3.0 * 0.35 / np.sqrt(10_000)
    assert abs(train.samples.mean() - 2.5) < band


def test_toy_abnormal_mixture_mean():
    _, test = gen_toy(0)
    abn = test.samples[test.labels == 1]
    # mixture mean 0.5*1.5 + 0.5*3.5 = 2.5; variance 1 + mean of component vars
    mix_var = 0.5 * (1.0 + 0.2**2) + 0.5 * (1.0 + 0.22**2)
    band = 3.0 * np.sqrt(mix_var / 6_000)
    assert abs(abn.mean() - 2.5) < band


def test_toy_deterministic_per_seed():
    a_train, a_test = gen_toy(7)
    b_train, b_test = gen_toy(7)
    assert np.array_equal(a_train.samples, b_train.samples)
    assert np.array_equal(a_test.samples, b_test.samples)
    c_train, _ = gen_toy(8)
    assert not np.array_equal(a_train.samples, c_train.samples)


# -- blob generator ---------------------------------------------------------------


def test_blob_shapes_and_mask_area():
    params = BlobParams(amplitude=2.0, rows=2, cols=3)
    train, test = gen_blobs(8, 6, dims=(4, 8, 8), anomaly=params, seed=0)
    assert train.samples.shape == (8, 4, 8, 8)
    assert test.samples.shape == (6, 4, 8, 8)
    assert train.masks is None and test.masks is not None
    assert test.masks.shape == (6, 32, 32)
    for i in range(6):
        area = int(test.masks[i].sum())
        if test.labels[i] == 1:
            assert area == 2 * 3 * 4 * 4  # feature cells scaled 4x per axis
        else:
            assert area == 0


def test_blob_zero_amplitude_keeps_masks():
    _, test = gen_blobs(2, 4, anomaly=BlobParams(amplitude=0.0), seed=1)
    assert np.all(test.masks[test.labels == 1].sum(axis=(1, 2)) > 0)


def test_blob_dim_validation():
    with pytest.raises(ParameterError):
        gen_blobs(4, 4, dims=(16, 8, 8))  # c*h*w > 512
    with pytest.raises(ParameterError):
        gen_blobs(4, 4, dims=(4, 8, 8), anomaly=BlobParams(rows=9, cols=1))
    with pytest.raises(ParameterError):
        gen_blobs(4, 4, upsample_to=(30, 32))


def test_blob_deterministic_per_seed():
    a = gen_blobs(4, 4, seed=3)
    b = gen_blobs(4, 4, seed=3)
    assert np.array_equal(a[1].samples, b[1].samples)
    assert np.array_equal(a[1].masks, b[1].masks)


# -- dataset invariants -------------------------------------------------------------


def test_train_split_rejects_abnormal_labels():
    with pytest.raises(DataError):
        Dataset(
            samples=np.zeros((2, 1)),
            labels=np.array([0, 1], dtype=np.uint8),
            masks=None,
            role="train",
        )


def test_annotated_abnormal_needs_positive_mask():
    with pytest.raises(DataError):
        Dataset(
            samples=np.zeros((1, 2, 2, 2)),
            labels=np.array([1], dtype=np.uint8),
            masks=np.zeros((1, 4, 4), dtype=np.uint8),
        )


# -- disk round trip ------------------------------------------------------------------


def test_round_trip_bitwise(tmp_path):
    _, test = gen_blobs(3, 4, seed=5)
    save_dataset(test, tmp_path / "ds")
    loaded = load_dataset(tmp_path / "ds")
    assert np.array_equal(loaded.samples, test.samples)
    assert np.array_equal(loaded.labels, test.labels)
    assert np.array_equal(loaded.masks, test.masks)
    assert loaded.role == test.role


def test_provenance_survives_round_trip(tmp_path):
    train, _ = gen_toy(42)
    save_dataset(train, tmp_path / "ds")
    loaded = load_dataset(tmp_path / "ds")
    assert loaded.provenance["seed"] == "42"
    assert loaded.provenance["generator"] == "toy"


def test_missing_mask_file_is_load_error(tmp_path):
    _, test = gen_blobs(2, 4, seed=0)
    save_dataset(test, tmp_path / "ds")
    (tmp_path / "ds" / "masks" / "masks.bin").unlink()
    with pytest.raises(DataError):
        load_dataset(tmp_path / "ds")


def test_truncated_samples_is_load_error(tmp_path):
    train, _ = gen_blobs(3, 4, seed=0)
    save_dataset(train, tmp_path / "ds")
    raw = (tmp_path / "ds" / "samples.bin").read_bytes()
    (tmp_path / "ds" / "samples.bin").write_bytes(raw[:-8])
    with pytest.raises(DataError):
        load_dataset(tmp_path / "ds")


def test_abnormal_train_dir_rejected_at_load(tmp_path):
    _, test = gen_toy(0)
    save_dataset(test, tmp_path / "ds")
    manifest = (tmp_path / "ds" / "manifest").read_text()
    (tmp_path / "ds" / "manifest").write_text(
        manifest.replace("role=test", "role=train")
    )
    with pytest.raises(DataError):
        load_dataset(tmp_path / "ds")


def test_missing_manifest_is_load_error(tmp_path):
    with pytest.raises(DataError):
        load_dataset(tmp_path / "nothing-here")
