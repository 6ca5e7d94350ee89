import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from stagelab.errors import DatasetError
from stagelab.trainer import (
    DatasetHandle,
    distribution_params,
    load_cache,
    load_directory,
    save_cache,
    split,
    split_counts,
    synth_dataset,
)


def labelled(sizes):
    labels = np.repeat(np.arange(len(sizes)), sizes)
    return DatasetHandle(np.zeros((len(labels), 1, 1, 1), np.float16), labels, [f"c{i}" for i in range(len(sizes))])


def test_published_split_totals():
    counts = split_counts([708, 1426, 930], 0.8)
    assert counts == [566, 1141, 744] and sum(counts) == 2451 and 3064 - sum(counts) == 613
    counts = split_counts([689, 370, 463, 868, 314], 0.8)
    assert sum(counts) == 2163 and 2704 - sum(counts) == 541


@given(st.lists(st.integers(2, 400), min_size=1, max_size=6), st.sampled_from([0.5, 0.7, 0.8, 0.9]))
def test_split_counts_balanced(sizes, ratio):
    counts = split_counts(sizes, ratio)
    assert all(abs(c - ratio * s) < 1 for c, s in zip(counts, sizes))
    assert sum(counts) == int(np.floor(ratio * sum(sizes) + 0.5))


def test_split_partitions_and_is_seeded():
    ds = labelled([10, 7, 5])
    train, test = split(ds, 0.8, seed=3)
    assert len(train) + len(test) == 22
    assert list(train.class_counts()) == split_counts([10, 7, 5], 0.8)
    again, _ = split(ds, 0.8, seed=3)
    assert np.array_equal(train.labels, again.labels)
    full, empty = split(ds, 1.0)
    assert len(full) == 22 and len(empty) == 0


def test_split_errors():
    with pytest.raises(DatasetError, match="c1"):
        split(labelled([5, 1]), 0.8)
    with pytest.raises(DatasetError):
        split(labelled([5, 5]), 1.5)


def test_synthetic_determinism():
    a = synth_dataset("binary_blobs", 20, seed=4)
    b = synth_dataset("binary_blobs", 20, seed=4)
    assert a.images.tobytes() == b.images.tobytes() and np.array_equal(a.labels, b.labels)
    assert a.images.dtype == np.float16 and a.image_shape == (3, 64, 64)
    assert synth_dataset("binary_blobs", 20, seed=5).images.tobytes() != a.images.tobytes()


def test_blobs_separable_by_mean_threshold():
    ds = synth_dataset("binary_blobs", 200, seed=1, difficulty=0.0)
    # Blob amplitude ranges are disjoint, so the per-image peak separates classes.
    peak = ds.images.astype(np.float64).max(axis=(1, 2, 3))
    lo, hi = peak[ds.labels == 0], peak[ds.labels == 1]
    assert lo.max() < hi.min()
    mean = ds.images.astype(np.float64).mean(axis=(1, 2, 3))
    threshold = (mean[ds.labels == 0].max() + mean[ds.labels == 1].min()) / 2
    assert ((mean > threshold) == (ds.labels == 1)).all()


def test_textures_and_shift():
    ds = synth_dataset("kclass_textures", 30, image_shape=(1, 32, 32), classes=3, seed=2, storage="f32")
    assert ds.num_classes == 3 and list(ds.class_counts()) == [10, 10, 10]
    assert ds.images.dtype == np.float32 and ds.image_shape == (1, 32, 32)
    for kind in ("binary_blobs", "kclass_textures"):
        assert distribution_params(kind, 2, 0.3, 0.0) == distribution_params(kind, 2, 0.3)
        assert distribution_params(kind, 2, 0.3, 0.5) != distribution_params(kind, 2, 0.3)
    with pytest.raises(ValueError):
        synth_dataset("binary_blobs", 10, classes=3)
    with pytest.raises(DatasetError):
        synth_dataset("kclass_textures", 2, classes=3)


def write_images(root):
    (root / "b_cls").mkdir(parents=True)
    (root / "a_cls").mkdir()
    Image.fromarray(np.full((10, 12), 255, np.uint8), "L").save(root / "a_cls" / "x.png")
    Image.fromarray(np.full((10, 12), 0, np.uint8), "L").save(root / "a_cls" / "y.pgm")
    Image.fromarray(np.full((8, 8), 65535, np.uint16)).save(root / "b_cls" / "z.png")
    rgb = np.zeros((6, 6, 3), np.uint8)
    rgb[..., 0] = 255
    Image.fromarray(rgb, "RGB").save(root / "b_cls" / "w.png")
    (root / "b_cls" / "notes.txt").write_text("ignored")


def test_directory_loader(tmp_path):
    write_images(tmp_path)
    ds = load_directory(tmp_path, (3, 16, 16), storage="f32")
    assert ds.class_names == ("a_cls", "b_cls") and len(ds) == 4
    assert list(ds.labels) == [0, 0, 1, 1]
    imgs = ds.images
    assert imgs.shape == (4, 3, 16, 16)
    np.testing.assert_allclose(imgs[0], 1.0)  # 8-bit white, replicated
    np.testing.assert_allclose(imgs[1], 0.0)
    np.testing.assert_allclose(imgs[3], 1.0, atol=1e-6)  # 16-bit white (sorted: w.png before z.png)
    np.testing.assert_allclose(imgs[2][0], 1.0)  # red channel of the RGB file
    np.testing.assert_allclose(imgs[2][1:], 0.0)


def test_directory_errors(tmp_path):
    with pytest.raises(DatasetError):
        load_directory(tmp_path / "missing")
    with pytest.raises(DatasetError, match="class"):
        load_directory(tmp_path)
    (tmp_path / "c").mkdir()
    with pytest.raises(DatasetError, match="no .png"):
        load_directory(tmp_path)


@pytest.mark.parametrize("storage", ["f16", "f32"])
def test_cache_round_trip(tmp_path, storage):
    ds = synth_dataset("kclass_textures", 9, image_shape=(3, 8, 8), classes=3, storage=storage)
    save_cache(ds, tmp_path / "c.stgw")
    back = load_cache(tmp_path / "c.stgw")
    assert back.images.dtype == ds.images.dtype
    assert back.images.tobytes() == ds.images.tobytes()
    assert np.array_equal(back.labels, ds.labels) and back.class_names == ds.class_names


def test_batch_promotes_storage():
    ds = synth_dataset("binary_blobs", 4)
    x, y = ds.batch([0, 1])
    assert x.dtype == np.float32 and len(y) == 2


def test_handle_validation():
    with pytest.raises(DatasetError):
        DatasetHandle(np.zeros((2, 1, 1, 1)), [0, 2], ["a", "b"])
    with pytest.raises(DatasetError):
        DatasetHandle(np.zeros((2, 1, 1)), [0, 1], ["a", "b"])
