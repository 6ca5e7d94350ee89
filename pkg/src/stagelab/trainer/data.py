"""Datasets: directory loader, tensor cache, class-balanced split, synthetic sets."""
from __future__ import annotations

import math
from fractions import Fraction
import os
from dataclasses import dataclass, field

import numpy as np

from ..archkit.archive import WeightArchive, read_archive, write_archive
from ..errors import DatasetError

STORAGE = {"f16": np.float16, "f32": np.float32}
IMAGE_SUFFIXES = (".png", ".pgm")


@dataclass
class DatasetHandle:
    images: np.ndarray  # (N, C, H, W), storage dtype
    labels: np.ndarray  # (N,) int64
    class_names: tuple
    source: str = "synthetic"
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.class_names = tuple(self.class_names)
        if self.images.ndim != 4:
            raise DatasetError(f"images must be (N, C, H, W), got {self.images.shape}")
        if self.images.shape[0] != self.labels.shape[0]:
            raise DatasetError("image and label counts differ")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise DatasetError(f"labels must lie in [0, {len(self.class_names)})")

    def __len__(self):
        return int(self.labels.shape[0])

    @property
    def image_shape(self):
        return tuple(self.images.shape[1:])

    @property
    def storage(self):
        return "f16" if self.images.dtype == np.float16 else "f32"

    @property
    def num_classes(self):
        return len(self.class_names)

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.num_classes)

    def subset(self, index):
        index = np.asarray(index, dtype=np.int64)
        return DatasetHandle(self.images[index], self.labels[index], self.class_names, self.source, dict(self.info))

    def batch(self, index, dtype=np.float32):
        """Images promoted to the compute dtype, plus labels."""
        return self.images[index].astype(dtype), self.labels[index]


# -- split -------------------------------------------------------------------

def split_counts(sizes, ratio):
    """Per-class train counts: floor shares, leftovers by largest remainder.

    The overall train total is ``round(ratio * N)`` (halves round up); ties
    in remainder go to the earlier class. Arithmetic is exact.
    """
    r = Fraction(ratio).limit_denominator(10**6)
    sizes = [int(s) for s in sizes]
    exact = [r * s for s in sizes]
    counts = [math.floor(e) for e in exact]
    target = math.floor(r * sum(sizes) + Fraction(1, 2))
    order = sorted(range(len(sizes)), key=lambda i: (-(exact[i] - counts[i]), i))
    for i in order[: max(0, target - sum(counts))]:
        counts[i] += 1
    return counts


def split(dataset, ratio=0.8, seed=0):
    """Class-balanced, seeded train/test split."""
    if not 0.0 <= ratio <= 1.0:
        raise DatasetError(f"split ratio must lie in [0, 1], got {ratio}")
    sizes = dataset.class_counts()
    small = [dataset.class_names[i] for i, s in enumerate(sizes) if s < 2]
    if small:
        raise DatasetError(f"classes with fewer than 2 samples cannot be split: {small}")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c, n_train in enumerate(split_counts(sizes, ratio)):
        members = rng.permutation(np.flatnonzero(dataset.labels == c))
        train.append(members[:n_train])
        test.append(members[n_train:])
    train = np.sort(np.concatenate(train))
    test = np.sort(np.concatenate(test))
    return dataset.subset(train), dataset.subset(test)


# -- synthetic data ----------------------------------------------------------

def distribution_params(kind, classes=2, difficulty=0.0, shift=0.0):
    """Generator parameters; ``shift`` perturbs them to emulate another cohort."""
    d, s = float(difficulty), float(shift)
    if kind == "binary_blobs":
        return {
            "background": 0.1 + 0.1 * s,
            "amplitude": [(0.3, 0.5 + 0.4 * d), (0.7 - 0.4 * d, 0.9)],
            "amplitude_scale": 1.0 - 0.3 * s,
            "sigma_frac": 0.125 * (1.0 + 0.25 * s),
            "noise": 0.15 * d + 0.05 * s,
        }
    if kind == "kclass_textures":
        return {
            "brightness": 0.5 + 0.1 * s,
            "contrast": 0.3 * (1.0 - 0.3 * s),
            "frequencies": [2.0 * (c + 1) * (1.0 + 0.2 * s) for c in range(classes)],
            "frequency_jitter": 0.5 * d,
            "noise": 0.1 * d + 0.05 * s,
        }
    raise ValueError(f"unknown synthetic kind {kind!r}")


def synth_dataset(kind, n, image_shape=(3, 64, 64), seed=0, difficulty=0.0,
                  classes=None, shift=0.0, storage="f16"):
    """Deterministic synthetic dataset with balanced labels.

    ``binary_blobs``: one gaussian blob per image whose amplitude range
    depends on the class; at difficulty 0 the class mean intensities are
    disjoint. ``kclass_textures``: sinusoidal gratings whose spatial
    frequency depends on the class.
    """
    classes = classes or 2
    if kind == "binary_blobs" and classes != 2:
        raise ValueError("binary_blobs has exactly 2 classes")
    if n < classes:
        raise DatasetError(f"need at least {classes} samples, got {n}")
    p = distribution_params(kind, classes, difficulty, shift)
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.arange(n) % classes)
    c, h, w = image_shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    out = np.empty((n, h, w))
    for i, label in enumerate(labels):
        if kind == "binary_blobs":
            sigma = p["sigma_frac"] * min(h, w)
            margin = min(3 * sigma, (min(h, w) - 1) / 2)
            cy = rng.uniform(margin, h - 1 - margin)
            cx = rng.uniform(margin, w - 1 - margin)
            amp = rng.uniform(*p["amplitude"][label]) * p["amplitude_scale"]
            img = p["background"] + amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * sigma ** 2))
        else:
            theta = rng.uniform(0, np.pi)
            phase = rng.uniform(0, 2 * np.pi)
            freq = p["frequencies"][label] + rng.uniform(-1, 1) * p["frequency_jitter"]
            proj = (xx * np.cos(theta) + yy * np.sin(theta)) / w
            img = p["brightness"] + p["contrast"] * np.sin(2 * np.pi * freq * proj + phase)
        if p["noise"] > 0:
            img = img + rng.normal(0.0, p["noise"], size=img.shape)
        out[i] = img
    images = np.repeat(np.clip(out, 0.0, 1.0)[:, None], c, axis=1).astype(STORAGE[storage])
    names = ("negative", "positive") if kind == "binary_blobs" else tuple(f"class{k}" for k in range(classes))
    info = {"kind": kind, "seed": seed, "difficulty": difficulty, "shift": shift}
    return DatasetHandle(images, labels, names, "synthetic", info)


# -- directory loader and cache ---------------------------------------------

def _read_image(path, image_shape):
    from PIL import Image

    c, h, w = image_shape
    with Image.open(path) as im:
        if im.mode in ("I;16", "I;16B", "I;16L", "I"):
            arr = np.asarray(im, dtype=np.float64) / 65535.0
            planes = [arr]
        else:
            rgb = im.mode in ("RGB", "RGBA", "P", "CMYK")
            im = im.convert("RGB" if rgb else "L")
            arr = np.asarray(im, dtype=np.float64) / 255.0
            planes = [arr[..., k] for k in range(3)] if arr.ndim == 3 else [arr]
    resized = [
        np.asarray(Image.fromarray(p.astype(np.float32), mode="F").resize((w, h), Image.BILINEAR))
        for p in planes
    ]
    if len(resized) == 1:
        resized = resized * c
    elif len(resized) != c:
        raise DatasetError(f"{path}: {len(resized)} colour planes for a {c}-channel input")
    return np.clip(np.stack(resized), 0.0, 1.0)


def load_directory(root, image_shape=(3, 64, 64), storage="f16"):
    """``root/<class_name>/*.png|pgm`` -> dataset; classes in sorted order."""
    if not os.path.isdir(root):
        raise DatasetError(f"not a directory: {root}")
    classes = sorted(d for d in os.listdir(root) if os.path.isdir(os.path.join(root, d)))
    if not classes:
        raise DatasetError(f"{root} has no class sub-directories")
    images, labels = [], []
    for label, name in enumerate(classes):
        folder = os.path.join(root, name)
        for fname in sorted(os.listdir(folder)):
            if fname.lower().endswith(IMAGE_SUFFIXES):
                images.append(_read_image(os.path.join(folder, fname), image_shape))
                labels.append(label)
    if not images:
        raise DatasetError(f"no .png/.pgm images under {root}")
    arr = np.stack(images).astype(STORAGE[storage])
    return DatasetHandle(arr, labels, classes, "directory", {"root": os.path.abspath(root)})


def save_cache(dataset, path):
    """Images at their storage precision (f16/f32) and labels as f32."""
    meta = {"class_names": list(dataset.class_names), "source": dataset.source, "info": dataset.info}
    archive = WeightArchive.from_arrays(
        [("images", dataset.images, dataset.storage), ("labels", dataset.labels, "f32")], meta=meta
    )
    write_archive(archive, path)
    return archive


def load_cache(path):
    archive = read_archive(path)
    images = archive.array("images")
    labels = archive.array("labels").astype(np.int64)
    meta = archive.meta
    return DatasetHandle(images, labels, meta["class_names"], meta.get("source", "directory"), meta.get("info", {}))
