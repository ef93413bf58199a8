"""Dataset generation and on-disk round trip.

Two generators, both deterministic functions of a seed:

* gen_toy: 1-D data. Normal draws come from N(2.5, 0.35^2); abnormal
  draws from the mixture 0.5 N(1.5, 0.2^2) + 0.5 N(3.5, 0.22^2) with the
  component chosen by a fair coin per draw. Train split: 10,000 normal.
  Test split: 6,000 normal + 6,000 abnormal.

* gen_blobs: synthetic (c, h, w) feature maps. Normal maps are smooth
  correlated fields, built per channel from a 3x3 grid of separable
  cosine modes cos(pi*p*y/(h-1)) * cos(pi*q*x/(w-1)) with i.i.d. Gaussian
  coefficients damped by 1/(1+p+q). Abnormal maps add a constant-amplitude
  rectangle to every channel; the ground-truth mask is that rectangle
  scaled to the evaluation resolution (nearest-neighbour blocks).

On-disk layout of one split directory (documented bit-exactly):
  manifest          key=value text: format_version, role, count, shape,
                    mask_shape (when annotated), prov.* provenance entries
  samples.bin       count * prod(shape) float64, little-endian, row-major
  labels.bin        count bytes, 0 = normal, 1 = abnormal
  masks/masks.bin   count * H * W bytes (only when pixel-annotated)
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParameterError
from .rng import make_rng

TOY_NORMAL_MEAN = 2.5
TOY_NORMAL_STD = 0.35
TOY_ABNORMAL_MEANS = (1.5, 3.5)
TOY_ABNORMAL_STDS = (0.2, 0.22)
TOY_N_TRAIN = 10_000
TOY_N_TEST_PER_CLASS = 6_000

NORMAL, ABNORMAL = 0, 1

_FORMAT_VERSION = 1


@dataclass
class Dataset:
    """Samples with labels, optional pixel masks, and provenance."""

    samples: np.ndarray  # (n, ...) float64
    labels: np.ndarray  # (n,) uint8
    masks: np.ndarray | None  # (n, H, W) uint8, present iff pixel-annotated
    provenance: dict = field(default_factory=dict)
    role: str = "test"  # "train" splits must be all-normal

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        if self.labels.shape != (self.samples.shape[0],):
            raise DataError("labels must be one per sample")
        if self.role == "train" and np.any(self.labels != NORMAL):
            raise DataError("train split contains abnormal samples")
        if self.masks is not None:
            self.masks = np.asarray(self.masks, dtype=np.uint8)
            if self.masks.ndim != 3 or self.masks.shape[0] != self.samples.shape[0]:
                raise DataError("masks must be (n, H, W), one per sample")
            abnormal = self.labels == ABNORMAL
            if abnormal.any() and np.any(
                self.masks[abnormal].sum(axis=(1, 2)) == 0
            ):
                raise DataError("abnormal sample with empty mask in annotated set")

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def sample_shape(self) -> tuple[int, ...]:
        return self.samples.shape[1:]


def gen_toy(seed: int) -> tuple[Dataset, Dataset]:
    """Fixed-size 1-D toy datasets; deterministic per seed.

    Draw order within the stream: train normals, test normals, abnormal
    mixture components, abnormal values.
    """
    rng = make_rng(seed, "toy")
    train_x = rng.normal(TOY_NORMAL_MEAN, TOY_NORMAL_STD, size=(TOY_N_TRAIN, 1))
    test_norm = rng.normal(
        TOY_NORMAL_MEAN, TOY_NORMAL_STD, size=(TOY_N_TEST_PER_CLASS, 1)
    )
    comp = rng.integers(0, 2, size=TOY_N_TEST_PER_CLASS)
    means = np.asarray(TOY_ABNORMAL_MEANS)[comp]
    stds = np.asarray(TOY_ABNORMAL_STDS)[comp]
    test_abn = (means + stds * rng.standard_normal(TOY_N_TEST_PER_CLASS))[:, None]

    # provenance values are strings so the disk round trip is the identity
    prov = {"generator": "toy", "seed": str(seed)}
    train = Dataset(
        samples=train_x,
        labels=np.zeros(TOY_N_TRAIN, dtype=np.uint8),
        masks=None,
        provenance=dict(prov),
        role="train",
    )
    test = Dataset(
        samples=np.concatenate([test_norm, test_abn]),
        labels=np.concatenate(
            [
                np.zeros(TOY_N_TEST_PER_CLASS, dtype=np.uint8),
                np.ones(TOY_N_TEST_PER_CLASS, dtype=np.uint8),
            ]
        ),
        masks=None,
        provenance=dict(prov),
        role="test",
    )
    return train, test


@dataclass(frozen=True)
class BlobParams:
    """Planted-anomaly parameters for the synthetic feature-map benchmark."""

    amplitude: float = 3.0
    rows: int = 3
    cols: int = 3


def _smooth_field(rng: np.random.Generator, c: int, h: int, w: int) -> np.ndarray:
    """One smooth correlated (c, h, w) map from low-frequency cosine modes."""
    py = np.cos(np.pi * np.outer(np.arange(3), np.linspace(0, 1, h)))  # (3, h)
    px = np.cos(np.pi * np.outer(np.arange(3), np.linspace(0, 1, w)))  # (3, w)
    coef = rng.standard_normal((c, 3, 3))
    damp = 1.0 / (1.0 + np.add.outer(np.arange(3), np.arange(3)))
    return np.einsum("kpq,ph,qw->khw", coef * damp, py, px)


def gen_blobs(
    n_train: int,
    n_test: int,
    dims: tuple[int, int, int] = (4, 8, 8),
    anomaly: BlobParams = BlobParams(),
    seed: int = 0,
    upsample_to: tuple[int, int] = (32, 32),
) -> tuple[Dataset, Dataset]:
    """Smooth-field maps with planted rectangular anomalies in half the test set."""
    c, h, w = dims
    if c < 1 or h < 1 or w < 1 or c * h * w > 512:
        raise ParameterError(f"dims {dims} invalid (need c*h*w <= 512)")
    if not (1 <= anomaly.rows <= h and 1 <= anomaly.cols <= w):
        raise ParameterError(f"blob {anomaly.rows}x{anomaly.cols} does not fit {h}x{w}")
    if n_train < 1 or n_test < 2:
        raise ParameterError("need n_train >= 1 and n_test >= 2")
    H, W = upsample_to
    if H % h != 0 or W % w != 0:
        raise ParameterError(f"upsample target {upsample_to} must be a multiple of {h}x{w}")
    sy, sx = H // h, W // w

    rng = make_rng(seed, "blobs")
    n_abn = n_test // 2
    n_norm_test = n_test - n_abn

    train_x = np.stack([_smooth_field(rng, c, h, w) for _ in range(n_train)])
    test_x = np.stack([_smooth_field(rng, c, h, w) for _ in range(n_test)])
    masks = np.zeros((n_test, H, W), dtype=np.uint8)
    labels = np.zeros(n_test, dtype=np.uint8)
    for i in range(n_norm_test, n_test):
        r0 = int(rng.integers(0, h - anomaly.rows + 1))
        c0 = int(rng.integers(0, w - anomaly.cols + 1))
        test_x[i, :, r0 : r0 + anomaly.rows, c0 : c0 + anomaly.cols] += anomaly.amplitude
        masks[i, r0 * sy : (r0 + anomaly.rows) * sy, c0 * sx : (c0 + anomaly.cols) * sx] = 1
        labels[i] = ABNORMAL

    prov = {
        "generator": "blobs",
        "seed": str(seed),
        "amplitude": repr(anomaly.amplitude),
        "blob": f"{anomaly.rows}x{anomaly.cols}",
    }
    train = Dataset(
        samples=train_x,
        labels=np.zeros(n_train, dtype=np.uint8),
        masks=None,
        provenance=dict(prov),
        role="train",
    )
    test = Dataset(
        samples=test_x, labels=labels, masks=masks, provenance=dict(prov), role="test"
    )
    return train, test


# -- disk round trip --------------------------------------------------------


def save_dataset(dataset: Dataset, path: str | os.PathLike) -> None:
    path = os.fspath(path)
    os.makedirs(path, exist_ok=True)
    lines = [
        f"format_version={_FORMAT_VERSION}",
        f"role={dataset.role}",
        f"count={len(dataset)}",
        "shape=" + ",".join(str(s) for s in dataset.sample_shape),
        f"has_masks={'true' if dataset.masks is not None else 'false'}",
    ]
    if dataset.masks is not None:
        lines.append(f"mask_shape={dataset.masks.shape[1]},{dataset.masks.shape[2]}")
    for key, value in sorted(dataset.provenance.items()):
        lines.append(f"prov.{key}={value}")

    def atomic_write(name: str, payload: bytes):
        target = os.path.join(path, name)
        tmp = target + ".tmp"
        with open(tmp, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, target)

    atomic_write("samples.bin", np.ascontiguousarray(dataset.samples, "<f8").tobytes())
    atomic_write("labels.bin", dataset.labels.tobytes())
    if dataset.masks is not None:
        os.makedirs(os.path.join(path, "masks"), exist_ok=True)
        atomic_write(os.path.join("masks", "masks.bin"), dataset.masks.tobytes())
    atomic_write("manifest", ("\n".join(lines) + "\n").encode("utf-8"))


def _parse_manifest(path: str) -> dict:
    manifest = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, value = line.partition("=")
                manifest[key.strip()] = value.strip()
    except OSError as exc:
        raise DataError(f"cannot read manifest: {exc}") from exc
    return manifest


def load_dataset(path: str | os.PathLike) -> Dataset:
    path = os.fspath(path)
    manifest = _parse_manifest(os.path.join(path, "manifest"))
    try:
        if int(manifest["format_version"]) != _FORMAT_VERSION:
            raise DataError(f"unsupported dataset format {manifest['format_version']}")
        count = int(manifest["count"])
        shape = tuple(int(s) for s in manifest["shape"].split(","))
        has_masks = manifest["has_masks"] == "true"
        role = manifest["role"]
    except (KeyError, ValueError) as exc:
        raise DataError(f"bad manifest in {path}: {exc}") from exc

    def read_exact(name: str, nbytes: int) -> bytes:
        fpath = os.path.join(path, name)
        if not os.path.exists(fpath):
            raise DataError(f"missing {name} in {path}")
        with open(fpath, "rb") as fh:
            raw = fh.read()
        if len(raw) != nbytes:
            raise DataError(f"{name} has {len(raw)} bytes, expected {nbytes}")
        return raw

    n_entries = count * int(np.prod(shape))
    samples = np.frombuffer(read_exact("samples.bin", n_entries * 8), dtype="<f8")
    samples = samples.reshape((count,) + shape).copy()
    labels = np.frombuffer(read_exact("labels.bin", count), dtype=np.uint8).copy()
    masks = None
    if has_masks:
        try:
            H, W = (int(s) for s in manifest["mask_shape"].split(","))
        except (KeyError, ValueError) as exc:
            raise DataError(f"bad mask_shape in {path}: {exc}") from exc
        masks = np.frombuffer(
            read_exact(os.path.join("masks", "masks.bin"), count * H * W),
            dtype=np.uint8,
        )
        masks = masks.reshape(count, H, W).copy()
    provenance = {
        key[len("prov.") :]: value
        for key, value in manifest.items()
        if key.startswith("prov.")
    }
    return Dataset(
        samples=samples, labels=labels, masks=masks, provenance=provenance, role=role
    )
