"""Dataset ingestion: CIFAR-10 binary batches, image directories, synthetic shapes."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from . import rng as rngs

CIFAR_RECORD_BYTES = 1 + 32 * 32 * 3
MANIFEST_NAME = "manifest.csv"
SHAPES = ("circle", "square", "triangle", "cross", "ring",
          "diamond", "hbar", "vbar", "xshape", "frame")


@dataclass
class DatasetSplit:
    images: np.ndarray   # (N, H, W, C) uint8
    labels: np.ndarray   # (N,) int64
    num_classes: int
    kind: str = "synthetic"

    def __post_init__(self):
        self.images = np.ascontiguousarray(self.images, dtype=np.uint8)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4:
            raise ValueError(f"images must be (N, H, W, C), got {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise ValueError("images and labels differ in length")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.images.shape[1:])


# -- CIFAR-10 binary --------------------------------------------------------------


def load_cifar10_binary(path) -> DatasetSplit:
    """Parse 3073-byte records: label byte, then R, G, B planes of 32x32."""
    data = Path(path).read_bytes()
    if len(data) % CIFAR_RECORD_BYTES:
        raise ValueError(f"{path}: {len(data)} bytes is not a whole number of "
                         f"{CIFAR_RECORD_BYTES}-byte records (truncated file?)")
    records = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
    labels = records[:, 0].astype(np.int64)
    if len(labels) and labels.max() > 9:
        bad = int(np.flatnonzero(labels > 9)[0])
        raise ValueError(f"{path}: record {bad} has label byte {labels[bad]} > 9")
    images = records[:, 1:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1)
    return DatasetSplit(images, labels, 10, kind="cifar")


def write_cifar10_binary(path, images, labels) -> None:
    images = np.asarray(images, dtype=np.uint8)
    planes = images.transpose(0, 3, 1, 2).reshape(len(images), -1)
    records = np.concatenate([np.asarray(labels, dtype=np.uint8)[:, None], planes], axis=1)
    Path(path).write_bytes(records.tobytes())


# -- image directories ----------------------------------------------------------------


def read_image(path) -> np.ndarray:
    with PILImage.open(path) as im:
        if im.mode not in ("L", "RGB"):
            im = im.convert("RGB")
        arr = np.asarray(im, dtype=np.uint8)
    return arr[..., None] if arr.ndim == 2 else arr


def write_image(path, image: np.ndarray) -> None:
    arr = image[..., 0] if image.shape[2] == 1 else image
    PILImage.fromarray(np.ascontiguousarray(arr)).save(path)


def read_manifest(path) -> list[tuple[str, int]]:
    """``filename,label`` rows; a header row starting with ``filename`` is skipped."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].startswith("#") or row[0].strip() == "filename":
                continue
            if len(row) < 2:
                raise ValueError(f"{path}: manifest row {row!r} lacks a label")
            rows.append((row[0].strip(), int(row[1])))
    return rows


def load_image_dir(directory, manifest: str = MANIFEST_NAME) -> DatasetSplit:
    directory = Path(directory)
    entries = read_manifest(directory / manifest)
    if not entries:
        raise ValueError(f"{directory}: empty manifest")
    images = [read_image(directory / name) for name, _ in entries]
    shapes = {im.shape for im in images}
    if len(shapes) != 1:
        raise ValueError(f"{directory}: images differ in shape: {sorted(shapes)}")
    labels = np.array([label for _, label in entries], dtype=np.int64)
    kind = "cifar" if images[0].shape == (32, 32, 3) else "synthetic"
    return DatasetSplit(np.stack(images), labels, int(labels.max()) + 1, kind=kind)


# -- synthetic shapes -------------------------------------------------------------------


def _shape_mask(name: str, dx: np.ndarray, dy: np.ndarray, r: float) -> np.ndarray:
    ax, ay = np.abs(dx), np.abs(dy)
    dist = np.hypot(dx, dy)
    if name == "circle":
        return dist <= r
    if name == "square":
        return np.maximum(ax, ay) <= 0.85 * r
    if name == "triangle":
        return (dy <= 0.7 * r) & (ax <= 0.6 * (dy + r))
    if name == "cross":
        return ((ax <= 0.3 * r) & (ay <= r)) | ((ay <= 0.3 * r) & (ax <= r))
    if name == "ring":
        return (dist <= r) & (dist >= 0.55 * r)
    if name == "diamond":
        return ax + ay <= r
    if name == "hbar":
        return (ay <= 0.3 * r) & (ax <= r)
    if name == "vbar":
        return (ax <= 0.3 * r) & (ay <= r)
    if name == "xshape":
        return (np.abs(ax - ay) <= 0.35 * r) & (np.maximum(ax, ay) <= r)
    if name == "frame":
        m = np.maximum(ax, ay)
        return (m <= 0.85 * r) & (m >= 0.55 * r)
    raise ValueError(f"unknown shape {name!r}")


CENTRE_JITTER = 0.2          # centre offset from the middle, fraction of the side
RADIUS_RANGE = (0.28, 0.4)   # shape radius, fraction of the side


def generate_synthetic(classes: int = 3, samples_per_class: int = 200, size: int = 32,
                       seed: int = 0, channels: int = 3) -> DatasetSplit:
    """Filled shapes on a dark noisy background, one shape per class.

    Each sample draws its centre (within 20% of the image side from the
    middle), radius (28-40% of the side), foreground level per channel in
    [140, 255], background level in [0, 90] and Gaussian pixel noise
    (sigma 8). Shapes are large enough that a half-side Cutout patch never
    hides the whole object. Items are ordered class by class.
    """
    if not 2 <= classes <= len(SHAPES):
        raise ValueError(f"classes must lie in [2, {len(SHAPES)}], got {classes}")
    if size < 8:
        raise ValueError(f"size must be >= 8, got {size}")
    if channels not in (1, 3):
        raise ValueError("channels must be 1 or 3")
    if samples_per_class < 1:
        raise ValueError("samples_per_class must be >= 1")
    g = rngs.stream(seed, rngs.SYNTHETIC)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) + 0.5
    images = np.empty((classes * samples_per_class, size, size, channels), dtype=np.uint8)
    labels = np.repeat(np.arange(classes), samples_per_class)
    for n, label in enumerate(labels):
        cy, cx = size / 2 + g.uniform(-CENTRE_JITTER, CENTRE_JITTER, size=2) * size
        r = g.uniform(*RADIUS_RANGE) * size
        fg = g.uniform(140, 255, size=channels)
        bg = g.uniform(0, 90, size=channels)
        mask = _shape_mask(SHAPES[label], xx - cx, yy - cy, r)
        img = np.where(mask[..., None], fg, bg) + g.normal(0.0, 8.0, size=(size, size, channels))
        images[n] = np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)
    return DatasetSplit(images, labels, classes, kind="synthetic")


# -- dataset specs -----------------------------------------------------------------------


def parse_kv(text: str) -> dict[str, str]:
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part:
            raise ValueError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


_SYNTH_KEYS = {"classes": int, "samples_per_class": int, "size": int, "seed": int, "channels": int}


def load_dataset(spec: str) -> DatasetSplit:
    """Load from ``synthetic:k=v,...``, ``cifar10:<file>`` or ``dir:<path>`` (or a bare path)."""
    kind, _, rest = spec.partition(":")
    if kind == "synthetic":
        params = parse_kv(rest)
        unknown = set(params) - set(_SYNTH_KEYS)
        if unknown:
            raise ValueError(f"unknown synthetic parameters: {sorted(unknown)}")
        return generate_synthetic(**{k: _SYNTH_KEYS[k](v) for k, v in params.items()})
    if kind == "cifar10":
        return load_cifar10_binary(rest)
    if kind == "dir":
        return load_image_dir(rest)
    path = Path(spec)
    if path.is_dir():
        return load_image_dir(path)
    if path.is_file():
        return load_cifar10_binary(path)
    raise ValueError(f"cannot interpret dataset spec {spec!r}")
