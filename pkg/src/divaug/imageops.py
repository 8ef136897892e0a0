"""Image transform kernels for the 16 search-space operations.

Images are ``(H, W, C)`` uint8 arrays with ``C`` in ``{1, 3}``. Every
transform returns a new array of the same shape; inputs are never modified.

Magnitudes follow AutoAugment's ranges rescaled to ``[0, 1]``:

=============  =================================================
Rotate         +-30 degrees * m, counter-clockwise for m > 0
ShearX/Y       shear factor +-0.3 * m, about the image centre
TranslateX/Y   +-(10/32) * side * m pixels
Posterize      keep ``8 - round(4m)`` high bits
Solarize       invert pixels >= ``256 * (1 - m)``
Color etc.     enhancement factor ``1 + 0.9 * m``
Cutout         zero a square of side ``round(0.625 * m * min(H, W))``
SamplePairing  blend ``0.4 * m`` of the way towards a partner image
=============  =================================================

Geometric resampling is nearest-neighbour with out-of-bounds pixels set to
128 on every channel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels

GEOMETRIC_FILL = 128
CIFAR_PAD = 4


class OpKind(Enum):
    SHARPNESS = "Sharpness"
    SHEAR_X = "ShearX"
    SHEAR_Y = "ShearY"
    TRANSLATE_X = "TranslateX"
    TRANSLATE_Y = "TranslateY"
    ROTATE = "Rotate"
    AUTO_CONTRAST = "AutoContrast"
    INVERT = "Invert"
    EQUALIZE = "Equalize"
    SOLARIZE = "Solarize"
    POSTERIZE = "Posterize"
    COLOR = "Color"
    BRIGHTNESS = "Brightness"
    CUTOUT = "Cutout"
    SAMPLE_PAIRING = "SamplePairing"
    CONTRAST = "Contrast"


ALL_KINDS: tuple[OpKind, ...] = tuple(OpKind)

# kinds whose direction is drawn at random by apply_op
SIGNED_KINDS = frozenset(
    {
        OpKind.ROTATE,
        OpKind.SHEAR_X,
        OpKind.SHEAR_Y,
        OpKind.TRANSLATE_X,
        OpKind.TRANSLATE_Y,
        OpKind.COLOR,
        OpKind.CONTRAST,
        OpKind.BRIGHTNESS,
        OpKind.SHARPNESS,
    }
)

# kinds for which magnitude 0 is the identity transform
MAGNITUDE_NULL_KINDS = frozenset(
    SIGNED_KINDS | {OpKind.CUTOUT, OpKind.SOLARIZE, OpKind.POSTERIZE, OpKind.SAMPLE_PAIRING}
)


@dataclass(frozen=True)
class Operation:
    kind: OpKind
    p: float
    m: float

    def __post_init__(self):
        if not isinstance(self.kind, OpKind):
            raise TypeError(f"kind must be an OpKind, got {self.kind!r}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if not 0.0 <= self.m <= 1.0:
            raise ValueError(f"m must lie in [0, 1], got {self.m}")


def check_image(image: np.ndarray, name: str = "image") -> np.ndarray:
    if not isinstance(image, np.ndarray) or image.dtype != np.uint8:
        raise TypeError(f"{name} must be a uint8 numpy array")
    if image.ndim != 3 or image.shape[2] not in (1, 3):
        raise ValueError(f"{name} must have shape (H, W, 1|3), got {image.shape}")
    if image.shape[0] < 1 or image.shape[1] < 1:
        raise ValueError(f"{name} is empty")
    return np.ascontiguousarray(image)


# -- geometric -----------------------------------------------------------------


def _warp(image, a, b, c, d, e, f):
    return kernels.affine_nearest(image, a, b, c, d, e, f, GEOMETRIC_FILL)


def rotate(image: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate counter-clockwise about the pixel-grid centre."""
    h, w = image.shape[:2]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    theta = math.radians(degrees)
    cos, sin = math.cos(theta), math.sin(theta)
    # inverse map: output pixel -> source pixel
    return _warp(
        image,
        cos, -sin, cx - cos * cx + sin * cy,
        sin, cos, cy - sin * cx - cos * cy,
    )


def shear_x(image: np.ndarray, factor: float) -> np.ndarray:
    cy = (image.shape[0] - 1) / 2.0
    return _warp(image, 1.0, factor, -factor * cy, 0.0, 1.0, 0.0)


def shear_y(image: np.ndarray, factor: float) -> np.ndarray:
    cx = (image.shape[1] - 1) / 2.0
    return _warp(image, 1.0, 0.0, 0.0, factor, 1.0, -factor * cx)


def translate_x(image: np.ndarray, pixels: float) -> np.ndarray:
    return _warp(image, 1.0, 0.0, -pixels, 0.0, 1.0, 0.0)


def translate_y(image: np.ndarray, pixels: float) -> np.ndarray:
    return _warp(image, 1.0, 0.0, 0.0, 0.0, 1.0, -pixels)


# -- colour ----------------------------------------------------------------------


def _gray(image):
    if image.shape[2] == 1:
        return image[..., 0]
    return kernels.grayscale(image)


def color(image: np.ndarray, factor: float) -> np.ndarray:
    if image.shape[2] == 1:
        return image.copy()
    degenerate = np.repeat(kernels.grayscale(image)[..., None], 3, axis=2)
    return kernels.blend(degenerate, image, factor)


def contrast(image: np.ndarray, factor: float) -> np.ndarray:
    gray = _gray(image)
    mean = int(np.floor(gray.sum(dtype=np.int64) / gray.size + 0.5))
    degenerate = np.full_like(image, mean)
    return kernels.blend(degenerate, image, factor)


def brightness(image: np.ndarray, factor: float) -> np.ndarray:
    return kernels.blend(np.zeros_like(image), image, factor)


def sharpness(image: np.ndarray, factor: float) -> np.ndarray:
    return kernels.blend(kernels.smooth3x3(image), image, factor)


def invert(image: np.ndarray) -> np.ndarray:
    return 255 - image


def posterize(image: np.ndarray, bits: int) -> np.ndarray:
    if not 1 <= bits <= 8:
        raise ValueError(f"bits must lie in [1, 8], got {bits}")
    mask = (0xFF << (8 - bits)) & 0xFF
    return image & np.uint8(mask)


def solarize(image: np.ndarray, threshold: float) -> np.ndarray:
    return np.where(image >= threshold, 255 - image, image).astype(np.uint8)


def autocontrast(image: np.ndarray) -> np.ndarray:
    """Stretch each channel's [min, max] linearly onto [0, 255]."""
    out = np.empty_like(image)
    for k in range(image.shape[2]):
        ch = image[..., k].astype(np.int64)
        lo, hi = int(ch.min()), int(ch.max())
        if hi == lo:
            out[..., k] = image[..., k]
            continue
        span = hi - lo
        out[..., k] = ((ch - lo) * 510 + span) // (2 * span)
    return out


def equalize(image: np.ndarray) -> np.ndarray:
    """Per-channel histogram equalisation.

    Level ``v`` maps to ``floor(255 * below(v) / (N - n_last))`` where
    ``below(v)`` counts pixels darker than ``v`` and ``n_last`` is the count of
    the brightest occupied level. The brightest level always lands on 255 and
    never merges with another, which makes the map idempotent.
    """
    out = np.empty_like(image)
    for k in range(image.shape[2]):
        ch = image[..., k]
        hist = np.bincount(ch.ravel(), minlength=256).astype(np.int64)
        occupied = np.flatnonzero(hist)
        total = int(ch.size - hist[occupied[-1]])
        if total == 0:
            out[..., k] = ch
            continue
        below = np.concatenate(([0], np.cumsum(hist)[:-1]))
        lut = (255 * below) // total
        out[..., k] = np.minimum(lut, 255).astype(np.uint8)[ch]
    return out


# -- occlusion / mixing ------------------------------------------------------------


def cutout(image: np.ndarray, size: int, center: tuple[int, int] | None = None,
           fill: int = 0) -> np.ndarray:
    """Fill a ``size x size`` square centred at ``center``, clipped to the image."""
    out = image.copy()
    if size <= 0:
        return out
    h, w = image.shape[:2]
    cy, cx = center if center is not None else (h // 2, w // 2)
    y0, x0 = cy - size // 2, cx - size // 2
    out[max(0, y0):max(0, min(h, y0 + size)), max(0, x0):max(0, min(w, x0 + size))] = fill
    return out


def sample_pairing(image: np.ndarray, partner: np.ndarray, weight: float) -> np.ndarray:
    return kernels.blend(image, partner, weight)


# -- dispatch ------------------------------------------------------------------------


def apply_transform(kind: OpKind, image: np.ndarray, signed_magnitude: float,
                    partner: np.ndarray | None = None,
                    center: tuple[int, int] | None = None) -> np.ndarray:
    """Apply the deterministic transform of ``kind`` at ``signed_magnitude``.

    Unsigned kinds use ``abs(signed_magnitude)``. ``center`` positions the
    Cutout square (default: image centre) and is ignored by other kinds.

    Raises:
        ValueError: magnitude outside [-1, 1], or a partner that is missing,
            unexpected, or of a different shape.
    """
    image = check_image(image)
    m = float(signed_magnitude)
    if not math.isfinite(m) or abs(m) > 1.0:
        raise ValueError(f"signed magnitude must lie in [-1, 1], got {signed_magnitude}")
    if kind is OpKind.SAMPLE_PAIRING:
        if partner is None:
            raise ValueError("SamplePairing requires a partner image")
        partner = check_image(partner, "partner")
        if partner.shape != image.shape:
            raise ValueError(f"partner shape {partner.shape} != image shape {image.shape}")
    elif partner is not None:
        raise ValueError(f"{kind.value} does not take a partner image")

    h, w = image.shape[:2]
    if kind is OpKind.ROTATE:
        return rotate(image, 30.0 * m)
    if kind is OpKind.SHEAR_X:
        return shear_x(image, 0.3 * m)
    if kind is OpKind.SHEAR_Y:
        return shear_y(image, 0.3 * m)
    if kind is OpKind.TRANSLATE_X:
        return translate_x(image, (10.0 / 32.0) * w * m)
    if kind is OpKind.TRANSLATE_Y:
        return translate_y(image, (10.0 / 32.0) * h * m)
    if kind is OpKind.COLOR:
        return color(image, 1.0 + 0.9 * m)
    if kind is OpKind.CONTRAST:
        return contrast(image, 1.0 + 0.9 * m)
    if kind is OpKind.BRIGHTNESS:
        return brightness(image, 1.0 + 0.9 * m)
    if kind is OpKind.SHARPNESS:
        return sharpness(image, 1.0 + 0.9 * m)

    m = abs(m)
    if kind is OpKind.INVERT:
        return invert(image)
    if kind is OpKind.AUTO_CONTRAST:
        return autocontrast(image)
    if kind is OpKind.EQUALIZE:
        return equalize(image)
    if kind is OpKind.POSTERIZE:
        return posterize(image, 8 - int(math.floor(4.0 * m + 0.5)))
    if kind is OpKind.SOLARIZE:
        return solarize(image, 256.0 * (1.0 - m))
    if kind is OpKind.CUTOUT:
        return cutout(image, int(math.floor(0.625 * m * min(h, w) + 0.5)), center)
    if kind is OpKind.SAMPLE_PAIRING:
        return sample_pairing(image, partner, 0.4 * m)
    raise ValueError(f"unknown operation kind {kind!r}")


def apply_op(op: Operation, image: np.ndarray, rng: np.random.Generator,
             partner: np.ndarray | None = None) -> np.ndarray:
    """Apply ``op`` with probability ``op.p``.

    Draw order from ``rng``: one uniform for the gate; then, only if the
    transform fires, one uniform for the sign (signed kinds) and two integers
    for the square's centre (Cutout).
    """
    if rng.random() >= op.p:
        return image.copy()
    magnitude = op.m
    if op.kind in SIGNED_KINDS and rng.random() < 0.5:
        magnitude = -magnitude
    center = None
    if op.kind is OpKind.CUTOUT:
        h, w = image.shape[:2]
        center = (int(rng.integers(h)), int(rng.integers(w)))
    return apply_transform(op.kind, image, magnitude,
                           partner if op.kind is OpKind.SAMPLE_PAIRING else None, center)


# -- dataset default augmentation ----------------------------------------------------

DATASET_KINDS = ("cifar", "svhn", "synthetic")


def pad_crop(image: np.ndarray, offset_y: int, offset_x: int, pad: int = CIFAR_PAD) -> np.ndarray:
    """Zero-pad by ``pad`` pixels per side, then crop the original size at the offset."""
    h, w = image.shape[:2]
    if not (0 <= offset_y <= 2 * pad and 0 <= offset_x <= 2 * pad):
        raise ValueError(f"crop offset ({offset_y}, {offset_x}) outside [0, {2 * pad}]")
    padded = np.pad(image, ((pad, pad), (pad, pad), (0, 0)))
    return np.ascontiguousarray(padded[offset_y:offset_y + h, offset_x:offset_x + w])


def default_cutout_size(image: np.ndarray) -> int:
    # 16 on 32-pixel images
    return max(1, min(image.shape[:2]) // 2)


def default_augment(image: np.ndarray, dataset_kind: str, rng: np.random.Generator) -> np.ndarray:
    """Pad-4 random crop, horizontal flip (not for svhn), then a zeroed square.

    Draw order: crop row offset, crop column offset, flip uniform (cifar and
    synthetic only), cutout centre row, cutout centre column.
    """
    image = check_image(image)
    if dataset_kind not in DATASET_KINDS:
        raise ValueError(f"unknown dataset kind {dataset_kind!r}")
    if dataset_kind in ("cifar", "svhn") and image.shape != (32, 32, 3):
        raise ValueError(f"{dataset_kind} images must be 32x32x3, got {image.shape}")
    h, w = image.shape[:2]
    if min(h, w) < 2:
        raise ValueError(f"image too small for default augmentation: {image.shape}")
    out = pad_crop(image, int(rng.integers(0, 2 * CIFAR_PAD + 1)),
                   int(rng.integers(0, 2 * CIFAR_PAD + 1)))
    if dataset_kind != "svhn" and rng.random() < 0.5:
        out = np.ascontiguousarray(out[:, ::-1])
    center = (int(rng.integers(h)), int(rng.integers(w)))
    return cutout(out, default_cutout_size(image), center)
