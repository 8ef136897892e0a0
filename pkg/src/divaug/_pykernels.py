"""Pure-numpy twins of the compiled kernels in ``_kernels.pyx``.

Arithmetic follows the compiled loops operation for operation so both
backends produce identical bytes.
"""
import numpy as np


def affine_nearest(src, a, b, c, d, e, f, fill):
    src = np.ascontiguousarray(src, dtype=np.uint8)
    h, w, ch = src.shape
    fy, fx = np.mgrid[0:h, 0:w].astype(np.float64)
    sx = a * fx + b * fy + c
    sy = d * fx + e * fy + f
    ix = np.floor(sx + 0.5).astype(np.int64)
    iy = np.floor(sy + 0.5).astype(np.int64)
    inside = (ix >= 0) & (ix < w) & (iy >= 0) & (iy < h)
    out = np.full((h, w, ch), fill, dtype=np.uint8)
    out[inside] = src[iy[inside], ix[inside]]
    return out


def blend(base, img, factor):
    if base.shape != img.shape:
        raise ValueError("blend operands differ in shape")
    bv = base.astype(np.float64)
    v = np.floor(bv + factor * (img.astype(np.float64) - bv) + 0.5)
    return np.clip(v, 0.0, 255.0).astype(np.uint8)


def smooth3x3(src):
    out = np.array(src, dtype=np.uint8, copy=True)
    h, w = out.shape[:2]
    if h < 3 or w < 3:
        return out
    s = src.astype(np.int64)
    acc = 4 * s[1:-1, 1:-1]
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            acc = acc + s[1 + dy:h - 1 + dy, 1 + dx:w - 1 + dx]
    out[1:-1, 1:-1] = (acc + 6) // 13
    return out


def grayscale(src):
    if src.shape[2] != 3:
        raise ValueError("grayscale expects 3 channels")
    s = src.astype(np.int64)
    return ((299 * s[..., 0] + 587 * s[..., 1] + 114 * s[..., 2] + 500) // 1000).astype(np.uint8)
