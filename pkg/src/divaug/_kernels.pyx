# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-pixel kernels.

Every function here has a numpy twin in ``_pykernels`` that must return
bit-identical arrays; arithmetic is written in the same operation order.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


def affine_nearest(const unsigned char[:, :, ::1] src,
                   double a, double b, double c,
                   double d, double e, double f,
                   int fill):
    cdef Py_ssize_t h = src.shape[0]
    cdef Py_ssize_t w = src.shape[1]
    cdef Py_ssize_t ch = src.shape[2]
    out = np.empty((h, w, ch), dtype=np.uint8)
    cdef unsigned char[:, :, ::1] dst = out
    cdef Py_ssize_t y, x, k, ix, iy
    cdef double sx, sy, fx, fy
    cdef unsigned char fv = <unsigned char>fill
    with nogil:
        for y in range(h):
            fy = <double>y
            for x in range(w):
                fx = <double>x
                sx = a * fx + b * fy + c
                sy = d * fx + e * fy + f
                ix = <Py_ssize_t>floor(sx + 0.5)
                iy = <Py_ssize_t>floor(sy + 0.5)
                if 0 <= ix < w and 0 <= iy < h:
                    for k in range(ch):
                        dst[y, x, k] = src[iy, ix, k]
                else:
                    for k in range(ch):
                        dst[y, x, k] = fv
    return out


def blend(const unsigned char[:, :, ::1] base,
          const unsigned char[:, :, ::1] img,
          double factor):
    cdef Py_ssize_t h = img.shape[0]
    cdef Py_ssize_t w = img.shape[1]
    cdef Py_ssize_t ch = img.shape[2]
    if base.shape[0] != h or base.shape[1] != w or base.shape[2] != ch:
        raise ValueError("blend operands differ in shape")
    out = np.empty((h, w, ch), dtype=np.uint8)
    cdef unsigned char[:, :, ::1] dst = out
    cdef Py_ssize_t y, x, k
    cdef double bv, v
    with nogil:
        for y in range(h):
            for x in range(w):
                for k in range(ch):
                    bv = <double>base[y, x, k]
                    v = floor(bv + factor * (<double>img[y, x, k] - bv) + 0.5)
                    if v < 0.0:
                        v = 0.0
                    elif v > 255.0:
                        v = 255.0
                    dst[y, x, k] = <unsigned char>v
    return out


def smooth3x3(const unsigned char[:, :, ::1] src):
    cdef Py_ssize_t h = src.shape[0]
    cdef Py_ssize_t w = src.shape[1]
    cdef Py_ssize_t ch = src.shape[2]
    out = np.array(src, dtype=np.uint8, copy=True)
    if h < 3 or w < 3:
        return out
    cdef unsigned char[:, :, ::1] dst = out
    cdef Py_ssize_t y, x, k
    cdef long s
    with nogil:
        for y in range(1, h - 1):
            for x in range(1, w - 1):
                for k in range(ch):
                    s = (<long>src[y - 1, x - 1, k] + src[y - 1, x, k] + src[y - 1, x + 1, k]
                         + src[y, x - 1, k] + 5 * <long>src[y, x, k] + src[y, x + 1, k]
                         + src[y + 1, x - 1, k] + src[y + 1, x, k] + src[y + 1, x + 1, k])
                    dst[y, x, k] = <unsigned char>((s + 6) // 13)
    return out


def grayscale(const unsigned char[:, :, ::1] src):
    cdef Py_ssize_t h = src.shape[0]
    cdef Py_ssize_t w = src.shape[1]
    if src.shape[2] != 3:
        raise ValueError("grayscale expects 3 channels")
    out = np.empty((h, w), dtype=np.uint8)
    cdef unsigned char[:, ::1] dst = out
    cdef Py_ssize_t y, x
    with nogil:
        for y in range(h):
            for x in range(w):
                dst[y, x] = <unsigned char>((299 * <long>src[y, x, 0] + 587 * <long>src[y, x, 1]
                                             + 114 * <long>src[y, x, 2] + 500) // 1000)
    return out
