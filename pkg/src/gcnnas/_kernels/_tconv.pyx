# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled temporal-convolution kernels (frame axis, zero padding).

Same contracts as the reference backend in ref.py; direct loops instead
of im2col, which wins at the small per-call shapes this model runs on.
"""

import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()

ctypedef fused real:
    float
    double

BACKEND = "compiled"


def temporal_conv_fwd(cnp.ndarray x_arr, cnp.ndarray w_arr, int stride):
    x_arr = np.ascontiguousarray(x_arr)
    w_arr = np.ascontiguousarray(w_arr)
    y = np.zeros(
        (x_arr.shape[0], w_arr.shape[0],
         1 + (x_arr.shape[2] + 2 * ((w_arr.shape[2] - 1) // 2) - w_arr.shape[2]) // stride,
         x_arr.shape[3]),
        dtype=x_arr.dtype,
    )
    if x_arr.dtype == np.float32:
        _fwd[float](x_arr, w_arr, y, stride)
    else:
        _fwd[double](x_arr, w_arr, y, stride)
    return y


def temporal_conv_bwd_x(cnp.ndarray g_arr, cnp.ndarray w_arr, int stride, int t_in):
    g_arr = np.ascontiguousarray(g_arr)
    w_arr = np.ascontiguousarray(w_arr)
    dx = np.zeros((g_arr.shape[0], w_arr.shape[1], t_in, g_arr.shape[3]), dtype=g_arr.dtype)
    if g_arr.dtype == np.float32:
        _bwd_x[float](g_arr, w_arr, dx, stride)
    else:
        _bwd_x[double](g_arr, w_arr, dx, stride)
    return dx


def temporal_conv_bwd_w(cnp.ndarray x_arr, cnp.ndarray g_arr, int stride, int k):
    x_arr = np.ascontiguousarray(x_arr)
    g_arr = np.ascontiguousarray(g_arr)
    dw = np.zeros((g_arr.shape[1], x_arr.shape[1], k), dtype=x_arr.dtype)
    if x_arr.dtype == np.float32:
        _bwd_w[float](x_arr, g_arr, dw, stride)
    else:
        _bwd_w[double](x_arr, g_arr, dw, stride)
    return dw


@cython.boundscheck(False)
@cython.wraparound(False)
cdef void _fwd(real[:, :, :, ::1] x, real[:, :, ::1] w, real[:, :, :, ::1] y, int stride) noexcept:
    cdef Py_ssize_t n = x.shape[0], c_in = x.shape[1], t = x.shape[2], v = x.shape[3]
    cdef Py_ssize_t c_out = w.shape[0], k = w.shape[2], t_out = y.shape[2]
    cdef Py_ssize_t pad = (k - 1) // 2
    cdef Py_ssize_t bi, o, c, ti, kk, vi, src
    cdef real tap
    for bi in range(n):
        for o in range(c_out):
            for c in range(c_in):
                for kk in range(k):
                    tap = w[o, c, kk]
                    if tap == 0:
                        continue
                    for ti in range(t_out):
                        src = ti * stride + kk - pad
                        if src < 0 or src >= t:
                            continue
                        for vi in range(v):
                            y[bi, o, ti, vi] += tap * x[bi, c, src, vi]


@cython.boundscheck(False)
@cython.wraparound(False)
cdef void _bwd_x(real[:, :, :, ::1] g, real[:, :, ::1] w, real[:, :, :, ::1] dx, int stride) noexcept:
    cdef Py_ssize_t n = g.shape[0], c_out = g.shape[1], t_out = g.shape[2], v = g.shape[3]
    cdef Py_ssize_t c_in = w.shape[1], k = w.shape[2], t = dx.shape[2]
    cdef Py_ssize_t pad = (k - 1) // 2
    cdef Py_ssize_t bi, o, c, ti, kk, vi, src
    cdef real tap
    for bi in range(n):
        for o in range(c_out):
            for c in range(c_in):
                for kk in range(k):
                    tap = w[o, c, kk]
                    if tap == 0:
                        continue
                    for ti in range(t_out):
                        src = ti * stride + kk - pad
                        if src < 0 or src >= t:
                            continue
                        for vi in range(v):
                            dx[bi, c, src, vi] += tap * g[bi, o, ti, vi]


@cython.boundscheck(False)
@cython.wraparound(False)
cdef void _bwd_w(real[:, :, :, ::1] x, real[:, :, :, ::1] g, real[:, :, ::1] dw, int stride) noexcept:
    cdef Py_ssize_t n = x.shape[0], c_in = x.shape[1], t = x.shape[2], v = x.shape[3]
    cdef Py_ssize_t c_out = g.shape[1], t_out = g.shape[2], k = dw.shape[2]
    cdef Py_ssize_t pad = (k - 1) // 2
    cdef Py_ssize_t bi, o, c, ti, kk, vi, src
    cdef real acc
    for o in range(c_out):
        for c in range(c_in):
            for kk in range(k):
                acc = 0
                for bi in range(n):
                    for ti in range(t_out):
                        src = ti * stride + kk - pad
                        if src < 0 or src >= t:
                            continue
                        for vi in range(v):
                            acc += x[bi, c, src, vi] * g[bi, o, ti, vi]
                dw[o, c, kk] += acc
