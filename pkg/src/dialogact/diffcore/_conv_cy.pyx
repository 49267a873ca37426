# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled convolution + max-over-time kernels.

Same contract as ``_conv_numpy``. Windows are scored one sample at a time
and only over that sample's true length, four positions per pass with the
filter axis innermost so the accumulation vectorizes.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


cdef extern from "conv_block.h" nogil:
    void conv_score_block(const double* xp, const double* wt, const double* bias,
                          Py_ssize_t nb, Py_ssize_t d, Py_ssize_t wd, Py_ssize_t nf,
                          double* acc)


def conv_maxpool_forward(double[:, :, ::1] x, long long[::1] lengths,
                         filters, double[::1] bias):
    cdef Py_ssize_t n = x.shape[0], lp = x.shape[1], d = x.shape[2]
    cdef Py_ssize_t nf = filters.shape[0], w = filters.shape[1]
    cdef Py_ssize_t wd = w * d
    cdef double[:, ::1] wt = np.ascontiguousarray(
        np.asarray(filters, dtype=np.float64).reshape(nf, wd).T)
    out_arr = np.empty((n, nf), dtype=np.float64)
    arg_arr = np.zeros((n, nf), dtype=np.int64)
    cdef double[:, ::1] out = out_arr
    cdef long long[:, ::1] arg = arg_arr
    cdef double[::1] acc = np.empty(4 * nf, dtype=np.float64)
    cdef double[::1] best = np.empty(nf, dtype=np.float64)
    cdef Py_ssize_t i, p, j, f, valid, nb
    cdef double s
    with nogil:
        for i in range(n):
            valid = lengths[i] if lengths[i] > w else w
            valid = valid - w + 1
            for f in range(nf):
                best[f] = -INFINITY
                arg[i, f] = 0
            p = 0
            while p < valid:
                nb = valid - p if valid - p < 4 else 4
                conv_score_block(&x[i, p, 0], &wt[0, 0], &bias[0], nb, d, wd, nf, &acc[0])
                for j in range(nb):
                    for f in range(nf):
                        s = acc[j * nf + f]
                        if s > best[f]:
                            best[f] = s
                            arg[i, f] = p + j
                p += nb
            for f in range(nf):
                out[i, f] = best[f] if best[f] > 0.0 else 0.0
    return out_arr, arg_arr


def conv_maxpool_backward(double[:, ::1] grad, double[:, :, ::1] x, filters,
                          double[:, ::1] out, long long[:, ::1] argmax):
    cdef Py_ssize_t n = x.shape[0], lp = x.shape[1], d = x.shape[2]
    cdef Py_ssize_t nf = filters.shape[0], w = filters.shape[1]
    cdef Py_ssize_t wd = w * d
    cdef double[:, ::1] wf = np.ascontiguousarray(
        np.asarray(filters, dtype=np.float64).reshape(nf, wd))
    dx_arr = np.zeros((n, lp, d), dtype=np.float64)
    dw_arr = np.zeros((nf, wd), dtype=np.float64)
    db_arr = np.zeros(nf, dtype=np.float64)
    cdef double[:, :, ::1] dx = dx_arr
    cdef double[:, ::1] dw = dw_arr
    cdef double[::1] db = db_arr
    cdef Py_ssize_t i, f, k, base
    cdef double g
    cdef double* xs
    cdef double* dxs
    with nogil:
        for i in range(n):
            xs = &x[i, 0, 0]
            dxs = &dx[i, 0, 0]
            for f in range(nf):
                g = grad[i, f]
                if out[i, f] <= 0.0 or g == 0.0:
                    continue
                db[f] += g
                base = argmax[i, f] * d
                for k in range(wd):
                    dw[f, k] += g * xs[base + k]
                    dxs[base + k] += g * wf[f, k]
    return dx_arr, dw_arr.reshape(nf, w, d), db_arr
