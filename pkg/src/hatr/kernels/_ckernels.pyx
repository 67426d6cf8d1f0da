# Compiled kernels for conv/pool data movement. Contracts mirror pyref.py.

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"


def im2col(cnp.float64_t[:, :, :, ::1] xp, int kh, int kw, int sh, int sw, int oh, int ow):
    cdef Py_ssize_t n = xp.shape[0]
    cdef Py_ssize_t hp = xp.shape[1]
    cdef Py_ssize_t wp = xp.shape[2]
    cdef Py_ssize_t c = xp.shape[3]
    out_arr = np.empty((n * oh * ow, kh * kw * c), dtype=np.float64)
    cdef cnp.float64_t[:, ::1] cols = out_arr
    cdef Py_ssize_t b, oy, ox, i, j, ch, row, col
    for b in range(n):
        for oy in range(oh):
            for ox in range(ow):
                row = (b * oh + oy) * ow + ox
                col = 0
                for i in range(kh):
                    for j in range(kw):
                        for ch in range(c):
                            cols[row, col] = xp[b, oy * sh + i, ox * sw + j, ch]
                            col += 1
    return out_arr


def col2im(cnp.float64_t[:, ::1] cols, int n, int hp, int wp, int c,
           int kh, int kw, int sh, int sw, int oh, int ow):
    out_arr = np.zeros((n, hp, wp, c), dtype=np.float64)
    cdef cnp.float64_t[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, oy, ox, i, j, ch, row, col
    for b in range(n):
        for oy in range(oh):
            for ox in range(ow):
                row = (b * oh + oy) * ow + ox
                col = 0
                for i in range(kh):
                    for j in range(kw):
                        for ch in range(c):
                            out[b, oy * sh + i, ox * sw + j, ch] += cols[row, col]
                            col += 1
    return out_arr


def maxpool2_forward(cnp.float64_t[:, :, :, ::1] x):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t h = x.shape[1]
    cdef Py_ssize_t w = x.shape[2]
    cdef Py_ssize_t c = x.shape[3]
    cdef Py_ssize_t oh = h // 2
    cdef Py_ssize_t ow = w // 2
    out_arr = np.empty((n, oh, ow, c), dtype=np.float64)
    idx_arr = np.empty((n, oh, ow, c), dtype=np.uint8)
    cdef cnp.float64_t[:, :, :, ::1] out = out_arr
    cdef cnp.uint8_t[:, :, :, ::1] idx = idx_arr
    cdef Py_ssize_t b, oy, ox, ch, k, di, dj
    cdef cnp.float64_t best, v
    cdef cnp.uint8_t besti
    for b in range(n):
        for oy in range(oh):
            for ox in range(ow):
                for ch in range(c):
                    best = x[b, 2 * oy, 2 * ox, ch]
                    besti = 0
                    for k in range(1, 4):
                        di = k >> 1
                        dj = k & 1
                        v = x[b, 2 * oy + di, 2 * ox + dj, ch]
                        if v > best:
                            best = v
                            besti = <cnp.uint8_t> k
                    out[b, oy, ox, ch] = best
                    idx[b, oy, ox, ch] = besti
    return out_arr, idx_arr


def maxpool2_backward(cnp.float64_t[:, :, :, ::1] g, cnp.uint8_t[:, :, :, ::1] idx):
    cdef Py_ssize_t n = g.shape[0]
    cdef Py_ssize_t oh = g.shape[1]
    cdef Py_ssize_t ow = g.shape[2]
    cdef Py_ssize_t c = g.shape[3]
    out_arr = np.zeros((n, oh * 2, ow * 2, c), dtype=np.float64)
    cdef cnp.float64_t[:, :, :, ::1] dx = out_arr
    cdef Py_ssize_t b, oy, ox, ch, k
    for b in range(n):
        for oy in range(oh):
            for ox in range(ow):
                for ch in range(c):
                    k = idx[b, oy, ox, ch]
                    dx[b, 2 * oy + (k >> 1), 2 * ox + (k & 1), ch] = g[b, oy, ox, ch]
    return out_arr
