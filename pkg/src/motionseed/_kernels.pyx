# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Semantics mirror ``_fallback``; see there for docs."""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport exp, log, fabs, floor

cnp.import_array()


cdef void _row_lse(const double[:, ::1] C, const double[::1] pot, double eps,
                   double[::1] out, int n_threads) noexcept nogil:
    # out[i] = log sum_j exp((pot[j] - C[i, j]) / eps)
    cdef Py_ssize_t i, j
    cdef Py_ssize_t n = C.shape[0]
    cdef Py_ssize_t m = C.shape[1]
    cdef double mx, s, v
    cdef double inv_eps = 1.0 / eps
    for i in prange(n, num_threads=n_threads, schedule="static"):
        mx = pot[0] - C[i, 0]
        for j in range(1, m):
            v = pot[j] - C[i, j]
            if v > mx:
                mx = v
        s = 0.0
        for j in range(m):
            s = s + exp((pot[j] - C[i, j] - mx) * inv_eps)
        out[i] = mx * inv_eps + log(s)


def sinkhorn_log(const double[:, ::1] C, const double[:, ::1] CT,
                 const double[::1] a, const double[::1] b,
                 double eps, int max_iter, double tol, int n_threads=1,
                 f0=None, g0=None):
    cdef Py_ssize_t n = C.shape[0]
    cdef Py_ssize_t m = C.shape[1]
    cdef Py_ssize_t i
    cdef double[::1] f = np.zeros(n) if f0 is None else np.array(f0, dtype=np.float64)
    cdef double[::1] g = np.zeros(m) if g0 is None else np.array(g0, dtype=np.float64)
    cdef double[::1] L = np.empty(n)
    cdef double[::1] Lc = np.empty(m)
    cdef double[::1] log_a = np.log(np.asarray(a))
    cdef double[::1] log_b = np.log(np.asarray(b))
    cdef double err, d
    cdef int it = 0
    cdef bint converged = False
    if n_threads < 1:
        n_threads = 1
    with nogil:
        while True:
            _row_lse(C, g, eps, L, n_threads)
            err = 0.0
            for i in range(n):
                d = fabs(exp(f[i] / eps + L[i]) - a[i])
                if d > err:
                    err = d
            if err <= tol:
                converged = True
                break
            if it >= max_iter:
                break
            for i in range(n):
                f[i] = eps * (log_a[i] - L[i])
            _row_lse(CT, f, eps, Lc, n_threads)
            for i in range(m):
                g[i] = eps * (log_b[i] - Lc[i])
            it += 1
    return np.asarray(f), np.asarray(g), it, err, converged


def transport_plan(const double[:, ::1] C, const double[::1] f, const double[::1] g, double eps,
                   int n_threads=1):
    cdef Py_ssize_t n = C.shape[0], m = C.shape[1], i, j
    cdef double inv_eps = 1.0 / eps
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out_arr = np.empty((n, m))
    cdef double[:, ::1] P = out_arr
    for i in prange(n, nogil=True, num_threads=max(n_threads, 1), schedule="static"):
        for j in range(m):
            P[i, j] = exp((f[i] + g[j] - C[i, j]) * inv_eps)
    return out_arr


cdef inline double _tap(const double[:, :, ::1] src, Py_ssize_t y, Py_ssize_t x, Py_ssize_t c) noexcept nogil:
    if y < 0 or x < 0 or y >= src.shape[0] or x >= src.shape[1]:
        return 0.0
    return src[y, x, c]


def warp_bilinear(const double[:, :, ::1] src, const double[:, ::1] inv,
                  double src_x0, double src_y0, int dst_x0, int dst_y0,
                  int out_h, int out_w):
    cdef cnp.ndarray[cnp.float64_t, ndim=3] out_arr = np.zeros((out_h, out_w, src.shape[2]))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t r, c, k
    cdef double X, Y, sx, sy, fx, fy
    cdef Py_ssize_t ix, iy
    with nogil:
        for r in range(out_h):
            Y = dst_y0 + r
            for c in range(out_w):
                X = dst_x0 + c
                sx = inv[0, 0] * X + inv[0, 1] * Y + inv[0, 2] - src_x0
                sy = inv[1, 0] * X + inv[1, 1] * Y + inv[1, 2] - src_y0
                if sx <= -1.0 or sy <= -1.0 or sx >= src.shape[1] or sy >= src.shape[0]:
                    continue
                ix = <Py_ssize_t>floor(sx)
                iy = <Py_ssize_t>floor(sy)
                fx = sx - ix
                fy = sy - iy
                for k in range(src.shape[2]):
                    out[r, c, k] = (
                        (1.0 - fy) * ((1.0 - fx) * _tap(src, iy, ix, k) + fx * _tap(src, iy, ix + 1, k))
                        + fy * ((1.0 - fx) * _tap(src, iy + 1, ix, k) + fx * _tap(src, iy + 1, ix + 1, k))
                    )
    return out_arr
