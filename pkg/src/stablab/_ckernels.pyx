# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot loops in ``_kernels_py``."""
import numpy as np

from libc.math cimport sin, cos, tan, pow, exp, log, sqrt, fabs, isinf, M_PI


cdef inline double _cms(double u, double w, double alpha,
                        double inv_alpha, double expo) noexcept nogil:
    cdef double phi = M_PI * (u - 0.5)
    if alpha == 1.0:
        return tan(phi)
    if alpha == 2.0:
        return 2.0 * sqrt(w) * sin(phi)
    # (1 - alpha)/alpha = 1/alpha - 1 folds the two powers into one
    cdef double c2w = cos((1.0 - alpha) * phi) / w
    return sin(alpha * phi) * pow(c2w / cos(phi), inv_alpha) / c2w


def sas_transform(u, w, double alpha):
    u = np.ascontiguousarray(u, dtype=np.float64)
    shape = u.shape
    cdef double[::1] uf = u.reshape(-1)
    cdef double[::1] wf
    if alpha == 1.0:
        wf = uf
    else:
        wf = np.ascontiguousarray(w, dtype=np.float64).reshape(-1)
    out = np.empty(uf.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i, n = uf.shape[0]
    cdef double ia = 1.0 / alpha, ex = (1.0 - alpha) / alpha
    with nogil:
        for i in range(n):
            o[i] = _cms(uf[i], wf[i], alpha, ia, ex)
    return out.reshape(shape)


cdef inline double _finish(double acc, double q) noexcept nogil:
    if isinf(q):
        return acc
    if q == 1.0:
        return acc
    if q == 2.0:
        return sqrt(acc)
    return pow(acc, 1.0 / q)


cdef inline double _accum(double acc, double v, double wt, double q) noexcept nogil:
    v = fabs(v)
    if isinf(q):
        return v if v > acc else acc
    if q == 1.0:
        return acc + wt * v
    if q == 2.0:
        return acc + wt * v * v
    if v == 0.0:
        return acc
    return acc + wt * exp(q * log(v))


def rows_norm(x, weights, double q):
    cdef double[:, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] wv = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], m = xv.shape[1], i, j
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double acc
    with nogil:
        for i in range(n):
            acc = 0.0
            for j in range(m):
                acc = _accum(acc, xv[i, j], wv[j], q)
            o[i] = _finish(acc, q)
    return out


def cumsum_norm(incr, rho, weights, double q):
    cdef double[:, ::1] xv = np.ascontiguousarray(incr, dtype=np.float64)
    cdef double[::1] wv = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], m = xv.shape[1], i, j
    cdef bint scaled = rho is not None
    cdef double[::1] rv = np.ascontiguousarray(rho if scaled else np.ones(m), dtype=np.float64)
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double acc, s
    with nogil:
        for i in range(n):
            acc = 0.0
            s = 0.0
            for j in range(m):
                s = s + xv[i, j]
                acc = _accum(acc, s * rv[j] if scaled else s, wv[j], q)
            o[i] = _finish(acc, q)
    return out


def block_max_sum(u, w, double alpha, theta):
    cdef double[:, ::1] uv = np.ascontiguousarray(u, dtype=np.float64)
    cdef double[:, ::1] wv = uv if alpha == 1.0 else np.ascontiguousarray(w, dtype=np.float64)
    cdef double[::1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef Py_ssize_t L = th.shape[0], n = uv.shape[0], i, k, lev, lo, width
    if uv.shape[1] < (1 << (L + 1)) - 2:
        raise ValueError("row too short for the requested levels")
    out = np.empty(n)
    cdef double[::1] o = out
    cdef double ia = 1.0 / alpha, ex = (1.0 - alpha) / alpha, acc, mx, v
    with nogil:
        for i in range(n):
            acc = 0.0
            for lev in range(1, L + 1):
                lo = (1 << lev) - 2
                width = 1 << lev
                mx = 0.0
                for k in range(lo, lo + width):
                    v = fabs(_cms(uv[i, k], wv[i, k], alpha, ia, ex))
                    if v > mx:
                        mx = v
                acc = acc + th[lev - 1] * mx
            o[i] = acc
    return out
