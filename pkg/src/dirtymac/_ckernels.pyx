# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-dimension lattice kernels.

Every kernel mirrors the arithmetic of ``_pykernels`` operation for operation so
both backends return bit-identical arrays.
"""
import numpy as np
from libc.math cimport ceil


cdef inline double _q(double x, double step) nogil:
    return step * ceil(x / step - 0.5)


def quantize(const double[::1] x, double step):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = _q(x[i], step)
    return out


def mod(const double[::1] x, double step):
    cdef Py_ssize_t i, n = x.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            o[i] = x[i] - _q(x[i], step)
    return out


def encode(const double[::1] v, const double[::1] s_est, const double[::1] d,
           double alpha, double step):
    """[v - alpha*s_est + d] mod step*Z, fused."""
    cdef Py_ssize_t i, n = v.shape[0]
    cdef double t
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            t = v[i] - alpha * s_est[i]
            t = t + d[i]
            o[i] = t - _q(t, step)
    return out


def decode(const double[::1] y, const double[::1] d1, const double[::1] d2,
           double alpha_r, double gamma, double beta, double step):
    """[alpha_r*y - gamma*d1 - beta*d2] mod step*Z, fused."""
    cdef Py_ssize_t i, n = y.shape[0]
    cdef double t
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(n):
            t = alpha_r * y[i] - gamma * d1[i]
            t = t - beta * d2[i]
            o[i] = t - _q(t, step)
    return out


def nearest_index(const double[::1] y, double step, long m):
    """Index of the nearest point of (step/m)Z, reduced mod m."""
    cdef Py_ssize_t i, n = y.shape[0]
    cdef double fine = step / m
    cdef long k
    out = np.empty(n, dtype=np.int64)
    cdef long long[::1] o = out
    with nogil:
        for i in range(n):
            k = <long>ceil(y[i] / fine - 0.5)
            k = k % m
            if k < 0:
                k = k + m
            o[i] = k
    return out
