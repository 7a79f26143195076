# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Gaussian-kernel kernels. Mirrors ``_core_py`` exactly in contract."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

BACKEND = "cython"


def gaussian_gram(const double[:, ::1] x, const double[:, ::1] y, double sigma):
    cdef Py_ssize_t n = x.shape[0], m = y.shape[0], d = x.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double s, t, scale = -0.5 / (sigma * sigma)
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef bint same = (&x[0, 0] == &y[0, 0]) and n == m
    if same:
        for i in range(n):
            o[i, i] = 1.0
            for j in range(i + 1, n):
                s = 0.0
                for k in range(d):
                    t = x[i, k] - x[j, k]
                    s += t * t
                s = exp(s * scale)
                o[i, j] = s
                o[j, i] = s
    else:
        for i in range(n):
            for j in range(m):
                s = 0.0
                for k in range(d):
                    t = x[i, k] - y[j, k]
                    s += t * t
                o[i, j] = exp(s * scale)
    return out


def gaussian_quad_grad(const double[:, ::1] x, const double[::1] c, const double[:, ::1] kmat, double sigma):
    """Gradient of c^T K(x) c with respect to every row of x."""
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    cdef Py_ssize_t i, k
    cdef int m = <int>(d + 1), nn = <int>n
    cdef double one = 1.0, zero = 0.0, f = -2.0 / (sigma * sigma)
    out = np.empty((n, d), dtype=np.float64)
    if n == 0:
        return out
    cdef double[:, ::1] g = out
    # rows of y are (c_j x_j, c_j); z = K y gives both sums in one BLAS call
    y_arr = np.empty((n, d + 1), dtype=np.float64)
    z_arr = np.empty((n, d + 1), dtype=np.float64)
    cdef double[:, ::1] y = y_arr
    cdef double[:, ::1] z = z_arr
    for i in range(n):
        for k in range(d):
            y[i, k] = c[i] * x[i, k]
        y[i, d] = c[i]
    # row-major z = K y is column-major z^T = y^T K^T
    dgemm("N", "N", &m, &nn, &nn, &one, &y[0, 0], &m, <double*>&kmat[0, 0], &nn, &zero, &z[0, 0], &m)
    for i in range(n):
        for k in range(d):
            g[i, k] = f * c[i] * (x[i, k] * z[i, d] - z[i, k])
    return out
