# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot loops: ball suprema and Peetre maxima."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fmax, INFINITY

cnp.import_array()


def ball_sup(avg, const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices, Py_ssize_t n_points):
    cdef const double[:, ::1] a = np.ascontiguousarray(avg, dtype=np.float64)
    cdef Py_ssize_t S = a.shape[0], nb = a.shape[1]
    out_arr = np.full((S, n_points), -INFINITY)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t s, b, k, x
    cdef double v
    for s in range(S):
        for b in range(nb):
            v = a[s, b]
            for k in range(indptr[b], indptr[b + 1]):
                x = indices[k]
                if v > out[s, x]:
                    out[s, x] = v
    return out_arr


def peetre_max(G, dist, ts, double lam):
    cdef const double[:, :, ::1] g = np.ascontiguousarray(G, dtype=np.float64)
    dist = np.ascontiguousarray(dist, dtype=np.float64)
    cdef const double[::1] t = np.ascontiguousarray(ts, dtype=np.float64)
    cdef Py_ssize_t T = g.shape[0], S = g.shape[1], N = g.shape[2]
    out_arr = np.zeros((T, S, N))
    cdef double[:, :, ::1] out = out_arr
    cdef const double[:, ::1] fac
    cdef Py_ssize_t k, s, x, y
    cdef double m
    for k in range(T):
        # vectorized pow beats a scalar exp/log1p loop; the max reduction stays compiled
        fac = (1.0 + dist / t[k]) ** (-lam)
        for s in range(S):
            for x in range(N):
                m = 0.0
                for y in range(N):
                    m = fmax(m, g[k, s, y] * fac[x, y])
                out[k, s, x] = m
    return out_arr
