# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: neighbor scans and detector matching.

Semantics and float64 operation order match _numpy.py exactly (squared
components accumulated left-to-right), so results are bit-identical and a
run's trace does not depend on which backend was importable.
"""

import numpy as np

BACKEND = "c"


cdef inline double _sq6_row(const double[:, ::1] a, Py_ssize_t i,
                            const double[::1] p) nogil:
    cdef double d, s
    d = a[i, 0] - p[0]
    s = d * d
    d = a[i, 1] - p[1]
    s = s + d * d
    d = a[i, 2] - p[2]
    s = s + d * d
    d = a[i, 3] - p[3]
    s = s + d * d
    d = a[i, 4] - p[4]
    s = s + d * d
    d = a[i, 5] - p[5]
    s = s + d * d
    return s


def in_range_mask(const double[:, ::1] positions, double x, double y,
                  double z, double r2):
    cdef Py_ssize_t n = positions.shape[0]
    out = np.empty(n, dtype=bool)
    cdef unsigned char[::1] o = out.view(np.uint8)
    cdef Py_ssize_t i
    cdef double dx, dy, dz, s
    with nogil:
        for i in range(n):
            dx = positions[i, 0] - x
            dy = positions[i, 1] - y
            dz = positions[i, 2] - z
            s = dx * dx
            s = s + dy * dy
            s = s + dz * dz
            o[i] = s <= r2
    return out


def any_match(const double[:, ::1] centers, double r2, const double[::1] point):
    cdef Py_ssize_t m = centers.shape[0]
    cdef Py_ssize_t i
    for i in range(m):
        if _sq6_row(centers, i, point) <= r2:
            return True
    return False


def match_mask(const double[:, ::1] points, const double[:, ::1] centers,
               double r2):
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t m = centers.shape[0]
    out = np.zeros(n, dtype=bool)
    cdef unsigned char[::1] o = out.view(np.uint8)
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(n):
            for j in range(m):
                if _sq6_row(centers, j, points[i, :]) <= r2:
                    o[i] = 1
                    break
    return out


def nonself_mask(const double[:, ::1] candidates, const double[:, ::1] self_set,
                 double r2):
    cdef Py_ssize_t n = candidates.shape[0]
    cdef Py_ssize_t m = self_set.shape[0]
    out = np.ones(n, dtype=bool)
    cdef unsigned char[::1] o = out.view(np.uint8)
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(n):
            for j in range(m):
                if _sq6_row(self_set, j, candidates[i, :]) <= r2:
                    o[i] = 0
                    break
    return out
