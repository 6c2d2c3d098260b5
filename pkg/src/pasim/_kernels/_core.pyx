# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the reference kernels in _ref.py.

Operation order and tie handling match the reference implementations so the
two backends agree to round-off.
"""

import numpy as np

from libc.math cimport cos, sin, floor


def nl_phase_rotate(double complex[::1] ex, double complex[::1] ey, double factor):
    cdef Py_ssize_t i, n = ex.shape[0]
    cdef double p, c, s
    cdef double complex rot
    for i in range(n):
        p = factor * (ex[i].real * ex[i].real + ex[i].imag * ex[i].imag
                      + ey[i].real * ey[i].real + ey[i].imag * ey[i].imag)
        c = cos(p)
        s = sin(p)
        rot = c + 1j * s
        ex[i] = ex[i] * rot
        ey[i] = ey[i] * rot


cdef inline double _decide(double v, double max_level) nogil:
    cdef double o = 2.0 * floor(v / 2.0) + 1.0
    if o > max_level:
        o = max_level
    elif o < -max_level:
        o = -max_level
    return o


def bps_best_angle(double complex[::1] r, double complex[::1] phasors,
                   int half_window, double max_level):
    cdef Py_ssize_t n = r.shape[0]
    cdef Py_ssize_t n_b = phasors.shape[0]
    cdef Py_ssize_t i, b, lo, hi
    best_arr = np.full(n, np.inf)
    besti_arr = np.zeros(n, dtype=np.int32)
    pref_arr = np.empty(n + 1)
    cdef double[::1] best = best_arr
    cdef int[::1] besti = besti_arr
    cdef double[::1] pref = pref_arr
    cdef double complex ph, v
    cdef double dre, dim, w
    for b in range(n_b):
        ph = phasors[b]
        pref[0] = 0.0
        for i in range(n):
            v = r[i] * ph
            dre = v.real - _decide(v.real, max_level)
            dim = v.imag - _decide(v.imag, max_level)
            pref[i + 1] = pref[i] + (dre * dre + dim * dim)
        for i in range(n):
            lo = i - half_window
            hi = i + half_window
            if lo < 0:
                lo = 0
            if hi > n - 1:
                hi = n - 1
            w = pref[hi + 1] - pref[lo]
            if w < best[i]:
                best[i] = w
                besti[i] = <int> b
    return besti_arr


def unwrap_track(double[::1] raw, double period):
    cdef Py_ssize_t i, n = raw.shape[0]
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef double prev = 0.0
    for i in range(n):
        out[i] = raw[i] + floor((prev - raw[i]) / period + 0.5) * period
        prev = out[i]
    return out_arr
