# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops.

Semantics are defined by :mod:`bgpredict._kernels_py`; this module must agree
with it to rounding.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs

cnp.import_array()


def iir_first_order(const double[::1] x, double b0, double b1, double a1,
                    double x_init, double y_init):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i
    cdef double xp = x_init
    cdef double yp = y_init
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] y = out
    with nogil:
        for i in range(n):
            yp = b0 * x[i] + b1 * xp - a1 * yp
            xp = x[i]
            y[i] = yp
    return out


def gaussian_weights(const double[:, ::1] points, double epsilon):
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t dim = points.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double acc, diff, w
    out = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] W = out
    with nogil:
        for i in range(n):
            W[i, i] = 1.0
            for j in range(i + 1, n):
                acc = 0.0
                for k in range(dim):
                    diff = points[i, k] - points[j, k]
                    acc = acc + diff * diff
                w = exp(-acc / epsilon)
                W[i, j] = w
                W[j, i] = w
    return out


cdef inline int _glycemic_range(double ref, double hypo_max, double hyper_min) nogil:
    if ref <= hypo_max:
        return 0
    if ref <= hyper_min:
        return 1
    return 2


cdef inline int _point_zone(double pred, double ref, const double[::1] p) nogil:
    cdef double hypo_max = p[0]
    cdef double hyper_min = p[1]
    if fabs(pred - ref) <= p[2] * ref or (ref <= hypo_max and pred <= hypo_max):
        return 0
    if (ref <= hypo_max and pred > hyper_min) or (ref > hyper_min and pred <= hypo_max):
        return 4
    if hypo_max < pred <= hyper_min and (ref <= hypo_max or ref > p[3]):
        return 3
    if hypo_max < ref <= p[5] and pred >= ref + p[4]:
        return 2
    if p[6] <= ref <= hyper_min and pred <= p[7] * ref - p[8]:
        return 2
    return 1


cdef inline int _rate_zone(double pred, double ref, const double[::1] q) nogil:
    cdef double delta = fabs(pred - ref)
    cdef double sig = q[2]
    if delta <= q[0]:
        return 0
    if delta <= q[1]:
        return 1
    if pred * ref < 0.0 and fabs(pred) > sig and fabs(ref) > sig:
        return 4
    if fabs(ref) > sig and fabs(pred) <= sig * (1.0 - q[3]):
        return 3
    return 2


def classify_batch(const double[::1] pred, const double[::1] ref,
                   const double[::1] pred_rate, const double[::1] ref_rate,
                   const unsigned char[::1] rate_defined,
                   const double[::1] point_params, const double[::1] rate_params,
                   const signed char[:, :, ::1] combination,
                   const signed char[::1] endpoint):
    cdef Py_ssize_t n = pred.shape[0]
    cdef Py_ssize_t i
    cdef int rng, pz, rz
    ranges_arr = np.empty(n, dtype=np.int8)
    pz_arr = np.empty(n, dtype=np.int8)
    rz_arr = np.empty(n, dtype=np.int8)
    v_arr = np.empty(n, dtype=np.int8)
    cdef signed char[::1] ranges = ranges_arr
    cdef signed char[::1] pzones = pz_arr
    cdef signed char[::1] rzones = rz_arr
    cdef signed char[::1] verdicts = v_arr
    with nogil:
        for i in range(n):
            rng = _glycemic_range(ref[i], point_params[0], point_params[1])
            pz = _point_zone(pred[i], ref[i], point_params)
            ranges[i] = rng
            pzones[i] = pz
            if rate_defined[i]:
                rz = _rate_zone(pred_rate[i], ref_rate[i], rate_params)
                rzones[i] = rz
                verdicts[i] = combination[rng, pz, rz]
            else:
                rzones[i] = -1
                verdicts[i] = endpoint[pz]
    return ranges_arr, pz_arr, rz_arr, v_arr
