# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels. Behaviour matches ``_kernels_py``."""
import numpy as np

cimport cython
from libc.math cimport exp, fabs, tanh, INFINITY

LOGCOSH = 0
GAUSS = 1


def fixed_point_terms(const double[::1] w, const double[:, ::1] zt, int contrast):
    cdef Py_ssize_t n = zt.shape[0]
    cdef Py_ssize_t k = zt.shape[1]
    cdef Py_ssize_t s, c
    cdef double u, g, dg, e
    cdef double acc_dg = 0.0
    out = np.zeros(k)
    cdef double[::1] acc = out
    if contrast != LOGCOSH and contrast != GAUSS:
        raise ValueError(f"unknown contrast id {contrast}")
    for s in range(n):
        u = 0.0
        for c in range(k):
            u += w[c] * zt[s, c]
        if contrast == LOGCOSH:
            g = tanh(u)
            dg = 1.0 - g * g
        else:
            e = exp(-0.5 * u * u)
            g = u * e
            dg = (1.0 - u * u) * e
        for c in range(k):
            acc[c] += zt[s, c] * g
        acc_dg += dg
    for c in range(k):
        acc[c] /= n
    return out, acc_dg / n


def spread_specific_loudness(const double[:] core, const double[:] zup,
                             const double[:] rns, const double[:, :] usl):
    cdef Py_ssize_t last = rns.shape[0] - 1
    cdef Py_ssize_t cap = zup.shape[0] * (last + 3)
    out = np.empty((cap, 4))
    cdef double[:, ::1] seg = out
    cdef Py_ssize_t m = 0
    cdef double total = 0.0, z1 = 0.0, n1 = 0.0, n2 = 0.0, z2 = 0.0
    cdef double zu, nc, dz, slope
    cdef Py_ssize_t i, ig
    cdef Py_ssize_t j = last
    cdef Py_ssize_t ig_max = usl.shape[1] - 1
    for i in range(zup.shape[0]):
        zu = zup[i]
        ig = i - 1
        if ig < 0:
            ig = 0
        if ig > ig_max:
            ig = ig_max
        nc = core[i]
        while z1 < zu:
            if m >= cap:
                raise RuntimeError("segment buffer overflow")
            if n1 <= nc:
                if n1 < nc:
                    j = 0
                    while j < last and rns[j] >= nc:
                        j += 1
                z2 = zu
                n2 = nc
                total += n2 * (z2 - z1)
                seg[m, 0] = z1
                seg[m, 1] = z2
                seg[m, 2] = n2
                seg[m, 3] = n2
            else:
                n2 = rns[j]
                if n2 < nc:
                    n2 = nc
                slope = usl[j, ig]
                dz = (n1 - n2) / slope
                z2 = z1 + dz
                if z2 > zu:
                    z2 = zu
                    dz = z2 - z1
                    n2 = n1 - dz * slope
                total += dz * (n1 + n2) / 2.0
                seg[m, 0] = z1
                seg[m, 1] = z2
                seg[m, 2] = n1
                seg[m, 3] = n2
            m += 1
            while n2 <= rns[j] and j < last:
                j += 1
            z1 = z2
            n1 = n2
    if total < 0.0:
        total = 0.0
    return out[:m].copy(), total


def track_cycle_boundaries(const double[:] crossings, const double[:] periods):
    cdef Py_ssize_t n = crossings.shape[0]
    if n == 0:
        return np.zeros(0), np.zeros(0, dtype=np.int64)
    bounds_arr = np.empty(n)
    chain_arr = np.empty(n, dtype=np.int64)
    cdef double[::1] bounds = bounds_arr
    cdef long long[::1] chain = chain_arr
    cdef Py_ssize_t m = 0, i = 0, k, best
    cdef long long cid = 0
    cdef double p, b, expected, hi, lo, d, bestd
    bounds[0] = crossings[0]
    chain[0] = 0
    m = 1
    while True:
        p = periods[i]
        b = crossings[i]
        expected = b + p
        hi = expected + 0.5 * p
        lo = b + 0.5 * p
        best = -1
        bestd = INFINITY
        k = i + 1
        while k < n and crossings[k] <= hi:
            if crossings[k] > lo:
                d = fabs(crossings[k] - expected)
                if d < bestd:
                    bestd = d
                    best = k
            k += 1
        if best >= 0:
            i = best
        else:
            if k >= n:
                break
            cid += 1
            i = k
        bounds[m] = crossings[i]
        chain[m] = cid
        m += 1
    return bounds_arr[:m].copy(), chain_arr[:m].copy()


def successive_abs_diff(const double[:] values, const long long[:] runs):
    cdef Py_ssize_t n = values.shape[0], i
    cdef double total = 0.0
    cdef Py_ssize_t count = 0
    for i in range(n - 1):
        if runs[i] == runs[i + 1]:
            total += fabs(values[i + 1] - values[i])
            count += 1
    return total, count


def pq_deviation(const double[:] values, const long long[:] runs, int order):
    cdef Py_ssize_t n = values.shape[0], i, j
    cdef Py_ssize_t half = (order - 1) // 2
    cdef double total = 0.0, acc, c
    cdef Py_ssize_t count = 0
    for i in range(n - order + 1):
        if runs[i] != runs[i + order - 1]:
            continue
        # relative to the centre so constant windows give exactly zero
        c = values[i + half]
        acc = 0.0
        for j in range(order):
            acc += values[i + j] - c
        total += fabs(acc) / order
        count += 1
    return total, count
