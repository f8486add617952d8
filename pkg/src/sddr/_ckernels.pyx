# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels; see ``_pykernels`` for semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY

cnp.import_array()


cdef double _kth_smallest(double* buf, Py_ssize_t n, Py_ssize_t k) noexcept nogil:
    # quickselect, 0-based k
    cdef Py_ssize_t lo = 0, hi = n - 1, i, j
    cdef double pivot, tmp
    while lo < hi:
        pivot = buf[(lo + hi) // 2]
        i = lo
        j = hi
        while i <= j:
            while buf[i] < pivot:
                i += 1
            while buf[j] > pivot:
                j -= 1
            if i <= j:
                tmp = buf[i]; buf[i] = buf[j]; buf[j] = tmp
                i += 1
                j -= 1
        if k <= j:
            hi = j
        elif k >= i:
            lo = i
        else:
            break
    return buf[k]


def os_cfar_1d(x, Py_ssize_t guard, Py_ssize_t train, Py_ssize_t k, double scale):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0], i, j, lo, hi, m, kk
    out = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] ov = out
    buf_arr = np.empty(2 * train + 1, dtype=np.float64)
    cdef double[::1] buf = buf_arr
    with nogil:
        for i in range(n):
            lo = i - guard - train
            if lo < 0:
                lo = 0
            hi = i + guard + train + 1
            if hi > n:
                hi = n
            m = 0
            for j in range(lo, i - guard):
                buf[m] = xv[j]
                m += 1
            for j in range(i + guard + 1, hi):
                buf[m] = xv[j]
                m += 1
            # same quantile of a shrunken edge window: ceil(k m / 2 train)
            kk = (k * m + 2 * train - 1) // (2 * train)
            if kk < 1:
                kk = 1
            ov[i] = xv[i] > scale * _kth_smallest(&buf[0], m, kk - 1)
    return out


def nearest(P, Q):
    cdef double[:, ::1] pv = np.ascontiguousarray(P, dtype=np.float64)
    cdef double[:, ::1] qv = np.ascontiguousarray(Q, dtype=np.float64)
    cdef Py_ssize_t n = pv.shape[0], m = qv.shape[0], i, j, best
    dist = np.empty(n, dtype=np.float64)
    idx = np.empty(n, dtype=np.int64)
    cdef double[::1] dv = dist
    cdef long long[::1] iv = idx
    cdef double d2, bd, dx, dy, dz
    with nogil:
        for i in range(n):
            bd = INFINITY
            best = 0
            for j in range(m):
                dx = pv[i, 0] - qv[j, 0]
                dy = pv[i, 1] - qv[j, 1]
                dz = pv[i, 2] - qv[j, 2]
                d2 = dx * dx + dy * dy + dz * dz
                if d2 < bd:
                    bd = d2
                    best = j
            dv[i] = sqrt(bd)
            iv[i] = best
    return dist, idx


def assignment(cost):
    cdef double[:, ::1] C = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n = C.shape[0], m = C.shape[1], i, j, j0, j1, i0
    if n > m:
        raise ValueError("assignment needs rows <= columns")
    u_a = np.zeros(n + 1); v_a = np.zeros(m + 1); minv_a = np.empty(m + 1)
    p_a = np.zeros(m + 1, dtype=np.int64); way_a = np.zeros(m + 1, dtype=np.int64)
    used_a = np.zeros(m + 1, dtype=np.uint8)
    cdef double[::1] u = u_a, v = v_a, minv = minv_a
    cdef long long[::1] p = p_a, way = way_a
    cdef unsigned char[::1] used = used_a
    cdef double delta, cur
    with nogil:
        for i in range(1, n + 1):
            p[0] = i
            j0 = 0
            for j in range(m + 1):
                minv[j] = INFINITY
                used[j] = 0
            while True:
                used[j0] = 1
                i0 = p[j0]
                delta = INFINITY
                j1 = 0
                for j in range(1, m + 1):
                    if not used[j]:
                        cur = C[i0 - 1, j - 1] - u[i0] - v[j]
                        if cur < minv[j]:
                            minv[j] = cur
                            way[j] = j0
                        if minv[j] < delta:
                            delta = minv[j]
                            j1 = j
                for j in range(m + 1):
                    if used[j]:
                        u[p[j]] += delta
                        v[j] -= delta
                    else:
                        minv[j] -= delta
                j0 = j1
                if p[j0] == 0:
                    break
            while j0:
                j1 = way[j0]
                p[j0] = p[j1]
                j0 = j1
    cols = np.empty(n, dtype=np.int64)
    for j in range(1, m + 1):
        if p_a[j]:
            cols[p_a[j] - 1] = j - 1
    return cols
