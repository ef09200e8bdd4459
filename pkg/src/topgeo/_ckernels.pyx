# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled geometric and assignment kernels.

Every routine here has a bit-compatible twin in ``_pykernels``; squared
distances are always accumulated as ``(dx*dx + dy*dy) + dz*dz`` so both
backends make identical tie decisions.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


cdef inline bint _key_less(double da, double xa, double ya, double za, Py_ssize_t ia,
                           double db, double xb, double yb, double zb, Py_ssize_t ib) noexcept nogil:
    if da != db:
        return da < db
    if xa != xb:
        return xa < xb
    if ya != yb:
        return ya < yb
    if za != zb:
        return za < zb
    return ia < ib


cdef inline double _sqd(const double[:, ::1] a, Py_ssize_t i,
                        const double[:, ::1] b, Py_ssize_t j) noexcept nogil:
    cdef double dx = a[i, 0] - b[j, 0]
    cdef double dy = a[i, 1] - b[j, 1]
    cdef double dz = a[i, 2] - b[j, 2]
    return dx * dx + dy * dy + dz * dz


def fps(const double[:, ::1] points, Py_ssize_t m, const double[::1] centroid):
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t i, t, best, last
    cdef double dx, dy, dz, d, bd
    out_arr = np.empty(m, dtype=np.int64)
    mind_arr = np.empty(n, dtype=np.float64)
    cdef cnp.int64_t[::1] out = out_arr
    cdef double[::1] mind = mind_arr
    with nogil:
        # seed: farthest from centroid; ties go to the lexicographically smallest point
        best = -1
        bd = -1.0
        for i in range(n):
            dx = points[i, 0] - centroid[0]
            dy = points[i, 1] - centroid[1]
            dz = points[i, 2] - centroid[2]
            d = dx * dx + dy * dy + dz * dz
            if best < 0 or d > bd or (d == bd and _key_less(
                    0.0, points[i, 0], points[i, 1], points[i, 2], i,
                    0.0, points[best, 0], points[best, 1], points[best, 2], best)):
                best = i
                bd = d
        out[0] = best
        for i in range(n):
            mind[i] = INFINITY
        mind[best] = -1.0
        last = best
        for t in range(1, m):
            best = -1
            bd = -1.0
            for i in range(n):
                if mind[i] < 0.0:
                    continue
                d = _sqd(points, i, points, last)
                if d < mind[i]:
                    mind[i] = d
                d = mind[i]
                if best < 0 or d > bd or (d == bd and _key_less(
                        0.0, points[i, 0], points[i, 1], points[i, 2], i,
                        0.0, points[best, 0], points[best, 1], points[best, 2], best)):
                    best = i
                    bd = d
            out[t] = best
            mind[best] = -1.0
            last = best
    return out_arr


def knn(const double[:, ::1] query, const double[:, ::1] source, Py_ssize_t k,
        const cnp.int64_t[::1] exclude):
    cdef Py_ssize_t nq = query.shape[0]
    cdef Py_ssize_t ns = source.shape[0]
    cdef Py_ssize_t q, j, cnt, pos
    cdef double d
    idx_arr = np.empty((nq, k), dtype=np.int64)
    dist_arr = np.empty((nq, k), dtype=np.float64)
    cdef cnp.int64_t[:, ::1] idx = idx_arr
    cdef double[:, ::1] dist = dist_arr
    with nogil:
        for q in range(nq):
            cnt = 0
            for j in range(ns):
                if j == exclude[q]:
                    continue
                d = _sqd(query, q, source, j)
                if cnt == k:
                    pos = idx[q, k - 1]
                    if not _key_less(d, source[j, 0], source[j, 1], source[j, 2], j,
                                     dist[q, k - 1], source[pos, 0], source[pos, 1],
                                     source[pos, 2], pos):
                        continue
                    pos = k - 1
                else:
                    pos = cnt
                    cnt += 1
                # shift larger keys right until the slot for j is found
                while pos > 0 and _key_less(
                        d, source[j, 0], source[j, 1], source[j, 2], j,
                        dist[q, pos - 1], source[idx[q, pos - 1], 0],
                        source[idx[q, pos - 1], 1], source[idx[q, pos - 1], 2], idx[q, pos - 1]):
                    idx[q, pos] = idx[q, pos - 1]
                    dist[q, pos] = dist[q, pos - 1]
                    pos -= 1
                idx[q, pos] = j
                dist[q, pos] = d
    return idx_arr, dist_arr


def nearest(const double[:, ::1] a, const double[:, ::1] b):
    cdef Py_ssize_t na = a.shape[0]
    cdef Py_ssize_t nb = b.shape[0]
    cdef Py_ssize_t i, j, best
    cdef double d, bd
    idx_arr = np.empty(na, dtype=np.int64)
    dist_arr = np.empty(na, dtype=np.float64)
    cdef cnp.int64_t[::1] idx = idx_arr
    cdef double[::1] dist = dist_arr
    with nogil:
        for i in range(na):
            best = 0
            bd = _sqd(a, i, b, 0)
            for j in range(1, nb):
                d = _sqd(a, i, b, j)
                if d < bd:
                    bd = d
                    best = j
            idx[i] = best
            dist[i] = bd
    return idx_arr, dist_arr


def hungarian(const double[:, ::1] cost):
    cdef Py_ssize_t n = cost.shape[0]
    cdef Py_ssize_t i, j, i0, j0, j1
    cdef double delta, cur
    u_arr = np.zeros(n + 1)
    v_arr = np.zeros(n + 1)
    minv_arr = np.empty(n + 1)
    p_arr = np.zeros(n + 1, dtype=np.int64)
    way_arr = np.zeros(n + 1, dtype=np.int64)
    used_arr = np.zeros(n + 1, dtype=np.uint8)
    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef double[::1] minv = minv_arr
    cdef cnp.int64_t[::1] p = p_arr
    cdef cnp.int64_t[::1] way = way_arr
    cdef cnp.uint8_t[::1] used = used_arr
    with nogil:
        for i in range(1, n + 1):
            p[0] = i
            j0 = 0
            for j in range(n + 1):
                minv[j] = INFINITY
                used[j] = 0
            while True:
                used[j0] = 1
                i0 = p[j0]
                delta = INFINITY
                j1 = 0
                for j in range(1, n + 1):
                    if not used[j]:
                        cur = cost[i0 - 1, j - 1] - u[i0] - v[j]
                        if cur < minv[j]:
                            minv[j] = cur
                            way[j] = j0
                        if minv[j] < delta:
                            delta = minv[j]
                            j1 = j
                for j in range(n + 1):
                    if used[j]:
                        u[p[j]] += delta
                        v[j] -= delta
                    else:
                        minv[j] -= delta
                j0 = j1
                if p[j0] == 0:
                    break
            while True:
                j1 = way[j0]
                p[j0] = p[j1]
                j0 = j1
                if j0 == 0:
                    break
    out = np.empty(n, dtype=np.int64)
    for j in range(1, n + 1):
        out[p_arr[j] - 1] = j - 1
    return out


def auction(const double[:, ::1] cost, double eps_start, double eps_end):
    cdef Py_ssize_t n = cost.shape[0]
    cdef Py_ssize_t i, j, j1, top, prev
    cdef double v, v1, v2, eps
    price_arr = np.zeros(n)
    owner_arr = np.empty(n, dtype=np.int64)
    assign_arr = np.empty(n, dtype=np.int64)
    stack_arr = np.empty(n, dtype=np.int64)
    cdef double[::1] price = price_arr
    cdef cnp.int64_t[::1] owner = owner_arr
    cdef cnp.int64_t[::1] assign = assign_arr
    cdef cnp.int64_t[::1] stack = stack_arr
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    eps = eps_start
    with nogil:
        while True:
            for i in range(n):
                owner[i] = -1
                assign[i] = -1
                stack[i] = n - 1 - i
            top = n
            while top > 0:
                top -= 1
                i = stack[top]
                v1 = -INFINITY
                v2 = -INFINITY
                j1 = 0
                for j in range(n):
                    v = -cost[i, j] - price[j]
                    if v > v1:
                        v2 = v1
                        v1 = v
                        j1 = j
                    elif v > v2:
                        v2 = v
                price[j1] += v1 - v2 + eps
                prev = owner[j1]
                owner[j1] = i
                assign[i] = j1
                if prev >= 0:
                    assign[prev] = -1
                    stack[top] = prev
                    top += 1
            if eps <= eps_end:
                break
            eps = eps * 0.5
            if eps < eps_end:
                eps = eps_end
    return assign_arr
