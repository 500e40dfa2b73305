# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled path-enumeration kernels; same layout and results as ``nfdp._kernels_py``."""

import numpy as np
from libc.stdint cimport int64_t


cdef Py_ssize_t ipow(Py_ssize_t base, int e) noexcept nogil:
    cdef Py_ssize_t r = 1
    cdef int i
    for i in range(e):
        r *= base
    return r


cdef void _joint(const int64_t* flat, const int64_t* offsets, int M, int Z, int Y, int n,
                 const double[:, ::1] Qf, const double[:, ::1] Qb, const double* prior,
                 double* bufA, double* bufB, double* out) noexcept nogil:
    cdef int w, t, y, z
    cdef Py_ssize_t yp, zp, ny, nz, base, row
    cdef double a, fy
    cdef int64_t x
    cdef double* A
    cdef double* B
    cdef double* tmp
    cdef double s
    for w in range(M):
        A = bufA
        B = bufB
        A[0] = prior[w]
        ny = 1
        nz = 1
        for t in range(n):
            for yp in range(ny):
                for zp in range(nz):
                    a = A[yp * nz + zp]
                    x = flat[offsets[t] + w * nz + zp]
                    for y in range(Y):
                        fy = a * Qf[x, y]
                        row = (yp * Y + y) * (nz * Z) + zp * Z
                        for z in range(Z):
                            B[row + z] = fy * Qb[y, z]
            ny = ny * Y
            nz = nz * Z
            tmp = A
            A = B
            B = tmp
        for yp in range(ny):
            s = 0.0
            base = yp * nz
            for zp in range(nz):
                s += A[base + zp]
            out[w * ny + yp] = s


def output_joint(flat, offsets, int M, int Z, int n, Qf, Qb, prior):
    cdef const int64_t[::1] f = np.ascontiguousarray(flat, dtype=np.int64)
    cdef const int64_t[::1] o = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const double[:, ::1] qf = np.ascontiguousarray(Qf, dtype=float)
    cdef const double[:, ::1] qb = np.ascontiguousarray(Qb, dtype=float)
    cdef const double[::1] p = np.ascontiguousarray(prior, dtype=float)
    cdef int Y = qf.shape[1]
    cdef Py_ssize_t cells = ipow(Y * Z, n)
    cdef double[::1] bufA = np.empty(cells)
    cdef double[::1] bufB = np.empty(cells)
    res = np.empty((M, ipow(Y, n)))
    cdef double[:, ::1] out = res
    with nogil:
        _joint(&f[0], &o[0], M, Z, Y, n, qf, qb, &p[0], &bufA[0], &bufB[0], &out[0, 0])
    return res


def batch_error(strategies, offsets, int M, int Z, int n, Qf, Qb, prior):
    cdef const int64_t[:, ::1] st = np.ascontiguousarray(strategies, dtype=np.int64)
    cdef const int64_t[::1] o = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const double[:, ::1] qf = np.ascontiguousarray(Qf, dtype=float)
    cdef const double[:, ::1] qb = np.ascontiguousarray(Qb, dtype=float)
    cdef const double[::1] p = np.ascontiguousarray(prior, dtype=float)
    cdef int Y = qf.shape[1]
    cdef Py_ssize_t S = st.shape[0]
    cdef Py_ssize_t ny = ipow(Y, n)
    cdef Py_ssize_t cells = ipow(Y * Z, n)
    cdef double[::1] bufA = np.empty(cells)
    cdef double[::1] bufB = np.empty(cells)
    cdef double[::1] joint = np.empty(M * ny)
    res = np.empty(S)
    cdef double[::1] out = res
    cdef Py_ssize_t s, yp
    cdef int w
    cdef double best, acc, v
    with nogil:
        for s in range(S):
            _joint(&st[s, 0], &o[0], M, Z, Y, n, qf, qb, &p[0], &bufA[0], &bufB[0], &joint[0])
            acc = 0.0
            for yp in range(ny):
                best = joint[yp]
                for w in range(1, M):
                    v = joint[w * ny + yp]
                    if v > best:
                        best = v
                acc += best
            out[s] = 1.0 - acc
    return res
