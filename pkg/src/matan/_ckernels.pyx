# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops; see ``_pykernels`` for the reference semantics."""

from libc.math cimport exp, sqrt, isfinite
from scipy.linalg.cython_blas cimport dgemm

import numpy as np

NAME = "cython"


def glove_epoch(double[:, ::1] W, double[:, ::1] Wc, double[::1] b, double[::1] bc,
                double[:, ::1] gW, double[:, ::1] gWc, double[::1] gb, double[::1] gbc,
                const long long[::1] rows, const long long[::1] cols,
                const double[::1] logx, const double[::1] fx,
                const long long[::1] order, double lr):
    cdef Py_ssize_t n = order.shape[0], D = W.shape[1]
    cdef Py_ssize_t idx, e, i, j, k
    cdef double diff, fdiff, cost = 0.0, t1, t2
    cdef double* wi
    cdef double* wj
    cdef double* gi
    cdef double* gj
    with nogil:
        for idx in range(n):
            e = order[idx]
            i = rows[e]
            j = cols[e]
            wi = &W[i, 0]
            wj = &Wc[j, 0]
            gi = &gW[i, 0]
            gj = &gWc[j, 0]
            diff = b[i] + bc[j] - logx[e]
            for k in range(D):
                diff += wi[k] * wj[k]
            fdiff = fx[e] * diff
            if not isfinite(fdiff):
                with gil:
                    raise FloatingPointError(f"non-finite GloVe loss at entry {e} ({i}, {j})")
            cost += 0.5 * fdiff * diff
            fdiff *= lr
            for k in range(D):
                t1 = fdiff * wj[k]
                t2 = fdiff * wi[k]
                wi[k] -= t1 / sqrt(gi[k])
                wj[k] -= t2 / sqrt(gj[k])
                gi[k] += t1 * t1
                gj[k] += t2 * t2
            b[i] -= fdiff / sqrt(gb[i])
            bc[j] -= fdiff / sqrt(gbc[j])
            fdiff *= fdiff
            gb[i] += fdiff
            gbc[j] += fdiff
    return cost


cdef inline void _gemm_abt(int m, int n, int k, double alpha, double* A, int lda,
                           double* B, int ldb, double beta, double* C, int ldc) noexcept nogil:
    # row-major C[m,n] = alpha * A[m,k] @ B[n,k].T + beta * C
    cdef char ta = b'T', tb = b'N'
    dgemm(&ta, &tb, &n, &m, &k, &alpha, B, &ldb, A, &lda, &beta, C, &ldc)


cdef inline void _gemm_ab(int m, int n, int k, double alpha, double* A, int lda,
                          double* B, int ldb, double beta, double* C, int ldc) noexcept nogil:
    # row-major C[m,n] = alpha * A[m,k] @ B[k,n] + beta * C
    cdef char ta = b'N', tb = b'N'
    dgemm(&ta, &tb, &n, &m, &k, &alpha, B, &ldb, A, &lda, &beta, C, &ldc)


cdef inline void _gemm_atb(int m, int n, int k, double alpha, double* A, int lda,
                           double* B, int ldb, double beta, double* C, int ldc) noexcept nogil:
    # row-major C[m,n] = alpha * A[k,m].T @ B[k,n] + beta * C
    cdef char ta = b'N', tb = b'T'
    dgemm(&ta, &tb, &n, &m, &k, &alpha, B, &ldb, A, &lda, &beta, C, &ldc)


cdef void _attend(double* X, double* Y, double* Wd, int D, Py_ssize_t ou, int lu,
                  Py_ssize_t ov, int lv, double scale, double c, double* A, double* p) noexcept nogil:
    cdef int i, j, k
    cdef double m, z
    cdef double* row
    cdef double* w
    _gemm_abt(lu, lv, D, scale, X + ou * D, D, Y + ov * D, D, 0.0, A, lv)
    for i in range(lu):
        row = A + i * lv
        m = row[0]
        for j in range(1, lv):
            if row[j] > m:
                m = row[j]
        z = 0.0
        for j in range(lv):
            row[j] = exp(row[j] - m)
            z += row[j]
        z = 1.0 / z
        for j in range(lv):
            row[j] *= z
    for k in range(D):
        p[k] = 0.0
    for j in range(lv):
        z = 0.0
        for i in range(lu):
            z += A[i * lv + j]
        z *= c
        w = Wd + (ov + j) * D
        for k in range(D):
            p[k] += z * w[k]


def attend_pairs(double[:, ::1] X, double[:, ::1] Y, double[:, ::1] Wd,
                 const long long[::1] offsets, const long long[::1] lengths,
                 const long long[:, ::1] pairs, bint sum_pool,
                 double[:, ::1] P1, double[:, ::1] P2,
                 double[::1] A_flat, const long long[::1] A_off):
    cdef Py_ssize_t n, npairs = pairs.shape[0], base
    cdef int D = X.shape[1], lu, lv
    cdef Py_ssize_t u, v
    cdef double scale = 1.0 / sqrt(D)
    if npairs == 0:
        return
    with nogil:
        for n in range(npairs):
            u = pairs[n, 0]
            v = pairs[n, 1]
            lu = <int> lengths[u]
            lv = <int> lengths[v]
            base = A_off[n]
            _attend(&X[0, 0], &Y[0, 0], &Wd[0, 0], D, offsets[u], lu, offsets[v], lv, scale,
                    1.0 if sum_pool else 1.0 / lu, &A_flat[base], &P1[n, 0])
            _attend(&X[0, 0], &Y[0, 0], &Wd[0, 0], D, offsets[v], lv, offsets[u], lu, scale,
                    1.0 if sum_pool else 1.0 / lv, &A_flat[base + lu * lv], &P2[n, 0])


cdef void _attend_back(double* A, double* dp, double* X, double* Y, double* Wd, double* dX,
                       double* dY, int D, Py_ssize_t ou, int lu, Py_ssize_t ov, int lv,
                       double scale, double c, double* da) noexcept nogil:
    cdef int i, j, k
    cdef double z, r
    cdef double* w
    cdef double* row
    for j in range(lv):
        w = Wd + (ov + j) * D
        z = 0.0
        for k in range(D):
            z += w[k] * dp[k]
        da[j] = z
    # A becomes dS in place
    for i in range(lu):
        row = A + i * lv
        r = 0.0
        for j in range(lv):
            r += row[j] * da[j]
        for j in range(lv):
            row[j] = row[j] * (da[j] - r) * (c * scale)
    _gemm_ab(lu, D, lv, 1.0, A, lv, Y + ov * D, D, 1.0, dX + ou * D, D)
    _gemm_atb(lv, D, lu, 1.0, A, lv, X + ou * D, D, 1.0, dY + ov * D, D)


def attend_pairs_backward(double[::1] A_flat, const long long[::1] A_off,
                          double[:, ::1] X, double[:, ::1] Y, double[:, ::1] Wd,
                          const long long[::1] offsets, const long long[::1] lengths,
                          const long long[:, ::1] pairs, bint sum_pool,
                          double[:, ::1] dP1, double[:, ::1] dP2,
                          double[:, ::1] dX, double[:, ::1] dY):
    cdef Py_ssize_t n, npairs = pairs.shape[0], base
    cdef int D = X.shape[1], lu, lv
    cdef Py_ssize_t u, v
    cdef double scale = 1.0 / sqrt(D)
    if npairs == 0:
        return
    cdef double[::1] da = np.empty(max(int(np.max(np.asarray(lengths))), 1))
    with nogil:
        for n in range(npairs):
            u = pairs[n, 0]
            v = pairs[n, 1]
            lu = <int> lengths[u]
            lv = <int> lengths[v]
            base = A_off[n]
            # dS overwrites A_flat, so the buffer is single-use
            _attend_back(&A_flat[base], &dP1[n, 0], &X[0, 0], &Y[0, 0], &Wd[0, 0], &dX[0, 0],
                         &dY[0, 0], D, offsets[u], lu, offsets[v], lv, scale,
                         1.0 if sum_pool else 1.0 / lu, &da[0])
            _attend_back(&A_flat[base + lu * lv], &dP2[n, 0], &X[0, 0], &Y[0, 0], &Wd[0, 0],
                         &dX[0, 0], &dY[0, 0], D, offsets[v], lv, offsets[u], lu, scale,
                         1.0 if sum_pool else 1.0 / lv, &da[0])
