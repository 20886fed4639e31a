# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled stepping kernels; semantics match qcocycle._kernels_py."""

import numpy as np


def transfer_products(double complex[:, ::1] M, double complex[:, ::1] uf,
                      double complex[:, ::1] uh, int n, int s):
    cdef int N = uf.shape[0]
    cdef int m = n * n
    cdef int k, p, q, r, t, a, b, i, j, c
    cdef double complex acc
    out_arr = np.empty((N + 1, m, m), dtype=np.complex128)
    cdef double complex[:, :, ::1] out = out_arr
    P_arr = np.eye(m, dtype=np.complex128)
    cdef double complex[:, ::1] P = P_arr
    Bf_arr = np.empty((n, s, n), dtype=np.complex128)
    Bh_arr = np.empty((n, s, n), dtype=np.complex128)
    A_arr = np.empty((m, m), dtype=np.complex128)
    T_arr = np.empty((m, m), dtype=np.complex128)
    cdef double complex[:, :, ::1] Bf = Bf_arr
    cdef double complex[:, :, ::1] Bh = Bh_arr
    cdef double complex[:, ::1] A = A_arr
    cdef double complex[:, ::1] T = T_arr

    for p in range(m):
        for q in range(m):
            out[0, p, q] = P[p, q]

    for k in range(N):
        # Bf[p, q, r] = sum_t M[p*s+q, r*s+t] * uf[k, t]
        for p in range(n):
            for q in range(s):
                for r in range(n):
                    acc = 0
                    for t in range(s):
                        acc = acc + M[p * s + q, r * s + t] * uf[k, t]
                    Bf[p, q, r] = acc
                    acc = 0
                    for t in range(s):
                        acc = acc + M[p * s + q, r * s + t] * uh[k, t]
                    Bh[p, q, r] = acc
        # A[(b,a), (j,i)] = sum_q conj(Bf[i,q,a]) Bh[j,q,b]
        for b in range(n):
            for a in range(n):
                for j in range(n):
                    for i in range(n):
                        acc = 0
                        for q in range(s):
                            acc = acc + Bf[i, q, a].conjugate() * Bh[j, q, b]
                        A[b * n + a, j * n + i] = acc
        # P = P @ A
        for p in range(m):
            for q in range(m):
                acc = 0
                for c in range(m):
                    acc = acc + P[p, c] * A[c, q]
                T[p, q] = acc
        for p in range(m):
            for q in range(m):
                P[p, q] = T[p, q]
                out[k + 1, p, q] = T[p, q]
    return out_arr


cdef void _matmul(double complex[:, ::1] A, double complex[:, ::1] B,
                  double complex[:, ::1] C, int m) noexcept:
    cdef int i, j, k
    cdef double complex acc
    for i in range(m):
        for j in range(m):
            acc = 0
            for k in range(m):
                acc = acc + A[i, k] * B[k, j]
            C[i, j] = acc


def _rk4(double complex[:, :, ::1] A, double complex[:, ::1] Y0, double tau,
         bint left):
    cdef int N = A.shape[0]
    cdef int m = Y0.shape[0]
    cdef int k, i, j
    out_arr = np.empty((N + 1, m, m), dtype=np.complex128)
    cdef double complex[:, :, ::1] out = out_arr
    Y_arr = np.array(Y0, dtype=np.complex128)
    k1_arr = np.empty((m, m), dtype=np.complex128)
    k2_arr = np.empty((m, m), dtype=np.complex128)
    k3_arr = np.empty((m, m), dtype=np.complex128)
    k4_arr = np.empty((m, m), dtype=np.complex128)
    tmp_arr = np.empty((m, m), dtype=np.complex128)
    cdef double complex[:, ::1] Y = Y_arr
    cdef double complex[:, ::1] k1 = k1_arr
    cdef double complex[:, ::1] k2 = k2_arr
    cdef double complex[:, ::1] k3 = k3_arr
    cdef double complex[:, ::1] k4 = k4_arr
    cdef double complex[:, ::1] tmp = tmp_arr
    cdef double complex[:, ::1] Ak

    for i in range(m):
        for j in range(m):
            out[0, i, j] = Y[i, j]
    for k in range(N):
        Ak = A[k]
        if left:
            _matmul(Ak, Y, k1, m)
        else:
            _matmul(Y, Ak, k1, m)
        for i in range(m):
            for j in range(m):
                tmp[i, j] = Y[i, j] + 0.5 * tau * k1[i, j]
        if left:
            _matmul(Ak, tmp, k2, m)
        else:
            _matmul(tmp, Ak, k2, m)
        for i in range(m):
            for j in range(m):
                tmp[i, j] = Y[i, j] + 0.5 * tau * k2[i, j]
        if left:
            _matmul(Ak, tmp, k3, m)
        else:
            _matmul(tmp, Ak, k3, m)
        for i in range(m):
            for j in range(m):
                tmp[i, j] = Y[i, j] + tau * k3[i, j]
        if left:
            _matmul(Ak, tmp, k4, m)
        else:
            _matmul(tmp, Ak, k4, m)
        for i in range(m):
            for j in range(m):
                Y[i, j] = Y[i, j] + (tau / 6.0) * (
                    k1[i, j] + 2.0 * k2[i, j] + 2.0 * k3[i, j] + k4[i, j])
                out[k + 1, i, j] = Y[i, j]
    return out_arr


def rk4_left(A, Y0, tau):
    return _rk4(np.ascontiguousarray(A, dtype=np.complex128),
                np.ascontiguousarray(Y0, dtype=np.complex128), tau, True)


def rk4_right(A, Y0, tau):
    return _rk4(np.ascontiguousarray(A, dtype=np.complex128),
                np.ascontiguousarray(Y0, dtype=np.complex128), tau, False)


def causal_matconv(double complex[:, :, ::1] lam, double complex[:, ::1] v):
    cdef int N = lam.shape[0]
    cdef int m = v.shape[1]
    cdef int t, u, a, b
    cdef double complex acc
    out_arr = np.zeros((N + 1, m), dtype=np.complex128)
    cdef double complex[:, ::1] out = out_arr
    for t in range(1, N + 1):
        for a in range(m):
            acc = 0
            for u in range(t):
                for b in range(m):
                    acc = acc + lam[u, a, b] * v[t - u, b]
            out[t, a] = acc
    return out_arr
