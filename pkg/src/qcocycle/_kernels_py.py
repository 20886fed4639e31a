"""Pure numpy implementations of the stepping kernels.

These are the reference semantics for the compiled module; both backends
must agree to rounding error (see tests).  All arrays are complex128.
"""

import numpy as np


def transfer_products(M, uf, uh, n, s):
    """Accumulated slice-transfer superoperators of a repeated-interaction model.

    M is the (n*s, n*s) one-slice step operator, ``uf``/``uh`` are the (N, s)
    slice vectors paired with the bra/ket coherent state.  Returns the
    (N+1, n**2, n**2) prefix products ``P_k`` with ``P_0 = I``;
    ``P_k vec(X)`` is the matrix element of the cocycle after k slices.
    """
    N = uf.shape[0]
    m = n * n
    Mr = np.asarray(M).reshape(n, s, n, s)
    out = np.empty((N + 1, m, m), dtype=complex)
    P = np.eye(m, dtype=complex)
    out[0] = P
    for k in range(N):
        Bf = Mr @ uf[k]  # (n, s, n): slice map columns per middle slot
        Bh = Mr @ uh[k]
        A = np.einsum("iqa,jqb->baji", Bf.conj(), Bh).reshape(m, m)
        P = P @ A
        out[k + 1] = P
    return out


def rk4_left(A, Y0, tau):
    """Propagate dY/dt = A(t) Y with classical RK4, A constant per step.

    A is (N, m, m); returns (N+1, m, m) with the initial value first.
    """
    N = A.shape[0]
    Y = np.array(Y0, dtype=complex)
    out = np.empty((N + 1,) + Y.shape, dtype=complex)
    out[0] = Y
    for k in range(N):
        Ak = A[k]
        k1 = Ak @ Y
        k2 = Ak @ (Y + 0.5 * tau * k1)
        k3 = Ak @ (Y + 0.5 * tau * k2)
        k4 = Ak @ (Y + tau * k3)
        Y = Y + (tau / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = Y
    return out


def rk4_right(A, Y0, tau):
    """Propagate dY/dt = Y A(t) with classical RK4, A constant per step."""
    N = A.shape[0]
    Y = np.array(Y0, dtype=complex)
    out = np.empty((N + 1,) + Y.shape, dtype=complex)
    out[0] = Y
    for k in range(N):
        Ak = A[k]
        k1 = Y @ Ak
        k2 = (Y + 0.5 * tau * k1) @ Ak
        k3 = (Y + 0.5 * tau * k2) @ Ak
        k4 = (Y + tau * k3) @ Ak
        Y = Y + (tau / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = Y
    return out


def causal_matconv(lam, v):
    """Causal matrix-sequence convolution ``out[t] = sum_{u<t} lam[u] v[t-u]``.

    lam is (N, m, m), v is (N+1, m); returns (N+1, m) with out[0] = 0.
    """
    N = lam.shape[0]
    m = v.shape[1]
    out = np.zeros((N + 1, m), dtype=complex)
    for t in range(1, N + 1):
        # u runs over 0..t-1, pairing lam[u] with v[t-u]
        out[t] = np.einsum("uab,ub->a", lam[:t], v[t:0:-1])
    return out
