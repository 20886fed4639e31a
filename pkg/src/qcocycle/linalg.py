"""Dense linear algebra helpers shared across the package.

Superoperators act on column-stacked matrices throughout: ``vec(X)`` stacks
the columns of ``X`` top to bottom, so ``vec(A X B) = (B^T kron A) vec(X)``.
"""

from dataclasses import dataclass

import numpy as np


def vec(matrix: np.ndarray) -> np.ndarray:
    """Column-stack a matrix into a vector."""
    return np.asarray(matrix).reshape(-1, order="F")


def unvec(vector: np.ndarray, shape=None) -> np.ndarray:
    """Inverse of :func:`vec`. Square output unless ``shape`` is given."""
    v = np.asarray(vector).ravel()
    if shape is None:
        dim = int(round(np.sqrt(v.size)))
        shape = (dim, dim)
    return v.reshape(shape, order="F")


def dagger(matrix: np.ndarray) -> np.ndarray:
    return np.asarray(matrix).conj().T


def matrix_units(n: int) -> np.ndarray:
    """All matrix units of M_n as an (n**2, n, n) array, row-major order.

    Entry ``a = i*n + j`` is ``|i><j|``.
    """
    units = np.zeros((n * n, n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            units[i * n + j, i, j] = 1.0
    return units


def swap_matrix(n: int) -> np.ndarray:
    """Commutation matrix P with ``vec(X.T) = P vec(X)`` for X in M_n."""
    P = np.zeros((n * n, n * n))
    for i in range(n):
        for j in range(n):
            P[j * n + i, i * n + j] = 1.0
    return P


def left_right_action(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Action matrix of ``X -> A X B``."""
    return np.kron(np.asarray(B).T, np.asarray(A))


def pair_action(A_list, B_list) -> np.ndarray:
    """Action matrix of ``X -> sum_i A_i^dag X B_i``."""
    out = None
    for A, B in zip(A_list, B_list):
        term = np.kron(np.asarray(B).T, dagger(A))
        out = term if out is None else out + term
    return out


def max_abs(array) -> float:
    a = np.asarray(array)
    return 0.0 if a.size == 0 else float(np.abs(a).max())


def herm_residual(matrix: np.ndarray) -> float:
    return max_abs(matrix - dagger(matrix))


def min_eig_hermitian(matrix: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(matrix)[0])


@dataclass(frozen=True, eq=False)
class SuperOperator:
    """A linear map M_n -> M_m stored as its (m**2, n**2) action matrix."""

    action: np.ndarray
    in_dim: int
    out_dim: int

    def __post_init__(self):
        act = np.ascontiguousarray(np.asarray(self.action, dtype=complex))
        if act.shape != (self.out_dim**2, self.in_dim**2):
            raise ValueError(
                f"action shape {act.shape} does not match dims "
                f"({self.out_dim}**2, {self.in_dim}**2)"
            )
        object.__setattr__(self, "action", act)

    def __call__(self, X: np.ndarray) -> np.ndarray:
        return unvec(self.action @ vec(X), (self.out_dim, self.out_dim))

    @classmethod
    def zero(cls, n: int, m: int | None = None):
        m = n if m is None else m
        return cls(np.zeros((m * m, n * n), dtype=complex), n, m)

    @classmethod
    def identity(cls, n: int):
        return cls(np.eye(n * n, dtype=complex), n, n)

    @classmethod
    def from_left_right(cls, A: np.ndarray, B: np.ndarray):
        A = np.asarray(A)
        B = np.asarray(B)
        return cls(left_right_action(A, B), B.shape[0], A.shape[0])

    def adjoint_map(self) -> "SuperOperator":
        """The map ``X -> S(X^dag)^dag``."""
        Pin = swap_matrix(self.in_dim)
        Pout = swap_matrix(self.out_dim)
        return SuperOperator(Pout @ self.action.conj() @ Pin, self.in_dim, self.out_dim)

    def choi(self) -> np.ndarray:
        """Choi matrix on C^in kron C^out; PSD iff the map is CP."""
        n, m = self.in_dim, self.out_dim
        S4 = self.action.reshape(m, m, n, n)  # (y, x, j, i)
        return np.transpose(S4, (3, 1, 2, 0)).reshape(n * m, n * m)

    def is_hermiticity_preserving(self, tol: float = 1e-12) -> bool:
        return max_abs(self.action - self.adjoint_map().action) <= tol

    def __add__(self, other: "SuperOperator") -> "SuperOperator":
        return SuperOperator(self.action + other.action, self.in_dim, self.out_dim)

    def __sub__(self, other: "SuperOperator") -> "SuperOperator":
        return SuperOperator(self.action - other.action, self.in_dim, self.out_dim)


def choi_kraus(choi: np.ndarray, in_dim: int, out_dim: int, tol: float):
    """Kraus operators of a CP map from its Choi matrix.

    Eigenvalues below ``tol * max_eig`` are discarded.  Returns a stacked
    (r, out_dim, in_dim) array; raises ValueError on a significantly
    negative eigenvalue (caller wraps this in a domain error).
    """
    w, V = np.linalg.eigh(choi)
    top = max(float(w[-1]), 0.0)
    cut = tol * top
    if w[0] < -cut:
        raise ValueError(f"Choi matrix has negative eigenvalue {w[0]:.6g}")
    kraus = []
    for val, vecr in zip(w, V.T):
        if val > cut:
            # Choi column index is (i_in, x_out) with x minor
            kraus.append(np.sqrt(val) * vecr.reshape(in_dim, out_dim).T)
    return np.array(kraus) if kraus else np.zeros((0, out_dim, in_dim), dtype=complex)
