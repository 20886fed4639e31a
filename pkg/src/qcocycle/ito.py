"""Finite-dimensional quantum Ito algebra over d noise channels.

Noise increments are indexed by the (d+2)-element set ordered as
(-, 1, ..., d, +): position 0 is the annihilation/time row index "-",
position d+1 is the creation/time column index "+".  A structure matrix
collects one n x n system operator per index pair; the Ito product of two
increments is then the ordinary matrix product over the extended index, and
the involution is pseudo-Hermitian conjugation with respect to an indefinite
block metric.
"""

from dataclasses import dataclass, field

import numpy as np

from .linalg import dagger, herm_residual, max_abs


@dataclass(frozen=True)
class IndexSet:
    """The fixed index order (-, 1, ..., d, +) mapped to positions 0..d+1."""

    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("need at least one noise dimension")

    @property
    def size(self) -> int:
        return self.d + 2

    @property
    def minus(self) -> int:
        return 0

    @property
    def plus(self) -> int:
        return self.d + 1

    def label(self, pos: int) -> str:
        if pos == 0:
            return "-"
        if pos == self.d + 1:
            return "+"
        return str(pos)


@dataclass(frozen=True, eq=False)
class StructureMatrix:
    """(d+2) x (d+2) array of n x n operator coefficients of noise increments.

    Row "+" and column "-" are identically zero; this extension convention
    makes the Ito table a plain matrix product.
    """

    n: int
    d: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        ent = np.asarray(self.entries, dtype=complex)
        size = self.d + 2
        if ent.shape != (size, size, self.n, self.n):
            raise ValueError(f"entries shape {ent.shape}, expected {(size, size, self.n, self.n)}")
        if max_abs(ent[size - 1]) != 0.0 or max_abs(ent[:, 0]) != 0.0:
            raise ValueError("row '+' and column '-' must vanish")
        object.__setattr__(self, "entries", ent)

    @classmethod
    def zeros(cls, n: int, d: int) -> "StructureMatrix":
        return cls(n, d, np.zeros((d + 2, d + 2, n, n), dtype=complex))

    @classmethod
    def unit(cls, mu: int, nu: int, coeff, n: int, d: int) -> "StructureMatrix":
        """Single-entry structure matrix with operator ``coeff`` at (mu, nu)."""
        if mu == d + 1 or nu == 0:
            raise ValueError("unit would sit in a forbidden row/column")
        ent = np.zeros((d + 2, d + 2, n, n), dtype=complex)
        ent[mu, nu] = np.asarray(coeff, dtype=complex)
        return cls(n, d, ent)

    def as_big_matrix(self) -> np.ndarray:
        """Block matrix on C^(n(d+2)), blocks laid out in index order."""
        size = self.d + 2
        return self.entries.transpose(0, 2, 1, 3).reshape(size * self.n, size * self.n)

    @classmethod
    def from_big_matrix(cls, big: np.ndarray, n: int, d: int) -> "StructureMatrix":
        size = d + 2
        ent = big.reshape(size, n, size, n).transpose(0, 2, 1, 3)
        return cls(n, d, np.ascontiguousarray(ent))


@dataclass(frozen=True, eq=False)
class PseudoMetric:
    """Indefinite block metric on C^n + C^k + C^n with Hermitian corner D.

    G = [[0, 0, I], [0, I, 0], [I, 0, D]];  G^-1 = [[-D, 0, I], [0, I, 0], [I, 0, 0]].
    """

    n: int
    k: int
    D: np.ndarray = field(repr=False)

    def __post_init__(self):
        D = np.asarray(self.D, dtype=complex)
        if D.shape != (self.n, self.n):
            raise ValueError(f"D shape {D.shape}, expected {(self.n, self.n)}")
        if herm_residual(D) > 1e-12:
            raise ValueError("corner block D must be Hermitian")
        object.__setattr__(self, "D", D)

    @property
    def dim(self) -> int:
        return 2 * self.n + self.k

    @property
    def G(self) -> np.ndarray:
        n, k = self.n, self.k
        G = np.zeros((self.dim, self.dim), dtype=complex)
        G[:n, n + k:] = np.eye(n)
        G[n:n + k, n:n + k] = np.eye(k)
        G[n + k:, :n] = np.eye(n)
        G[n + k:, n + k:] = self.D
        return G

    @property
    def Ginv(self) -> np.ndarray:
        n, k = self.n, self.k
        Gi = np.zeros((self.dim, self.dim), dtype=complex)
        Gi[:n, :n] = -self.D
        Gi[:n, n + k:] = np.eye(n)
        Gi[n:n + k, n:n + k] = np.eye(k)
        Gi[n + k:, :n] = np.eye(n)
        return Gi

    def conjugate(self, big: np.ndarray) -> np.ndarray:
        """Pseudo-Hermitian conjugate ``G^-1 A^dag G`` of a block matrix."""
        return self.Ginv @ dagger(big) @ self.G


def ito_product(beta: StructureMatrix, gamma: StructureMatrix) -> StructureMatrix:
    """Matrix product over the extended index with operator-valued entries."""
    if (beta.n, beta.d) != (gamma.n, gamma.d):
        raise ValueError("structure matrices must share system and noise dimensions")
    ent = np.einsum("maij,anjk->mnik", beta.entries, gamma.entries)
    return StructureMatrix(beta.n, beta.d, ent)


def flat(alpha: StructureMatrix, g: PseudoMetric | None = None) -> StructureMatrix:
    """Pseudo-Hermitian conjugation of a structure matrix.

    The metric must have middle dimension n*d (one system block per noise
    channel).  ``flat`` is an involution and an anti-homomorphism for the
    Ito product when D is Hermitian.
    """
    if g is None:
        g = PseudoMetric(alpha.n, alpha.n * alpha.d, np.zeros((alpha.n, alpha.n)))
    if g.n != alpha.n or g.k != alpha.n * alpha.d:
        raise ValueError("metric dimensions incompatible with the structure matrix")
    big = g.conjugate(alpha.as_big_matrix())
    return StructureMatrix.from_big_matrix(big, alpha.n, alpha.d)


def metric_roundtrip(g: PseudoMetric) -> float:
    """Max-abs residual of G @ Ginv against the identity."""
    return max_abs(g.G @ g.Ginv - np.eye(g.dim))


@dataclass(frozen=True)
class ItoTableReport:
    d: int
    cases_checked: int
    violations: tuple

    @property
    def passed(self) -> bool:
        return not self.violations


def verify_ito_table(d: int, corrupt: tuple | None = None) -> ItoTableReport:
    """Exhaustively check the increment multiplication rule for dimension d.

    Iterates all unit structure matrices E(mu, beta), E(gamma, nu) over the
    admissible index ranges and compares their Ito product against
    ``delta(beta, gamma) E(mu, nu)`` exactly (entries are 0/1, so floating
    point arithmetic is exact).  ``corrupt`` is a test hook: for the given
    (mu, beta, gamma, nu) quadruple the computed product has its Kronecker
    delta flipped, which must surface as exactly that violation.
    """
    idx = IndexSet(d)
    one = np.ones((1, 1))
    violations = []
    cases = 0
    for mu in range(0, d + 1):            # row of the first factor: -, 1..d
        for beta in range(1, d + 2):      # column of the first factor: 1..d, +
            E1 = StructureMatrix.unit(mu, beta, one, 1, d)
            for gamma in range(0, d + 1):     # row of the second factor
                for nu in range(1, d + 2):    # column of the second factor
                    cases += 1
                    E2 = StructureMatrix.unit(gamma, nu, one, 1, d)
                    product = ito_product(E1, E2).entries
                    delta = 1.0 if beta == gamma else 0.0
                    if corrupt == (mu, beta, gamma, nu):
                        product = (1.0 - delta) * StructureMatrix.unit(
                            mu, nu, one, 1, d).entries
                    expected = delta * StructureMatrix.unit(mu, nu, one, 1, d).entries
                    if not np.array_equal(product, expected):
                        violations.append(
                            (idx.label(mu), idx.label(beta), idx.label(gamma), idx.label(nu)))
    return ItoTableReport(d, cases, tuple(violations))
