"""Constructive dilations of conditionally CP form-generators.

Path: recover a Kraus family for the exchange block from its Choi matrix,
solve a least-squares system for the remaining coupling operators, then
realize the generator as a block representation on h + K + h with an
indefinite metric, where K = C^n kron C^r carries the multiplicity.
The extraction is validated by reassembling the generator and comparing
blockwise; parameters are unique only up to a unitary gauge on the
multiplicity index and a trace shift of the Hamiltonian.
"""

from dataclasses import dataclass, field

import numpy as np

from .generator import FormGenerator, assemble_from_hp
from .ito import PseudoMetric
from .linalg import (
    SuperOperator,
    choi_kraus,
    dagger,
    herm_residual,
    matrix_units,
    max_abs,
    unvec,
    vec,
)


class NotCompletelyPositive(Exception):
    """The exchange block is not a CP map; carries the offending eigenvalue."""

    def __init__(self, eigenvalue: float):
        super().__init__(f"exchange block Choi matrix has eigenvalue {eigenvalue:.6g}")
        self.eigenvalue = eigenvalue


class ResidualTooLarge(Exception):
    """A reconstruction identity failed beyond tolerance."""

    def __init__(self, residual: float, context: str = ""):
        msg = f"residual {residual:.3g} exceeds tolerance"
        if context:
            msg += f" ({context})"
        super().__init__(msg)
        self.residual = residual
        self.context = context


@dataclass(frozen=True, eq=False)
class HPParams:
    """Coefficients (K, K_n, H, L^i, L^i_n) of the stochastic flow equations.

    kraus_L is (r, n, n); kraus_Lmat is (r, d, n, n); K_row is (d, n, n).
    H is Hermitian.  The martingale case is K + K^dag = sum_i L^i^dag L^i;
    the submartingale case has a PSD gap.
    """

    n: int
    d: int
    r: int
    K: np.ndarray = field(repr=False)
    K_row: np.ndarray = field(repr=False)
    H: np.ndarray = field(repr=False)
    kraus_L: np.ndarray = field(repr=False)
    kraus_Lmat: np.ndarray = field(repr=False)

    def __post_init__(self):
        n, d, r = self.n, self.d, self.r
        if r < 1:
            raise ValueError("multiplicity r must be >= 1")
        conv = lambda a, shape, name: self._check(a, shape, name)
        object.__setattr__(self, "K", conv(self.K, (n, n), "K"))
        object.__setattr__(self, "K_row", conv(self.K_row, (d, n, n), "K_row"))
        object.__setattr__(self, "H", conv(self.H, (n, n), "H"))
        object.__setattr__(self, "kraus_L", conv(self.kraus_L, (r, n, n), "kraus_L"))
        object.__setattr__(self, "kraus_Lmat", conv(self.kraus_Lmat, (r, d, n, n), "kraus_Lmat"))
        if herm_residual(self.H) > 1e-12:
            raise ValueError("H must be Hermitian")

    @staticmethod
    def _check(a, shape, name):
        a = np.asarray(a, dtype=complex)
        if a.shape != shape:
            raise ValueError(f"{name} has shape {a.shape}, expected {shape}")
        return a

    @classmethod
    def from_K(cls, n, d, K, K_row, kraus_L, kraus_Lmat) -> "HPParams":
        """Store K directly; H is its anti-Hermitian part."""
        K = np.asarray(K, dtype=complex)
        H = (K - dagger(K)) / 2j
        r = np.asarray(kraus_L).shape[0] if np.asarray(kraus_L).ndim == 3 else 1
        return cls(n, d, r, K, K_row, H, kraus_L, kraus_Lmat)

    @classmethod
    def from_hamiltonian(cls, n, d, H, kraus_L, kraus_Lmat, K_row=None,
                         D_target=None) -> "HPParams":
        """Build K = (sum L^dag L - D_target)/2 + iH; D_target <= 0 by contract."""
        kraus_L = np.asarray(kraus_L, dtype=complex)
        r = kraus_L.shape[0]
        S = sum(dagger(L) @ L for L in kraus_L)
        D = np.zeros((n, n)) if D_target is None else np.asarray(D_target, dtype=complex)
        K = 0.5 * (S - D) + 1j * np.asarray(H, dtype=complex)
        if K_row is None:
            K_row = np.zeros((d, n, n))
        return cls(n, d, r, K, K_row, H, kraus_L, kraus_Lmat)

    def phi_of_identity(self) -> np.ndarray:
        return sum(dagger(L) @ L for L in self.kraus_L)

    def normalization_gap(self) -> np.ndarray:
        """K + K^dag - sum L^dag L; zero for a martingale, PSD for a submartingale."""
        return self.K + dagger(self.K) - self.phi_of_identity()


def exchange_block_map(gen: FormGenerator) -> SuperOperator:
    """The exchange blocks assembled as a single map M_n -> M_{nd}."""
    n, d = gen.n, gen.d
    _, _, _, mat = gen.stacked()
    # output row index (m, i), column index (nn, j); action row = col*M + row
    acts = mat.reshape(d, d, n, n, n * n)          # (m, nn, j, i, in)
    big = np.ascontiguousarray(acts.transpose(1, 2, 0, 3, 4))  # (nn, j, m, i, in)
    M = n * d
    return SuperOperator(big.reshape(M * M, n * n), n, M)


def kraus_from_exchange_block(gen: FormGenerator, tol: float = 1e-9):
    """Kraus operators L^i_n of the exchange block from its Choi matrix.

    Returns (r, kraus_Lmat) with kraus_Lmat of shape (r, d, n, n); eigenvalues
    below ``tol * max`` are discarded.  A zero exchange block yields r = 1
    with zero Kraus operators so downstream code always has a multiplicity
    index to work with.
    """
    n, d = gen.n, gen.d
    big = exchange_block_map(gen)
    choi = big.choi()
    try:
        stacked = choi_kraus(choi, n, n * d, tol)
    except ValueError:
        raise NotCompletelyPositive(float(np.linalg.eigvalsh(choi)[0]))
    r = stacked.shape[0]
    if r == 0:
        return 1, np.zeros((1, d, n, n), dtype=complex)
    # stacked[i] maps C^n into the d-fold column stack; block nn is L^i_nn^dag
    Lmat = np.empty((r, d, n, n), dtype=complex)
    for i in range(r):
        for nn in range(d):
            Lmat[i, nn] = dagger(stacked[i, nn * n:(nn + 1) * n, :])
    recon = np.zeros_like(big.action)
    for i in range(r):
        Bi = np.hstack([Lmat[i, nn] for nn in range(d)])  # n x nd
        recon += SuperOperator.from_left_right(dagger(Bi), Bi).action
    res = max_abs(recon - big.action)
    if res > 1e-10 * max(1.0, max_abs(big.action)):
        raise ResidualTooLarge(res, "exchange Kraus reconstruction")
    return r, Lmat


def extract_hp_params(gen: FormGenerator, tol: float = 1e-8):
    """Recover flow-equation coefficients from an accepted generator.

    Returns (params, residual) where residual is the blockwise reassembly
    error.  Steps: exchange Kraus family from the Choi matrix; minimal-norm
    least squares for the scalar Kraus family and the annihilation couplings
    using the creation blocks; Hermitian part of K from the identity;
    Hamiltonian from the leftover commutator system, gauge-fixed traceless.
    Raises ResidualTooLarge when the generator has no representation with
    the recovered multiplicity (degenerate exchange blocks can hide scalar
    Kraus directions).
    """
    n, d = gen.n, gen.d
    m2 = n * n
    r, Lmat = kraus_from_exchange_block(gen, tol=1e-9)
    units = matrix_units(n)
    eye = np.eye(n)

    # unknowns: vec(L^1..L^r), then vec(N_1..N_d) with N_m = K_m^dag
    cols = (r + d) * m2
    rows = d * m2 * m2
    Amat = np.zeros((rows, cols), dtype=complex)
    rhs = np.zeros(rows, dtype=complex)
    row0 = 0
    for m in range(d):
        up_act = gen.up[m].action
        for a in range(m2):
            Ea = units[a]
            block = slice(row0, row0 + m2)
            for i in range(r):
                C = dagger(Lmat[i, m]) @ Ea
                Amat[block, i * m2:(i + 1) * m2] = np.kron(eye, C)
            Amat[block, (r + m) * m2:(r + m + 1) * m2] = -np.kron(Ea.T, eye)
            ia, ja = divmod(a, n)
            rhs[block] = up_act[:, ja * n + ia]
            row0 += m2
    sol = np.linalg.lstsq(Amat, rhs, rcond=None)[0]
    kraus_L = np.array([unvec(sol[i * m2:(i + 1) * m2], (n, n)) for i in range(r)])
    K_row = np.array([dagger(unvec(sol[(r + m) * m2:(r + m + 1) * m2], (n, n)))
                      for m in range(d)])

    # Hermitian part of K from the identity; the Hamiltonian from the rest
    S = sum(dagger(L) @ L for L in kraus_L) - gen.D
    S = 0.5 * (S + dagger(S))
    phi_act = sum(SuperOperator.from_left_right(dagger(L), L).action for L in kraus_L)
    target = gen.scalar.action - phi_act + 0.5 * (np.kron(eye, S) + np.kron(S.T, eye))
    Cmat = np.zeros((m2 * m2, m2), dtype=complex)
    for p in range(n):
        for q in range(n):
            Epq = np.zeros((n, n))
            Epq[p, q] = 1.0
            col = 1j * (np.kron(eye, Epq) - np.kron(Epq.T, eye))
            Cmat[:, q * n + p] = col.reshape(-1)
    h = np.linalg.lstsq(Cmat, target.reshape(-1), rcond=None)[0]
    H = unvec(h, (n, n))
    H = 0.5 * (H + dagger(H))
    H = H - (np.trace(H) / n) * eye
    K = 0.5 * S + 1j * H

    params = HPParams(n, d, r, K, K_row, H, kraus_L, Lmat)
    residual = gen.block_residual(assemble_from_hp(params))
    if residual > tol:
        raise ResidualTooLarge(residual, "generator reassembly")
    return params, residual


def _interleave(ops: np.ndarray, n: int, r: int) -> np.ndarray:
    """Stack (r, n, n) operators into an (n*r, n) block column compatible
    with the representation X -> X kron I_r."""
    return np.ascontiguousarray(ops.transpose(1, 0, 2)).reshape(n * r, n)


@dataclass(frozen=True, eq=False)
class PreHilbertDilation:
    """Representation, derivations and scalar perturbation realizing a generator.

    K-space is C^n kron C^r; j amplifies over the multiplicity index,
    k and kstar are the spatial derivations built from the stacked coupling
    operator, and l carries the Hamiltonian and normalization corrections.
    """

    n: int
    d: int
    r: int
    Lop: np.ndarray = field(repr=False)
    Lcirc: np.ndarray = field(repr=False)
    Lminus: np.ndarray = field(repr=False)
    D: np.ndarray = field(repr=False)
    H: np.ndarray = field(repr=False)

    @property
    def kspace_dim(self) -> int:
        return self.n * self.r

    def j(self, X: np.ndarray) -> np.ndarray:
        return np.kron(X, np.eye(self.r))

    def k(self, X: np.ndarray) -> np.ndarray:
        return self.j(X) @ self.Lop - self.Lop @ X

    def kstar(self, X: np.ndarray) -> np.ndarray:
        return dagger(self.Lop) @ self.j(X) - X @ dagger(self.Lop)

    def l(self, X: np.ndarray) -> np.ndarray:
        comm_D = X @ self.D - self.D @ X
        comm_H = self.H @ X - X @ self.H
        return 0.5 * (dagger(self.Lop) @ self.k(X) + self.kstar(X) @ self.Lop
                      + comm_D) + 1j * comm_H

    def derivation_residuals(self) -> dict:
        """Max-abs residuals of the four structure identities over unit pairs."""
        units = matrix_units(self.n)
        res = {"representation": 0.0, "k_derivation": 0.0, "l_identity": 0.0,
               "l_adjoint": 0.0}
        js = [self.j(E) for E in units]
        ks = [self.k(E) for E in units]
        kstars = [self.kstar(E) for E in units]
        ls = [self.l(E) for E in units]
        for a, Ea in enumerate(units):
            res["l_adjoint"] = max(res["l_adjoint"], max_abs(
                dagger(self.l(dagger(Ea))) - ls[a]
                - (self.D @ Ea - Ea @ self.D)))
            for b, Eb in enumerate(units):
                prod = dagger(Ea) @ Eb
                res["representation"] = max(res["representation"], max_abs(
                    self.j(prod) - dagger(js[a]) @ js[b]))
                res["k_derivation"] = max(res["k_derivation"], max_abs(
                    self.k(prod) - dagger(js[a]) @ ks[b] - self.k(dagger(Ea)) @ Eb))
                res["l_identity"] = max(res["l_identity"], max_abs(
                    self.l(prod) - dagger(Ea) @ ls[b] - self.l(dagger(Ea)) @ Eb
                    - self.kstar(dagger(Ea)) @ ks[b]))
        res["representation"] = max(res["representation"], max_abs(
            self.j(np.eye(self.n)) - np.eye(self.kspace_dim)))
        return res


def build_pre_hilbert(params: HPParams, D: np.ndarray) -> PreHilbertDilation:
    """Spatial dilation of a parameter set with normalization corner D.

    Requires D Hermitian and consistent with the parameters:
    K = (sum L^dag L - D)/2 + iH for the stored H.
    """
    n, d, r = params.n, params.d, params.r
    D = np.asarray(D, dtype=complex)
    if herm_residual(D) > 1e-10:
        raise ValueError("D must be Hermitian")
    if herm_residual(params.H) > 1e-10:
        raise ValueError("H must be Hermitian")
    expected_K = 0.5 * (params.phi_of_identity() - D) + 1j * params.H
    gap = max_abs(params.K - expected_K)
    if gap > 1e-9 * max(1.0, max_abs(params.K)):
        raise ValueError(
            f"K is inconsistent with (H, D): residual {gap:.3g}; "
            "pass D equal to the scalar block applied to the identity")
    Lop = _interleave(params.kraus_L, n, r)
    Lcirc = np.stack([_interleave(params.kraus_Lmat[:, m], n, r) for m in range(d)])
    Lminus = np.stack([
        sum(dagger(L) @ Ln for L, Ln in zip(params.kraus_L, params.kraus_Lmat[:, m]))
        - params.K_row[m]
        for m in range(d)])
    return PreHilbertDilation(n, d, r, Lop, Lcirc, Lminus, D, np.asarray(params.H, dtype=complex))


@dataclass(frozen=True, eq=False)
class PseudoDilation:
    """Block representation on h + K + h with L^flat jhat(X) L = generator blocks."""

    pre: PreHilbertDilation
    metric: PseudoMetric
    Lbold: np.ndarray = field(repr=False)
    Lflat: np.ndarray = field(repr=False)
    residuals: dict = field(default_factory=dict)

    def jhat(self, X: np.ndarray) -> np.ndarray:
        n = self.pre.n
        kd = self.pre.kspace_dim
        dim = 2 * n + kd
        out = np.zeros((dim, dim), dtype=complex)
        out[:n, :n] = X
        out[:n, n:n + kd] = self.pre.kstar(X)
        out[:n, n + kd:] = self.pre.l(X)
        out[n:n + kd, n:n + kd] = self.pre.j(X)
        out[n:n + kd, n + kd:] = self.pre.k(X)
        out[n + kd:, n + kd:] = X
        return out

    def flat_of(self, A: np.ndarray) -> np.ndarray:
        return self.metric.conjugate(A)


def generator_block_matrix(gen: FormGenerator, X: np.ndarray) -> np.ndarray:
    """All generator blocks applied to X, arranged as an (1+d)n square array.

    Row/column group 0 is the scalar slot; group m >= 1 pairs the up blocks
    (rows) with the down blocks (columns) and the exchange blocks inside.
    """
    n, d = gen.n, gen.d
    out = np.zeros(((1 + d) * n, (1 + d) * n), dtype=complex)
    out[:n, :n] = gen.scalar(X)
    for m in range(d):
        out[:n, (1 + m) * n:(2 + m) * n] = gen.down[m](X)
        out[(1 + m) * n:(2 + m) * n, :n] = gen.up[m](X)
        for nn in range(d):
            out[(1 + m) * n:(2 + m) * n, (1 + nn) * n:(2 + nn) * n] = gen.matrix[m][nn](X)
    return out


def build_pseudo_dilation(pre: PreHilbertDilation, gen: FormGenerator,
                          tol: float = 1e-8) -> PseudoDilation:
    """Assemble the metric representation and verify its three identities.

    Checks, over the matrix-unit basis: multiplicativity of jhat under the
    metric conjugation, the closed form of L^flat, and reconstruction of the
    generator block matrix.  Raises ResidualTooLarge (with the offending
    basis element) if reconstruction fails.
    """
    n, d, r = pre.n, pre.d, pre.r
    if (gen.n, gen.d) != (n, d):
        raise ValueError("dilation and generator dimensions disagree")
    kd = pre.kspace_dim
    metric = PseudoMetric(n, kd, gen.D)
    dim = 2 * n + kd
    width = (1 + d) * n

    Lbold = np.zeros((dim, width), dtype=complex)
    Lbold[n + kd:, :n] = np.eye(n)
    for m in range(d):
        colblock = slice((1 + m) * n, (2 + m) * n)
        Lbold[:n, colblock] = pre.Lminus[m]
        Lbold[n:n + kd, colblock] = pre.Lcirc[m]
    Lflat = dagger(Lbold) @ metric.G

    closed = np.zeros((width, dim), dtype=complex)
    closed[:n, :n] = np.eye(n)
    closed[:n, n + kd:] = gen.D
    for m in range(d):
        rowblock = slice((1 + m) * n, (2 + m) * n)
        closed[rowblock, n:n + kd] = dagger(pre.Lcirc[m])
        closed[rowblock, n + kd:] = dagger(pre.Lminus[m])
    flat_residual = max_abs(Lflat - closed)

    dil = PseudoDilation(pre, metric, Lbold, Lflat, {})
    units = matrix_units(n)
    jhats = [dil.jhat(E) for E in units]
    mult_res = max_abs(dil.jhat(np.eye(n)) - np.eye(dim))
    recon_res = 0.0
    worst = None
    for a, Ea in enumerate(units):
        flat_a = metric.conjugate(jhats[a])
        for b, Eb in enumerate(units):
            mult_res = max(mult_res, max_abs(
                dil.jhat(dagger(Ea) @ Eb) - flat_a @ jhats[b]))
        res = max_abs(Lflat @ jhats[a] @ Lbold - generator_block_matrix(gen, Ea))
        if res > recon_res:
            recon_res = res
            worst = a
    residuals = {"multiplicativity": mult_res, "flat_closed_form": flat_residual,
                 "reconstruction": recon_res}
    object.__setattr__(dil, "residuals", residuals)
    if recon_res > tol:
        raise ResidualTooLarge(recon_res, f"basis element {worst}")
    return dil
