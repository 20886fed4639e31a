"""Stochastic form-generators on M_n and their complete-dissipativity check.

A form-generator collects the structural maps driving a quantum stochastic
flow equation: a scalar block (the Lindblad-type generator of the
vacuum-expected semigroup), d "up" and d "down" blocks coupling to creation
and annihilation noise, and a d x d exchange block.  The generator of a
completely positive cocycle is characterised by positivity of a sesquilinear
dissipation kernel, assembled here over the matrix-unit basis; an
independent sampling check evaluates the underlying conditional quadratic
form directly on random constrained families.
"""

from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    SuperOperator,
    dagger,
    matrix_units,
    max_abs,
    pair_action,
)


@dataclass(frozen=True, eq=False)
class FormGenerator:
    """Block superoperator (scalar, up[d], down[d], matrix[d][d]) on M_n.

    ``matrix`` holds the exchange maps including the identity part, i.e. the
    blocks reduce to ``delta_mn * id`` for the trivial cocycle.
    """

    n: int
    d: int
    scalar: SuperOperator
    up: tuple
    down: tuple
    matrix: tuple
    D: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        n, d = self.n, self.d
        if self.scalar.in_dim != n or self.scalar.out_dim != n:
            raise ValueError("scalar block dimension mismatch")
        if len(self.up) != d or len(self.down) != d or len(self.matrix) != d:
            raise ValueError("block count does not match noise dimension")
        object.__setattr__(self, "up", tuple(self.up))
        object.__setattr__(self, "down", tuple(self.down))
        object.__setattr__(self, "matrix", tuple(tuple(row) for row in self.matrix))
        for op in (*self.up, *self.down, *(b for row in self.matrix for b in row)):
            if op.in_dim != n or op.out_dim != n:
                raise ValueError("all blocks must act on M_n")
        object.__setattr__(self, "D", self.scalar(np.eye(n)))

    @classmethod
    def zero(cls, n: int, d: int) -> "FormGenerator":
        z = SuperOperator.zero(n)
        return cls(n, d, z, (z,) * d, (z,) * d, tuple((z,) * d for _ in range(d)))

    def stacked(self):
        """Raw action matrices: (scalar, up (d,m,m), down (d,m,m), matrix (d,d,m,m))."""
        up = np.stack([op.action for op in self.up])
        down = np.stack([op.action for op in self.down])
        mat = np.stack([np.stack([op.action for op in row]) for row in self.matrix])
        return self.scalar.action, up, down, mat

    def flat_symmetry_residual(self) -> float:
        """Deviation from the adjoint symmetry tying scalar/up/down/matrix blocks.

        Zero means the generator produces *-cocycles: the scalar block is
        adjoint-symmetric, up and down are mutual adjoint maps, and the
        exchange block is adjoint-symmetric under index transposition.
        """
        res = max_abs(self.scalar.action - self.scalar.adjoint_map().action)
        for m in range(self.d):
            res = max(res, max_abs(self.up[m].adjoint_map().action - self.down[m].action))
            for n_ in range(self.d):
                res = max(res, max_abs(
                    self.matrix[m][n_].adjoint_map().action - self.matrix[n_][m].action))
        return res

    def normalization_class(self, tol: float = 1e-10) -> str:
        """'martingale' if D = 0, 'submartingale' if D <= 0, else 'neither'."""
        if max_abs(self.D) <= tol:
            return "martingale"
        eigs = np.linalg.eigvalsh(0.5 * (self.D + dagger(self.D)))
        if eigs[-1] <= tol:
            return "submartingale"
        return "neither"

    def block_residual(self, other: "FormGenerator") -> float:
        """Max-abs difference over all action matrices."""
        if (self.n, self.d) != (other.n, other.d):
            raise ValueError("generators must share dimensions")
        res = max_abs(self.scalar.action - other.scalar.action)
        for m in range(self.d):
            res = max(res, max_abs(self.up[m].action - other.up[m].action))
            res = max(res, max_abs(self.down[m].action - other.down[m].action))
            for n_ in range(self.d):
                res = max(res, max_abs(
                    self.matrix[m][n_].action - other.matrix[m][n_].action))
        return res


def degenerate_embedding(X: np.ndarray, d: int) -> np.ndarray:
    """The reference representation placing X in the scalar corner of h + h^bullet."""
    n = X.shape[0]
    out = np.zeros(((d + 1) * n, (d + 1) * n), dtype=complex)
    out[:n, :n] = X
    return out


def assemble_from_hp(params) -> FormGenerator:
    """Build a form-generator from Hudson-Parthasarathy coefficients.

    Blocks, with Kraus families L^i (scalar) and L^i_n (per channel):
      matrix[m][n](X) = sum_i L^i_m^dag X L^i_n
      up[m](X)        = sum_i L^i_m^dag X L^i  - K_m^dag X
      down[n](X)      = sum_i L^i^dag  X L^i_n - X K_n
      scalar(X)       = sum_i L^i^dag  X L^i   - K^dag X - X K
    """
    n, d = params.n, params.d
    eye = np.eye(n)
    Ls = params.kraus_L          # (r, n, n)
    Lmat = params.kraus_Lmat     # (r, d, n, n)

    sandwich = pair_action
    scalar = sandwich(Ls, Ls) - np.kron(eye, dagger(params.K)) - np.kron(params.K.T, eye)
    up = []
    down = []
    for m in range(d):
        up.append(sandwich(Lmat[:, m], Ls) - np.kron(eye, dagger(params.K_row[m])))
        down.append(sandwich(Ls, Lmat[:, m]) - np.kron(params.K_row[m].T, eye))
    mat = [[sandwich(Lmat[:, m], Lmat[:, nn]) for nn in range(d)] for m in range(d)]

    wrap = lambda a: SuperOperator(a, n, n)
    return FormGenerator(
        n, d, wrap(scalar),
        tuple(wrap(a) for a in up),
        tuple(wrap(a) for a in down),
        tuple(tuple(wrap(a) for a in row) for row in mat),
    )


def semigroup_generator(gen: FormGenerator) -> SuperOperator:
    """The scalar block: generator of the vacuum-expected semigroup."""
    return gen.scalar


@dataclass(frozen=True, eq=False)
class Dissipator:
    """Sesquilinear dissipation kernel over the matrix-unit basis.

    The kernel is an n^2 (d+1) square array of n x n blocks; a block row is
    labelled by (basis unit a, slot s) where slot 0 is the shared scalar
    component and slots 1..d the noise components.  Positivity of the kernel
    is equivalent to conditional complete positivity of the generator.
    """

    n: int
    d: int
    basis: np.ndarray = field(repr=False)
    kernel: np.ndarray = field(repr=False)


def build_dissipator(gen: FormGenerator, symmetry_tol: float = 1e-10) -> Dissipator:
    """Assemble the dissipation kernel of a generator with adjoint symmetry.

    Blocks, with E_a, E_b matrix units, lam the scalar block and D = lam(I):
      (a,m),(b,n):  matrix[m][n](E_a^dag E_b)
      (a,0),(b,n):  down[n](E_a^dag E_b) - E_a^dag down[n](E_b)
      (a,m),(b,0):  adjoint of the mirrored (0,m) block
      (a,0),(b,0):  lam(E_a^dag E_b) - E_a^dag lam(E_b) - lam(E_a^dag) E_b
                    + E_a^dag D E_b
    """
    res = gen.flat_symmetry_residual()
    if res > symmetry_tol:
        raise ValueError(f"generator violates adjoint symmetry (residual {res:.3g})")
    n, d = gen.n, gen.d
    if n**3 * (d + 1) > 10_000:
        raise ValueError("dissipation kernel would exceed the desk-scale guard of 1e4 rows")
    units = matrix_units(n)
    nb = n * n
    D = gen.D

    lam = gen.scalar
    kernel = np.zeros((nb, d + 1, n, nb, d + 1, n), dtype=complex)
    for a in range(nb):
        Ea = units[a]
        lam_Ea_dag = lam(dagger(Ea))
        for b in range(nb):
            Eb = units[b]
            prod = dagger(Ea) @ Eb
            kernel[a, 0, :, b, 0, :] = (
                lam(prod) - dagger(Ea) @ lam(Eb) - lam_Ea_dag @ Eb
                + dagger(Ea) @ D @ Eb)
            for mm in range(d):
                down_block = gen.down[mm](prod) - dagger(Ea) @ gen.down[mm](Eb)
                kernel[a, 0, :, b, mm + 1, :] = down_block
                for nn_ in range(d):
                    kernel[a, mm + 1, :, b, nn_ + 1, :] = gen.matrix[mm][nn_](prod)
    # remaining (noise, scalar) blocks from the adjoint symmetry of the form
    for a in range(nb):
        for b in range(nb):
            for mm in range(d):
                kernel[a, mm + 1, :, b, 0, :] = dagger(kernel[b, 0, :, a, mm + 1, :])
    size = nb * (d + 1) * n
    return Dissipator(n, d, units, kernel.reshape(size, size))


@dataclass(frozen=True)
class CcpVerdict:
    accepted: bool
    min_eig: float
    threshold: float
    witness: tuple | None

    def __bool__(self):
        return self.accepted


def check_conditionally_cp(gen: FormGenerator, tol: float = 1e-9) -> CcpVerdict:
    """Decide conditional complete positivity from the dissipator spectrum.

    Accepts iff the smallest kernel eigenvalue is above ``-tol`` scaled by
    the largest eigenvalue magnitude (with a floor of 1 so the zero kernel
    is accepted).  On rejection the most negative eigenvector is reshaped
    into a witness family of (basis unit, component vector stack) pairs.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    dis = build_dissipator(gen)
    w, V = np.linalg.eigh(dis.kernel)
    scale = max(1.0, float(np.abs(w).max()))
    min_eig = float(w[0])
    threshold = tol * scale
    if min_eig >= -threshold:
        return CcpVerdict(True, min_eig, threshold, None)
    n, d = gen.n, gen.d
    comps = V[:, 0].reshape(n * n, d + 1, n)
    witness = []
    for a in range(n * n):
        if np.linalg.norm(comps[a]) > 1e-12:
            witness.append((dis.basis[a], comps[a].copy()))
    return CcpVerdict(False, min_eig, threshold, tuple(witness))


@dataclass(frozen=True)
class SamplingReport:
    trials: int
    min_value: float
    argmin_trial: int
    witness: tuple | None

    @property
    def passed(self) -> bool:
        return self.min_value >= -1e-8


def _form_value(gen: FormGenerator, Xs, etas) -> float:
    """Quadratic form of the generator on a family (X_k, eta_k stacks).

    eta_k stacks are (d+1, n) arrays; slot 0 is the shared scalar component.
    """
    d = gen.d
    total = 0.0 + 0.0j
    for Xk, ek in zip(Xs, etas):
        for Xl, el in zip(Xs, etas):
            prod = dagger(Xk) @ Xl
            total += ek[0].conj() @ gen.scalar(prod) @ el[0]
            for m in range(d):
                total += ek[m + 1].conj() @ gen.up[m](prod) @ el[0]
                total += ek[0].conj() @ gen.down[m](prod) @ el[m + 1]
                for nn_ in range(d):
                    total += ek[m + 1].conj() @ gen.matrix[m][nn_](prod) @ el[nn_ + 1]
    return total


def sample_conditional_positivity(
    gen: FormGenerator, trials: int, seed: int, family_size: int = 3
) -> SamplingReport:
    """Monte Carlo check of conditional positivity, independent of the kernel.

    Each trial draws a random family {X_k} and component stacks whose scalar
    parts satisfy the constraint sum_k X_k eta_k = 0 (the last eta solves
    for the rest); the quadratic form must be nonnegative for accepted
    generators up to rounding.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    n, d = gen.n, gen.d
    best = np.inf
    best_trial = -1
    best_family = None
    for trial in range(trials):
        K = family_size
        while True:
            Xs = rng.standard_normal((K, n, n)) + 1j * rng.standard_normal((K, n, n))
            Xs /= np.linalg.norm(Xs, axis=(1, 2), keepdims=True)
            if np.linalg.cond(Xs[-1]) < 1e6:
                break
        etas = rng.standard_normal((K, d + 1, n)) + 1j * rng.standard_normal((K, d + 1, n))
        rhs = sum(Xs[k] @ etas[k, 0] for k in range(K - 1))
        etas[-1, 0] = -np.linalg.solve(Xs[-1], rhs)
        etas /= np.linalg.norm(etas)
        value = _form_value(gen, Xs, etas)
        if abs(value.imag) > 1e-8 * max(1.0, abs(value.real)):
            raise ArithmeticError("conditional form returned a non-real value")
        if value.real < best:
            best = value.real
            best_trial = trial
            best_family = (Xs.copy(), etas.copy())
    witness = best_family if best < -1e-8 else None
    return SamplingReport(trials, float(best), best_trial, witness)
