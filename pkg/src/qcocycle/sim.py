"""Four cross-validating realizations of the cocycle dynamics.

Matrix elements of the flow against coherent (exponential) noise vectors are
computed by

  * ``semigroup_trace`` / ``semigroup_expm``: the vacuum-expected semigroup
    via the exponential of the scalar block (oracle for everything else);
  * ``simulate_transfer``: a repeated-interaction discretization that steps
    one finite noise slice per time step;
  * ``coherent_form_ode``: direct RK4 integration of the linear ODE obeyed
    by the coherent matrix elements;
  * ``picard_solve``: iteration of the integral equation built on the
    vector cocycle of the drift.

Throughout, ``f`` is the bra-side coherent function (conjugated) and ``h``
the ket side; coherent vectors are unnormalized exponential vectors with
support inside the simulated window.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from . import kernels
from .dilation import HPParams
from .generator import FormGenerator, assemble_from_hp
from .linalg import dagger, max_abs, pair_action, unvec, vec


class GridMismatch(ValueError):
    """Operands live on different time grids."""


@dataclass(frozen=True, eq=False)
class CoherentFunction:
    """Piecewise-constant C^d-valued test function on a uniform grid.

    ``values[k]`` holds on the slice [t_k, t_{k+1}).
    """

    d: int
    T: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.ndim != 2 or vals.shape[1] != self.d or vals.shape[0] < 1:
            raise ValueError(f"values shape {vals.shape} invalid for d={self.d}")
        if not np.all(np.isfinite(vals.view(float))):
            raise ValueError("coherent values must be finite")
        if not self.T > 0:
            raise ValueError("horizon must be positive")
        object.__setattr__(self, "values", vals)

    @property
    def steps(self) -> int:
        return self.values.shape[0]

    @property
    def tau(self) -> float:
        return self.T / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.steps + 1)

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.values == self.values[0]))

    @classmethod
    def vacuum(cls, d: int, T: float, steps: int) -> "CoherentFunction":
        return cls(d, T, np.zeros((steps, d), dtype=complex))

    @classmethod
    def constant(cls, d: int, T: float, steps: int, amplitude=1.0) -> "CoherentFunction":
        amp = np.broadcast_to(np.asarray(amplitude, dtype=complex), (d,))
        return cls(d, T, np.tile(amp, (steps, 1)))

    def pair_density(self, other: "CoherentFunction") -> np.ndarray:
        """Per-slice value of sum_n conj(self^n) other^n."""
        return np.einsum("kn,kn->k", self.values.conj(), other.values)

    def cumulative_pairing(self, other: "CoherentFunction") -> np.ndarray:
        """Left-endpoint cumulative integral of the pair density on the grid."""
        dens = self.pair_density(other)
        out = np.zeros(self.steps + 1, dtype=complex)
        out[1:] = np.cumsum(dens) * self.tau
        return out


def check_same_grid(*fns):
    first = fns[0]
    for f in fns[1:]:
        if f.steps != first.steps or abs(f.T - first.T) > 1e-12 * max(1.0, first.T) \
                or f.d != first.d:
            raise GridMismatch("coherent functions live on different grids")


@dataclass(frozen=True, eq=False)
class MatrixElementTrace:
    """Grid trace of the sesquilinear form of the flow applied to one observable."""

    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    def error_vs(self, other: "MatrixElementTrace") -> float:
        if self.values.shape != other.values.shape:
            raise GridMismatch("traces have different shapes")
        return max_abs(self.values - other.values)


@dataclass(frozen=True, eq=False)
class VectorCocycleTrace:
    """Grid trace of the drift cocycle contracted against one coherent function."""

    times: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)


@dataclass(frozen=True, eq=False)
class ToyFockModel:
    """Repeated-interaction discretization of the flow of a parameter set.

    Each time slice carries C^(1 + max(d, r)): one vacuum slot plus one slot
    per noise channel and per Kraus direction (zero padded when they
    differ).  The slice step operator is affine in the coefficients; the dt
    term multiplies the full slice identity, which keeps it that way.
    """

    params: HPParams
    T: float
    steps: int
    step_op: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.steps < 1 or not self.T > 0:
            raise ValueError("need steps >= 1 and T > 0")
        object.__setattr__(self, "step_op", self._build_step_op())

    @property
    def tau(self) -> float:
        return self.T / self.steps

    @property
    def slice_dim(self) -> int:
        return 1 + max(self.params.d, self.params.r)

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.steps + 1)

    def _build_step_op(self) -> np.ndarray:
        p = self.params
        n, d, r, s = p.n, p.d, p.r, self.slice_dim
        tau = self.tau
        rt = np.sqrt(tau)
        eye_n = np.eye(n)

        def unit(a, b):
            E = np.zeros((s, s))
            E[a, b] = 1.0
            return E

        M = np.kron(eye_n, np.eye(s)) - tau * np.kron(p.K, np.eye(s))
        for i in range(r):
            M += rt * np.kron(p.kraus_L[i], unit(1 + i, 0))
            for nn in range(d):
                coupling = p.kraus_Lmat[i, nn] - (eye_n if i == nn else 0.0)
                M += np.kron(coupling, unit(1 + i, 1 + nn))
        for nn in range(d):
            M -= rt * np.kron(p.K_row[nn], unit(0, 1 + nn))
        return M

    def slice_vectors(self, f: CoherentFunction) -> np.ndarray:
        """(steps, slice_dim) coherent slice vectors e_0 + sqrt(tau) f(t_k)."""
        u = np.zeros((self.steps, self.slice_dim), dtype=complex)
        u[:, 0] = 1.0
        u[:, 1:1 + self.params.d] = np.sqrt(self.tau) * f.values
        return u

    def check_grid(self, f: CoherentFunction):
        if f.steps != self.steps or abs(f.T - self.T) > 1e-12 * max(1.0, self.T):
            raise GridMismatch("coherent function grid does not match the model")
        if f.d != self.params.d:
            raise GridMismatch("coherent function noise dimension mismatch")


def _check_observable(X, n):
    X = np.asarray(X, dtype=complex)
    if X.shape != (n, n):
        raise ValueError(f"observable shape {X.shape}, expected {(n, n)}")
    return X


def semigroup_expm(gen: FormGenerator, t: float, X) -> np.ndarray:
    """Vacuum-expected evolution exp(t scalar) applied to X."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    X = _check_observable(X, gen.n)
    return unvec(expm(t * gen.scalar.action) @ vec(X), (gen.n, gen.n))


def semigroup_trace(gen: FormGenerator, T: float, steps: int, X) -> MatrixElementTrace:
    X = _check_observable(X, gen.n)
    times = np.linspace(0.0, T, steps + 1)
    vals = np.stack([semigroup_expm(gen, t, X) for t in times])
    return MatrixElementTrace(times, vals)


def transfer_prefix_products(model: ToyFockModel, f: CoherentFunction,
                             h: CoherentFunction, count: int | None = None,
                             offset: int = 0) -> np.ndarray:
    """Accumulated slice-transfer superoperators over ``count`` slices.

    ``offset`` starts the coherent values at a later slice, which realizes
    the time shift entering the cocycle identity; values past the end are
    padded with zeros.
    """
    model.check_grid(f)
    model.check_grid(h)
    count = model.steps if count is None else count
    uf = model.slice_vectors(f)
    uh = model.slice_vectors(h)
    if offset:
        pad = np.zeros((offset, uf.shape[1]), dtype=complex)
        pad[:, 0] = 1.0
        uf = np.vstack([uf[offset:], pad])
        uh = np.vstack([uh[offset:], pad])
    n, s = model.params.n, model.slice_dim
    return kernels.transfer_products(model.step_op, uf[:count], uh[:count], n, s)


def simulate_transfer(model: ToyFockModel, X, f: CoherentFunction,
                      h: CoherentFunction) -> MatrixElementTrace:
    """Coherent matrix elements of the repeated-interaction cocycle.

    The value at grid point t_k uses the coherent functions truncated to
    [0, t_k], matching the support convention of the other solvers.
    """
    X = _check_observable(X, model.params.n)
    P = transfer_prefix_products(model, f, h)
    vX = vec(X)
    n = model.params.n
    vals = np.stack([unvec(P[k] @ vX, (n, n)) for k in range(model.steps + 1)])
    return MatrixElementTrace(model.times, vals)


def cocycle_residual(model: ToyFockModel, X, s_steps: int, r_steps: int,
                     f: CoherentFunction | None = None,
                     h: CoherentFunction | None = None,
                     misalign: bool = False) -> float:
    """Deviation of composed shifted transfer maps from the one-shot map.

    Composes the first s_steps slice maps with the next r_steps (the shift
    re-indexes the coherent values) and compares against the (s+r)-slice
    map; exact associativity means the residual is rounding noise unless
    the re-indexing is broken.  ``misalign`` is a fault-injection hook that
    offsets the shifted coherent values by one extra slice.
    """
    d = model.params.d
    if f is None:
        f = CoherentFunction.vacuum(d, model.T, model.steps)
    if h is None:
        h = CoherentFunction.vacuum(d, model.T, model.steps)
    if s_steps < 0 or r_steps < 0 or s_steps + r_steps > model.steps:
        raise IndexError("need 0 <= s, r and s + r <= steps")
    full = transfer_prefix_products(model, f, h, count=s_steps + r_steps)
    left = transfer_prefix_products(model, f, h, count=s_steps)
    shift = s_steps + 1 if misalign else s_steps
    right = transfer_prefix_products(model, f, h, count=r_steps, offset=shift)
    return max_abs(left[s_steps] @ right[r_steps] - full[s_steps + r_steps])


def coherent_form_ode(gen: FormGenerator, X, f: CoherentFunction,
                      h: CoherentFunction) -> MatrixElementTrace:
    """RK4 integration of the superoperator ODE for coherent matrix elements.

    The slice generator combines the blocks weighted by the coherent values;
    the pairing term of the exponential vectors cancels against the identity
    part of the exchange blocks, leaving the plain block combination.
    """
    check_same_grid(f, h)
    if f.d != gen.d:
        raise GridMismatch("coherent function noise dimension mismatch")
    X = _check_observable(X, gen.n)
    sc, up, down, mat = gen.stacked()
    fv, hv = f.values, h.values
    A = (sc[None, :, :]
         + np.einsum("km,mab->kab", fv.conj(), up)
         + np.einsum("kn,nab->kab", hv, down)
         + np.einsum("km,kn,mnab->kab", fv.conj(), hv, mat))
    m2 = gen.n * gen.n
    Psi = kernels.rk4_right(A, np.eye(m2, dtype=complex), f.tau)
    vX = vec(X)
    vals = np.stack([unvec(Psi[k] @ vX, (gen.n, gen.n)) for k in range(f.steps + 1)])
    return MatrixElementTrace(f.times, vals)


def vector_cocycle(params: HPParams, h: CoherentFunction) -> VectorCocycleTrace:
    """Action of the drift cocycle on the system against one coherent function.

    Solves dW/dt = -(K + sum_m K_m h^m(t)) W with W_0 = I.
    """
    if h.d != params.d:
        raise GridMismatch("coherent function noise dimension mismatch")
    drift = -(params.K[None, :, :]
              + np.einsum("km,mab->kab", h.values, params.K_row))
    W = kernels.rk4_left(drift, np.eye(params.n, dtype=complex), h.tau)
    return VectorCocycleTrace(h.times, W)


@dataclass(frozen=True)
class PicardReport:
    iterations: int
    deltas: tuple
    non_contraction: bool


def _phi_blocks(params: HPParams):
    """CP-part actions (scalar, up, down, exchange) of a parameter set."""
    Ls = params.kraus_L
    Lmat = params.kraus_Lmat
    d = params.d
    sc = pair_action(Ls, Ls)
    up = np.stack([pair_action(Lmat[:, m], Ls) for m in range(d)])
    down = np.stack([pair_action(Ls, Lmat[:, m]) for m in range(d)])
    mat = np.stack([np.stack([pair_action(Lmat[:, m], Lmat[:, nn])
                              for nn in range(d)]) for m in range(d)])
    return sc, up, down, mat


def _bracket_actions(params: HPParams, f: CoherentFunction, h: CoherentFunction):
    """Per-slice integrand superoperator of the integral equation.

    Combines the CP blocks with the coherent weights; only the exchange
    part carries the identity subtraction.
    """
    sc, up, down, mat = _phi_blocks(params)
    m2 = params.n ** 2
    fv, hv = f.values, h.values
    eye = np.eye(m2)
    out = (sc[None, :, :]
           + np.einsum("km,mab->kab", fv.conj(), up)
           + np.einsum("kn,nab->kab", hv, down)
           + np.einsum("km,kn,mnab->kab", fv.conj(), hv, mat)
           - f.pair_density(h)[:, None, None] * eye[None, :, :])
    return out


def _batch_vec(mats: np.ndarray) -> np.ndarray:
    """Column-stack each matrix in a (k, n, n) batch."""
    k, n, _ = mats.shape
    return mats.transpose(0, 2, 1).reshape(k, n * n)


def _batch_unvec(vecs: np.ndarray, n: int) -> np.ndarray:
    return vecs.reshape(-1, n, n).transpose(0, 2, 1)


def picard_solve(params: HPParams, X, f: CoherentFunction, h: CoherentFunction,
                 iters: int = 25):
    """Iterate the integral equation of the flow built on the drift cocycle.

    Returns (trace, report).  The iteration starts from the drift sandwich
    term and adds the left-endpoint quadrature of the noise integrals; for
    bounded coefficients successive differences contract geometrically.  A
    non-contraction flag (3 consecutive growing differences, typically the
    horizon being too long for the step count) is reported, not raised.

    Constant coherent functions collapse the time-shifted inner evaluations
    and run on a single-column table; general piecewise functions use a
    two-time table, quadratic in the step count.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    check_same_grid(f, h)
    if f.d != params.d:
        raise GridMismatch("coherent function noise dimension mismatch")
    n = params.n
    X = _check_observable(X, n)
    N = f.steps
    tau = f.tau
    Wf = vector_cocycle(params, f).values
    Wh = vector_cocycle(params, h).values
    cums = f.cumulative_pairing(h)
    cexp = np.exp(cums)
    brackets = _bracket_actions(params, f, h)

    WfH = Wf.conj().transpose(0, 2, 1)
    sandwich = cexp[:, None, None] * (WfH @ X[None] @ Wh)
    deltas = []

    if f.is_constant and h.is_constant:
        Mb = brackets[0]
        lam = cexp[:N, None, None] * np.einsum(
            "kab,bc->kac",
            np.stack([np.kron(Wh[k].T, WfH[k]) for k in range(N)]),
            Mb)
        v = _batch_vec(sandwich)
        vS = v.copy()
        for _ in range(iters):
            vnew = vS + tau * kernels.causal_matconv(lam, v)
            deltas.append(max_abs(vnew - v))
            v = vnew
        vals = _batch_unvec(v, n)
    else:
        mem = (N + 1) ** 2 * n * n * 16
        if mem > 2.5e8:
            raise ValueError(
                "two-time table would exceed memory; reduce the step count "
                "or use constant coherent functions")
        Wfinv = np.linalg.inv(Wf)
        Whinv = np.linalg.inv(Wh)
        WfinvH = Wfinv.conj().transpose(0, 2, 1)
        PhH = Wf.conj().transpose(0, 2, 1)
        # start-time a indexes rows, end-time e columns; entry = matrix element
        # of the flow over [t_a, t_e] with coherent arguments shifted by t_a
        Fcore = cexp[:, None, None] * (PhH @ X[None] @ Wh)
        escale = np.exp(-cums)
        theta = np.einsum(
            "a,aij,ejk,akl->aeil", escale, WfinvH, Fcore, Whinv, optimize=True)
        for _ in range(iters):
            new = np.array(theta)
            delta = 0.0
            for e in range(N + 1):
                if e == 0:
                    new[0, 0] = escale[0] * WfinvH[0] @ Fcore[0] @ Whinv[0]
                    continue
                col = theta[:e, e]
                Gv = np.einsum("kab,kb->ka", brackets[:e], _batch_vec(col))
                G = _batch_unvec(Gv, n)
                G = cexp[:e, None, None] * (PhH[:e] @ G @ Wh[:e])
                suffix = np.zeros((e + 1, n, n), dtype=complex)
                suffix[:e] = np.cumsum(G[::-1], axis=0)[::-1]
                core = Fcore[e][None] + tau * suffix
                new[:e + 1, e] = escale[:e + 1, None, None] * (
                    WfinvH[:e + 1] @ core @ Whinv[:e + 1])
                delta = max(delta, max_abs(new[:e + 1, e] - theta[:e + 1, e]))
            deltas.append(delta)
            theta = new
        vals = theta[0]

    non_contraction = any(
        deltas[i] > deltas[i - 1] and deltas[i - 1] > deltas[i - 2]
        and deltas[i - 2] > deltas[i - 3]
        for i in range(3, len(deltas)))
    report = PicardReport(iters, tuple(deltas), non_contraction)
    return MatrixElementTrace(f.times, vals), report


def run_solver(solver: str, system, X, f: CoherentFunction, h: CoherentFunction,
               iters: int = 25) -> MatrixElementTrace:
    """Dispatch a named solver on a generator or a parameter set.

    'transfer' and 'picard' require parameters; 'ode' accepts either (a
    parameter set is assembled first); 'expm' computes the vacuum-expected
    semigroup regardless of the coherent arguments.
    """
    is_params = isinstance(system, HPParams)
    if solver == "expm":
        gen = assemble_from_hp(system) if is_params else system
        return semigroup_trace(gen, f.T, f.steps, X)
    if solver == "ode":
        gen = assemble_from_hp(system) if is_params else system
        return coherent_form_ode(gen, X, f, h)
    if not is_params:
        raise ValueError(f"solver '{solver}' requires explicit parameters")
    if solver == "transfer":
        model = ToyFockModel(system, f.T, f.steps)
        return simulate_transfer(model, X, f, h)
    if solver == "picard":
        trace, _ = picard_solve(system, X, f, h, iters=iters)
        return trace
    raise ValueError(f"unknown solver '{solver}'")


@dataclass(frozen=True)
class GramReport:
    solver: str
    min_eig: float
    per_family: tuple

    @property
    def passed(self) -> bool:
        return self.min_eig >= -1e-6


def gram_positivity_check(solver: str, system, families, seed=None) -> GramReport:
    """Positive definiteness of the block form over coherent test families.

    Each family is a pair (blocks, coherents) with ``blocks`` a PSD
    (q, q, n, n) operator block matrix and ``coherents`` a list of functions
    on a shared grid.  The Gram matrix over (block row, coherent) indices is
    assembled from final-time matrix elements; its minimum eigenvalue must
    be nonnegative up to discretization error for CP dynamics.  ``seed`` is
    carried in the report for bookkeeping only.
    """
    mins = []
    for blocks, coherents in families:
        blocks = np.asarray(blocks, dtype=complex)
        q, n = blocks.shape[0], blocks.shape[2]
        p = len(coherents)
        check_same_grid(*coherents)
        big = np.zeros((q * p * n, q * p * n), dtype=complex)
        for k in range(q):
            for i in range(p):
                for l in range(q):
                    for j in range(p):
                        if (l, j) < (k, i):
                            continue
                        val = run_solver(solver, system, blocks[k, l],
                                         coherents[i], coherents[j]).final
                        rows = slice((k * p + i) * n, (k * p + i + 1) * n)
                        cols = slice((l * p + j) * n, (l * p + j + 1) * n)
                        big[rows, cols] = val
                        if (l, j) != (k, i):
                            big[cols, rows] = dagger(val)
        big = 0.5 * (big + dagger(big))
        mins.append(float(np.linalg.eigvalsh(big)[0]))
    return GramReport(solver, min(mins), tuple(mins))


@dataclass(frozen=True)
class MartingaleReport:
    classification: str
    times: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def passed(self) -> bool:
        return self.classification in ("martingale", "submartingale")


def martingale_check(gen: FormGenerator, T: float, steps: int,
                     tol: float = 1e-10) -> MartingaleReport:
    """Classify the normalization of the flow from the semigroup on the grid.

    martingale: the identity is preserved; submartingale: the scalar block
    kills the identity downward and the family decreases in PSD order on
    the grid; anything else is 'neither'.
    """
    n = gen.n
    trace = semigroup_trace(gen, T, steps, np.eye(n))
    vals = trace.values
    eigs = np.stack([np.linalg.eigvalsh(0.5 * (V + dagger(V))) for V in vals])
    if max_abs(vals - np.eye(n)[None]) <= tol:
        return MartingaleReport("martingale", trace.times, eigs)
    scale = max(1.0, max_abs(vals))
    D_eigs = np.linalg.eigvalsh(0.5 * (gen.D + dagger(gen.D)))
    monotone = all(
        np.linalg.eigvalsh(0.5 * ((vals[k] - vals[k + 1])
                                  + dagger(vals[k] - vals[k + 1])))[0] >= -tol * scale
        for k in range(len(vals) - 1))
    hermitian = max_abs(vals - vals.conj().transpose(0, 2, 1)) <= 1e-8 * scale
    if D_eigs[-1] <= tol and monotone and hermitian:
        return MartingaleReport("submartingale", trace.times, eigs)
    return MartingaleReport("neither", trace.times, eigs)
