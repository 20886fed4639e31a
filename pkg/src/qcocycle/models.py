"""Ready-made systems: textbook examples, random batteries, counterexamples.

Random draws are scaled so the battery stays in the bounded, well-conditioned
regime the solvers are calibrated for (desk scale); every function is
deterministic given its seed.
"""

import numpy as np

from .dilation import HPParams
from .generator import FormGenerator, assemble_from_hp
from .ito import StructureMatrix
from .linalg import SuperOperator, dagger, swap_matrix


def amplitude_damping_params() -> HPParams:
    """Qubit amplitude damping at unit rate, martingale normalization."""
    L = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    K = np.array([[0.0, 0.0], [0.0, 0.5]], dtype=complex)
    return HPParams.from_K(
        2, 1, K, np.zeros((1, 2, 2)), L[None], np.eye(2, dtype=complex)[None, None])


def trivial_exchange_params(n: int = 2, d: int = 1) -> HPParams:
    """Identity cocycle: exchange is the identity map, everything else zero."""
    Lmat = np.stack([np.stack([np.eye(n, dtype=complex) if i == m else
                               np.zeros((n, n), dtype=complex)
                               for m in range(d)]) for i in range(max(1, d))])
    r = Lmat.shape[0]
    return HPParams.from_K(n, d, np.zeros((n, n)), np.zeros((d, n, n)),
                           np.zeros((r, n, n)), Lmat)


def transpose_block_generator(n: int = 2) -> FormGenerator:
    """Single-channel generator whose exchange block is the transpose map.

    The transpose is positive but not completely positive, so this fails
    the dissipation-kernel test with minimum eigenvalue -1.
    """
    zero = SuperOperator.zero(n)
    transpose = SuperOperator(swap_matrix(n), n, n)
    return FormGenerator(n, 1, zero, (zero,), (zero,), ((transpose,),))


def _complex_normal(rng, shape, scale=1.0):
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def random_hp_params(seed: int, n: int = 2, d: int = 1, r: int = 1,
                     scale: float = 0.35, martingale: bool = True) -> HPParams:
    """Random bounded parameter set; martingale normalization by default.

    The exchange couplings sit near the identity (weak scattering), which
    keeps the first-order solver error constants small at desk-scale step
    counts.  With ``martingale=False`` a random PSD gap is added to the
    Hermitian part of K, making the normalization a strict submartingale.
    """
    rng = np.random.default_rng(seed)
    spread = scale / np.sqrt(n * r)
    kraus_L = _complex_normal(rng, (r, n, n), spread)
    kraus_Lmat = _complex_normal(rng, (r, d, n, n), spread)
    for i in range(min(r, d)):
        kraus_Lmat[i, i] += np.eye(n)
    K_row = _complex_normal(rng, (d, n, n), spread)
    H = _complex_normal(rng, (n, n), scale)
    H = 0.5 * (H + dagger(H))
    D_target = None
    if not martingale:
        Y = _complex_normal(rng, (n, n), scale)
        D_target = -(dagger(Y) @ Y)
    return HPParams.from_hamiltonian(n, d, H, kraus_L, kraus_Lmat,
                                     K_row=K_row, D_target=D_target)


_BATTERY_DIMS = ((2, 1, 1), (2, 1, 2), (2, 2, 2), (3, 1, 2), (3, 2, 3), (2, 2, 4))

_SOLVER_BATTERY_DIMS = ((2, 1, 1), (2, 1, 2), (3, 1, 2), (3, 1, 3), (2, 1, 3))


def battery(count: int = 100, martingale: bool = True) -> list:
    """Seeded list of random parameter sets cycling over desk-scale shapes."""
    out = []
    for seed in range(count):
        n, d, r = _BATTERY_DIMS[seed % len(_BATTERY_DIMS)]
        out.append(random_hp_params(seed, n=n, d=d, r=r, martingale=martingale))
    return out


def solver_battery(count: int = 10) -> list:
    """Seeded single-channel parameter sets for cross-solver agreement runs.

    Restricted to d = 1: with unnormalized exponential test vectors the
    coherent pairing factor exp(d T) alone carries a first-order
    discretization error of order exp(d T) d^2 tau, which for d >= 2 exceeds
    the percent-level agreement budget at desk-scale step counts no matter
    how small the couplings are.
    """
    out = []
    for seed in range(count):
        n, d, r = _SOLVER_BATTERY_DIMS[seed % len(_SOLVER_BATTERY_DIMS)]
        out.append(random_hp_params(seed, n=n, d=d, r=r, scale=0.2))
    return out


def random_observable(seed: int, n: int) -> np.ndarray:
    """Random Hermitian observable with unit Frobenius norm."""
    rng = np.random.default_rng(seed)
    X = _complex_normal(rng, (n, n))
    X = 0.5 * (X + dagger(X))
    return X / np.linalg.norm(X)


def random_structure_matrix(seed: int, n: int = 2, d: int = 2,
                            scale: float = 1.0) -> StructureMatrix:
    """Random admissible structure matrix (zero forbidden row and column)."""
    rng = np.random.default_rng(seed)
    ent = _complex_normal(rng, (d + 2, d + 2, n, n), scale)
    ent[d + 1] = 0.0
    ent[:, 0] = 0.0
    return StructureMatrix(n, d, ent)


def random_gram_family(seed: int, n: int, d: int, q: int = 3, p: int = 2,
                       T: float = 1.0, steps: int = 256,
                       amplitude_scale: float = 0.7):
    """A PSD operator block matrix and constant coherent functions for Gram tests.

    The (q, q, n, n) blocks come from Y^dag Y with Y complex normal, so the
    block matrix is PSD by construction.
    """
    from .sim import CoherentFunction

    rng = np.random.default_rng(seed)
    Y = _complex_normal(rng, (q * n, q * n), 1.0 / np.sqrt(q * n))
    big = dagger(Y) @ Y
    blocks = big.reshape(q, n, q, n).transpose(0, 2, 1, 3)
    amps = _complex_normal(rng, (p, d), amplitude_scale)
    coherents = [CoherentFunction(d, T, np.tile(amps[i], (steps, 1)))
                 for i in range(p)]
    return np.ascontiguousarray(blocks), coherents


def non_ccp_gallery() -> list:
    """Generators with adjoint symmetry that fail conditional positivity.

    Each entry is (name, FormGenerator); all are rejected by the kernel test
    with minimum eigenvalue well below rounding noise.
    """
    out = [("transpose-exchange", transpose_block_generator(2))]

    n = 2
    zero = SuperOperator.zero(n)
    ident = SuperOperator.identity(n)
    transpose = SuperOperator(swap_matrix(n), n, n)

    # transpose hidden in one diagonal block of a two-channel exchange
    out.append(("transpose-in-two-channels", FormGenerator(
        n, 2, zero, (zero, zero), (zero, zero),
        ((transpose, zero), (zero, ident)))))

    # negated identity exchange: Choi is minus the maximally entangled state
    minus = SuperOperator(-np.eye(n * n, dtype=complex), n, n)
    out.append(("negated-exchange", FormGenerator(n, 1, zero, (zero,), (zero,),
                                                  ((minus,),))))

    # sign-flipped dissipative scalar block
    L = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
    LdL = dagger(L) @ L
    flipped = -(SuperOperator.from_left_right(dagger(L), L).action
                - 0.5 * (np.kron(np.eye(n), LdL) + np.kron(LdL.T, np.eye(n))))
    out.append(("flipped-scalar", FormGenerator(
        n, 1, SuperOperator(flipped, n, n), (zero,), (zero,), ((ident,),))))

    # annihilation coupling with no exchange support behind it
    A = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    down = SuperOperator(np.kron(np.eye(n), A), n, n)       # X -> A X
    up = down.adjoint_map()                                  # X -> X A^dag
    out.append(("unsupported-coupling", FormGenerator(
        n, 1, zero, (up,), (down,), ((zero,),))))
    return out
