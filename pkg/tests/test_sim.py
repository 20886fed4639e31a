import numpy as np
import pytest
from scipy.linalg import expm

from qcocycle.generator import FormGenerator, assemble_from_hp
from qcocycle.linalg import SuperOperator, dagger
from qcocycle.models import (
    amplitude_damping_params,
    random_gram_family,
    random_hp_params,
    random_observable,
    solver_battery,
    transpose_block_generator,
    trivial_exchange_params,
)
from qcocycle.sim import (
    CoherentFunction,
    GridMismatch,
    ToyFockModel,
    cocycle_residual,
    coherent_form_ode,
    gram_positivity_check,
    martingale_check,
    picard_solve,
    run_solver,
    semigroup_expm,
    semigroup_trace,
    simulate_transfer,
    vector_cocycle,
)

E11 = np.diag([0.0, 1.0]).astype(complex)
AD = amplitude_damping_params()
AD_GEN = assemble_from_hp(AD)


def test_coherent_function_validation():
    with pytest.raises(ValueError):
        CoherentFunction(1, 1.0, np.zeros((4, 2)))
    with pytest.raises(ValueError):
        CoherentFunction(1, 0.0, np.zeros((4, 1)))
    with pytest.raises(ValueError):
        CoherentFunction(1, 1.0, np.full((4, 1), np.nan))


def test_semigroup_t0_is_identity_map():
    X = random_observable(0, 2)
    assert np.abs(semigroup_expm(AD_GEN, 0.0, X) - X).max() == 0.0


def test_semigroup_amplitude_damping_decay():
    # closed form: the excited projector decays at unit rate
    val = semigroup_expm(AD_GEN, 1.0, E11)[1, 1].real
    assert abs(val - 0.36788) < 5e-6
    assert abs(val - np.exp(-1.0)) < 1e-12


def test_semigroup_martingale_identity():
    for params in solver_battery(4):
        gen = assemble_from_hp(params)
        got = semigroup_expm(gen, 0.7, np.eye(gen.n))
        assert np.abs(got - np.eye(gen.n)).max() < 1e-12


def test_transfer_vacuum_against_expm():
    model = ToyFockModel(AD, 1.0, 256)
    f = CoherentFunction.vacuum(1, 1.0, 256)
    trace = simulate_transfer(model, E11, f, f)
    assert np.abs(trace.final - np.exp(-1.0) * E11).max() <= 5e-3


def test_transfer_trivial_exchange_product_factors():
    params = trivial_exchange_params(2, 1)
    N = 64
    rng = np.random.default_rng(3)
    fv = rng.standard_normal((N, 1)) + 1j * rng.standard_normal((N, 1))
    hv = rng.standard_normal((N, 1)) + 1j * rng.standard_normal((N, 1))
    f = CoherentFunction(1, 1.0, fv)
    h = CoherentFunction(1, 1.0, hv)
    model = ToyFockModel(params, 1.0, N)
    X = random_observable(1, 2)
    trace = simulate_transfer(model, X, f, h)
    tau = 1.0 / N
    factors = np.concatenate([[1.0], np.cumprod(1.0 + tau * np.conj(fv[:, 0]) * hv[:, 0])])
    expected = factors[:, None, None] * X[None]
    assert np.abs(trace.values - expected).max() < 1e-12
    vac = CoherentFunction.vacuum(1, 1.0, N)
    at_vac = simulate_transfer(model, X, vac, vac)
    assert np.abs(at_vac.values - X[None]).max() < 1e-13


def test_transfer_first_order_convergence():
    errs = {}
    for N in (256, 512):
        model = ToyFockModel(AD, 1.0, N)
        f = CoherentFunction.vacuum(1, 1.0, N)
        trace = simulate_transfer(model, E11, f, f)
        errs[N] = np.abs(trace.final - np.exp(-1.0) * E11).max()
    ratio = errs[512] / errs[256]
    assert 0.4 <= ratio <= 0.6


def test_transfer_grid_mismatch():
    model = ToyFockModel(AD, 1.0, 64)
    f = CoherentFunction.vacuum(1, 1.0, 32)
    with pytest.raises(GridMismatch):
        simulate_transfer(model, E11, f, f)
    g = CoherentFunction.vacuum(2, 1.0, 64)
    with pytest.raises(GridMismatch):
        simulate_transfer(model, E11, g, g)


def test_transfer_slice_padding_multiplicity():
    # r > d and r < d both pad the slice; the vacuum dynamics must still
    # match the semigroup oracle
    for seed, dims in ((0, (2, 1, 3)), (1, (2, 2, 1))):
        params = random_hp_params(seed, *dims)
        gen = assemble_from_hp(params)
        N = 512
        model = ToyFockModel(params, 1.0, N)
        assert model.slice_dim == 1 + max(dims[1], dims[2])
        f = CoherentFunction.vacuum(dims[1], 1.0, N)
        X = random_observable(seed, 2)
        trace = simulate_transfer(model, X, f, f)
        oracle = semigroup_expm(gen, 1.0, X)
        assert np.abs(trace.final - oracle).max() < 5e-3


def test_ode_vacuum_matches_expm():
    f = CoherentFunction.vacuum(1, 1.0, 256)
    trace = coherent_form_ode(AD_GEN, E11, f, f)
    oracle = semigroup_trace(AD_GEN, 1.0, 256, E11)
    assert trace.error_vs(oracle) < 1e-8


def test_ode_pure_exchange_closed_form():
    ident = SuperOperator.identity(2)
    zero = SuperOperator.zero(2)
    gen = FormGenerator(2, 1, zero, (zero,), (zero,), ((ident,),))
    rng = np.random.default_rng(11)
    fv = rng.standard_normal((128, 1)) + 1j * rng.standard_normal((128, 1))
    hv = rng.standard_normal((128, 1)) + 1j * rng.standard_normal((128, 1))
    f = CoherentFunction(1, 1.0, fv)
    h = CoherentFunction(1, 1.0, hv)
    X = random_observable(1, 2)
    trace = coherent_form_ode(gen, X, f, h)
    expected = np.exp(f.cumulative_pairing(h))[:, None, None] * X[None]
    scale = np.abs(expected).max()
    assert np.abs(trace.values - expected).max() < 1e-8 * scale


def test_ode_agrees_with_transfer_coherent():
    N = 512
    f = CoherentFunction.constant(1, 1.0, N, 1.0)
    model = ToyFockModel(AD, 1.0, N)
    t1 = simulate_transfer(model, E11, f, f)
    t2 = coherent_form_ode(AD_GEN, E11, f, f)
    assert t1.error_vs(t2) <= 5e-3


def test_picard_zero_params_fixed_at_observable():
    params = trivial_exchange_params(2, 1)
    f = CoherentFunction.vacuum(1, 1.0, 64)
    X = random_observable(5, 2)
    trace, report = picard_solve(params, X, f, f, iters=5)
    assert np.abs(trace.values - X[None]).max() < 1e-13
    assert not report.non_contraction


def test_picard_vacuum_against_expm():
    params = random_hp_params(2, n=2, d=1, r=2, scale=0.4)
    gen = assemble_from_hp(params)
    f = CoherentFunction.vacuum(1, 1.0, 256)
    X = random_observable(2, 2)
    trace, report = picard_solve(params, X, f, f, iters=25)
    oracle = semigroup_trace(gen, 1.0, 256, X)
    assert trace.error_vs(oracle) <= 5e-3
    assert not report.non_contraction
    assert report.deltas[-1] < 1e-12  # geometric contraction has converged


def test_picard_coherent_against_ode():
    params = random_hp_params(4, n=2, d=1, r=1, scale=0.2)
    gen = assemble_from_hp(params)
    N = 512
    f = CoherentFunction.constant(1, 1.0, N, 1.0)
    X = random_observable(4, 2)
    trace, _ = picard_solve(params, X, f, f, iters=30)
    ode = coherent_form_ode(gen, X, f, f)
    assert trace.error_vs(ode) <= 1e-2


def test_picard_general_path_against_ode():
    # non-constant coherent functions exercise the two-time table
    params = random_hp_params(6, n=2, d=1, r=2, scale=0.4)
    gen = assemble_from_hp(params)
    N = 96
    rng = np.random.default_rng(7)
    fv = 0.5 * (rng.standard_normal((N, 1)) + 1j * rng.standard_normal((N, 1)))
    hv = 0.5 * (rng.standard_normal((N, 1)) + 1j * rng.standard_normal((N, 1)))
    f = CoherentFunction(1, 1.0, fv)
    h = CoherentFunction(1, 1.0, hv)
    X = random_observable(6, 2)
    trace, report = picard_solve(params, X, f, h, iters=30)
    ode = coherent_form_ode(gen, X, f, h)
    assert trace.error_vs(ode) <= 2e-2
    assert not report.non_contraction


def test_picard_paths_agree_on_constant_input():
    # the collapsed single-column recursion and the two-time table must
    # produce the same iterates for constant functions
    params = random_hp_params(9, n=2, d=1, r=1, scale=0.4)
    N = 64
    f = CoherentFunction.constant(1, 1.0, N, 0.8 - 0.1j)
    almost = np.tile(np.array([[0.8 - 0.1j]]), (N, 1))
    almost[-1, 0] = 0.8 - 0.1j + 1e-300  # force the general path, same values
    g = CoherentFunction(1, 1.0, almost)
    X = random_observable(9, 2)
    t1, _ = picard_solve(params, X, f, f, iters=10)
    t2, _ = picard_solve(params, X, g, f, iters=10)
    assert t1.error_vs(t2) < 1e-10


def test_picard_non_contraction_flag():
    params = random_hp_params(0, n=2, d=1, r=1, scale=2.0)
    f = CoherentFunction.constant(1, 6.0, 64, 1.0)
    _, report = picard_solve(params, np.eye(2), f, f, iters=10)
    assert report.non_contraction


def test_vector_cocycle_pure_drift():
    # with no annihilation couplings the trace is the drift exponential
    W = vector_cocycle(AD, CoherentFunction.constant(1, 1.0, 256, 1.0))
    assert np.abs(W.values[-1] - expm(-AD.K)).max() < 1e-10
    assert np.abs(W.values[0] - np.eye(2)).max() == 0.0


def test_hermiticity_of_traces():
    params = random_hp_params(1, n=2, d=1, r=2, scale=0.4)
    gen = assemble_from_hp(params)
    N = 128
    f = CoherentFunction.constant(1, 1.0, N, 0.7 + 0.3j)
    X = random_observable(8, 2)
    model = ToyFockModel(params, 1.0, N)
    traces = [
        simulate_transfer(model, X, f, f),
        coherent_form_ode(gen, X, f, f),
        picard_solve(params, X, f, f, iters=15)[0],
    ]
    for trace in traces:
        herm = np.abs(trace.values - trace.values.conj().transpose(0, 2, 1)).max()
        assert herm < 1e-10
        assert np.abs(trace.values[0] - X).max() < 1e-13


def test_slice_transfer_map_is_cp():
    # with matching bra and ket the one-slice map is a sum of conjugations,
    # so its Choi matrix is PSD at every step
    params = random_hp_params(3, n=2, d=2, r=2)
    N = 16
    model = ToyFockModel(params, 1.0, N)
    rng = np.random.default_rng(0)
    fv = rng.standard_normal((N, 2)) + 1j * rng.standard_normal((N, 2))
    f = CoherentFunction(2, 1.0, fv)
    n, s = 2, model.slice_dim
    Mr = model.step_op.reshape(n, s, n, s)
    u = model.slice_vectors(f)
    for k in range(N):
        B = Mr @ u[k]
        op = SuperOperator(np.einsum("iqa,jqb->baji", B.conj(), B).reshape(4, 4), 2, 2)
        choi = op.choi()
        assert np.linalg.eigvalsh(choi)[0] >= -1e-12


def test_cocycle_residual_zero_shift():
    model = ToyFockModel(AD, 1.0, 64)
    assert cocycle_residual(model, np.eye(2), 0, 32) == 0.0


def test_cocycle_residual_halves():
    params = random_hp_params(2, n=2, d=2, r=2)
    N = 128
    model = ToyFockModel(params, 1.0, N)
    rng = np.random.default_rng(5)
    fv = rng.standard_normal((N, 2)) + 1j * rng.standard_normal((N, 2))
    f = CoherentFunction(2, 1.0, fv)
    res = cocycle_residual(model, np.eye(2), N // 2, N // 2, f, f)
    assert res <= 1e-13


def test_cocycle_misalignment_detected():
    params = random_hp_params(2, n=2, d=2, r=2)
    N = 128
    model = ToyFockModel(params, 1.0, N)
    rng = np.random.default_rng(5)
    fv = rng.standard_normal((N, 2)) + 1j * rng.standard_normal((N, 2))
    f = CoherentFunction(2, 1.0, fv)
    res = cocycle_residual(model, np.eye(2), N // 2, N // 2, f, f, misalign=True)
    tau = 1.0 / N
    assert res > tau * 0.1


def test_cocycle_index_bounds():
    model = ToyFockModel(AD, 1.0, 64)
    with pytest.raises(IndexError):
        cocycle_residual(model, np.eye(2), 40, 40)


def test_gram_single_identity_block():
    fam = [(np.eye(2, dtype=complex)[None, None], [CoherentFunction.constant(1, 1.0, 128, 0.5)])]
    report = gram_positivity_check("transfer", AD, fam)
    assert report.min_eig >= 0.0


def test_gram_amplitude_damping_psd():
    fams = [random_gram_family(seed, 2, 1, q=3, p=2, T=1.0, steps=256)
            for seed in range(3)]
    for solver in ("transfer", "ode"):
        system = AD if solver == "transfer" else AD_GEN
        report = gram_positivity_check(solver, system, fams)
        assert report.min_eig >= -1e-6


def test_gram_transpose_witness_found():
    gen = transpose_block_generator(2)
    found = False
    for seed in range(20):
        fam = [random_gram_family(seed, 2, 1, q=3, p=2, T=1.0, steps=128)]
        report = gram_positivity_check("ode", gen, fam)
        if report.min_eig < -1e-6:
            found = True
            break
    assert found


def test_martingale_classifications():
    assert martingale_check(AD_GEN, 1.0, 32).classification == "martingale"

    from qcocycle.dilation import HPParams

    inflated = HPParams.from_K(2, 1, AD.K + 0.25 * np.eye(2), AD.K_row,
                               AD.kraus_L, AD.kraus_Lmat)
    report = martingale_check(assemble_from_hp(inflated), 1.0, 32)
    assert report.classification == "submartingale"
    # the normalization decays at rate one half
    expected = np.exp(-0.5 * report.times)
    assert np.abs(report.eigenvalues - expected[:, None]).max() < 1e-10

    positive_D = HPParams.from_hamiltonian(
        2, 1, np.zeros((2, 2)), AD.kraus_L, AD.kraus_Lmat,
        D_target=np.diag([0.3, -0.1]))
    report = martingale_check(assemble_from_hp(positive_D), 1.0, 32)
    assert report.classification == "neither"


def test_run_solver_dispatch():
    f = CoherentFunction.vacuum(1, 1.0, 128)
    X = random_observable(0, 2)
    ref = run_solver("expm", AD, X, f, f)
    for solver in ("transfer", "ode", "picard"):
        trace = run_solver(solver, AD, X, f, f)
        assert trace.error_vs(ref) < 5e-3
    with pytest.raises(ValueError):
        run_solver("transfer", AD_GEN, X, f, f)
    with pytest.raises(ValueError):
        run_solver("bogus", AD, X, f, f)
