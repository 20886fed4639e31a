import json

import numpy as np
import pytest

from qcocycle.cli import main
from qcocycle.formats import (
    FormatError,
    load_coherent,
    load_generator,
    load_hp_params,
    load_observable,
    load_trace,
    save_coherent,
    save_generator,
    save_hp_params,
    save_observable,
    save_trace,
)
from qcocycle.generator import assemble_from_hp
from qcocycle.models import (
    amplitude_damping_params,
    random_hp_params,
    transpose_block_generator,
)
from qcocycle.sim import CoherentFunction, semigroup_trace


@pytest.fixture
def ad_files(tmp_path):
    params = amplitude_damping_params()
    gen = assemble_from_hp(params)
    paths = {
        "params": tmp_path / "ad.json",
        "gen": tmp_path / "ad_gen.json",
        "obs": tmp_path / "e11.json",
        "transpose": tmp_path / "transpose.json",
    }
    save_hp_params(paths["params"], params)
    save_generator(paths["gen"], gen)
    save_observable(paths["obs"], np.diag([0.0, 1.0]).astype(complex))
    save_generator(paths["transpose"], transpose_block_generator(2))
    return paths


def test_generator_round_trip_bit_exact(tmp_path):
    params = random_hp_params(3, n=2, d=2, r=2)
    gen = assemble_from_hp(params)
    path = tmp_path / "gen.json"
    save_generator(path, gen)
    loaded = load_generator(path)
    assert np.array_equal(loaded.scalar.action, gen.scalar.action)
    for m in range(2):
        assert np.array_equal(loaded.up[m].action, gen.up[m].action)
        assert np.array_equal(loaded.down[m].action, gen.down[m].action)
        for nn in range(2):
            assert np.array_equal(loaded.matrix[m][nn].action, gen.matrix[m][nn].action)


def test_hp_params_round_trip_bit_exact(tmp_path):
    params = random_hp_params(5, n=3, d=2, r=3)
    path = tmp_path / "p.json"
    save_hp_params(path, params)
    loaded = load_hp_params(path)
    for name in ("K", "K_row", "H", "kraus_L", "kraus_Lmat"):
        assert np.array_equal(getattr(loaded, name), getattr(params, name))


def test_trace_round_trip_bit_exact(tmp_path):
    gen = assemble_from_hp(amplitude_damping_params())
    trace = semigroup_trace(gen, 1.0, 16, np.diag([0.0, 1.0]).astype(complex))
    path = tmp_path / "t.csv"
    save_trace(path, trace)
    loaded = load_trace(path)
    assert np.array_equal(loaded.times, trace.times)
    assert np.array_equal(loaded.values, trace.values)


def test_observable_and_coherent_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    save_observable(tmp_path / "x.json", X)
    assert np.array_equal(load_observable(tmp_path / "x.json"), X)
    f = CoherentFunction(2, 1.5, rng.standard_normal((8, 2)) + 1j * rng.standard_normal((8, 2)))
    save_coherent(tmp_path / "f.json", f)
    g = load_coherent(tmp_path / "f.json")
    assert g.d == 2 and g.T == 1.5 and np.array_equal(g.values, f.values)


def test_generator_requires_column_vec(tmp_path):
    params = amplitude_damping_params()
    path = tmp_path / "gen.json"
    save_generator(path, assemble_from_hp(params))
    doc = json.loads(path.read_text())
    doc["vec"] = "row"
    path.write_text(json.dumps(doc))
    with pytest.raises(FormatError):
        load_generator(path)


def test_hp_params_hermiticity_checked(tmp_path):
    params = amplitude_damping_params()
    path = tmp_path / "p.json"
    save_hp_params(path, params)
    doc = json.loads(path.read_text())
    doc["H"][0][1] = [1.0, 0.0]
    path.write_text(json.dumps(doc))
    with pytest.raises(FormatError):
        load_hp_params(path)


def test_truncated_file_raises(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"n": 2, "d": 1, "vec": "col')
    with pytest.raises(FormatError):
        load_generator(path)


def test_cli_validate_accept_reject_parse(ad_files, tmp_path, capsys):
    assert main(["validate", str(ad_files["gen"])]) == 0
    out = capsys.readouterr().out
    assert "accepted" in out and "martingale" in out

    assert main(["validate", str(ad_files["transpose"])]) == 1
    captured = capsys.readouterr()
    witness = json.loads(captured.err.strip().splitlines()[-1])
    assert witness["min_eig"] < -0.5
    assert witness["witness"]

    broken = tmp_path / "broken.json"
    broken.write_text("{")
    assert main(["validate", str(broken)]) == 2


def test_cli_dilate_assemble_round_trip(ad_files, tmp_path, capsys):
    out_params = tmp_path / "extracted.json"
    assert main(["dilate", str(ad_files["gen"]), "-o", str(out_params)]) == 0
    report = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert report["reassembly_residual"] <= 1e-9

    out_gen = tmp_path / "reassembled.json"
    assert main(["assemble", str(out_params), "-o", str(out_gen)]) == 0
    capsys.readouterr()
    gen1 = load_generator(ad_files["gen"])
    gen2 = load_generator(out_gen)
    assert gen1.block_residual(gen2) <= 1e-9


def test_cli_dilate_rejects_transpose(ad_files, tmp_path, capsys):
    assert main(["dilate", str(ad_files["transpose"]),
                 "-o", str(tmp_path / "no.json")]) == 1
    capsys.readouterr()


def test_cli_simulate_transfer_with_reference(ad_files, tmp_path, capsys):
    out = tmp_path / "trace.csv"
    code = main(["simulate", str(ad_files["params"]), "--T", "1.0",
                 "--steps", "256", "--solver", "transfer",
                 "--observable", str(ad_files["obs"]),
                 "--reference", "expm", "-o", str(out)])
    assert code == 0
    capsys.readouterr()
    header = out.read_text().splitlines()[0].split(",")
    assert header[-1] == "err_expm"
    last = out.read_text().splitlines()[-1].split(",")
    assert float(last[-1]) <= 5e-3


def test_cli_simulate_deterministic_bytes(ad_files, tmp_path, capsys):
    args = ["simulate", str(ad_files["params"]), "--T", "1.0", "--steps", "64",
            "--solver", "picard", "--observable", str(ad_files["obs"])]
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["-o", str(out1)]) == 0
    assert main(args + ["-o", str(out2)]) == 0
    capsys.readouterr()
    assert out1.read_bytes() == out2.read_bytes()


def test_cli_simulate_solver_disagreement_bounded(ad_files, tmp_path, capsys):
    f = CoherentFunction.constant(1, 1.0, 512, 1.0)
    fpath = tmp_path / "f.json"
    save_coherent(fpath, f)
    outs = {}
    for solver in ("ode", "transfer"):
        out = tmp_path / f"{solver}.csv"
        code = main(["simulate", str(ad_files["params"]), "--T", "1.0",
                     "--steps", "512", "--solver", solver,
                     "--observable", str(ad_files["obs"]),
                     "--f", str(fpath), "--h", str(fpath), "-o", str(out)])
        assert code == 0
        outs[solver] = load_trace(out)
    capsys.readouterr()
    assert outs["ode"].error_vs(outs["transfer"]) <= 5e-3


def test_cli_simulate_expm_t0(ad_files, tmp_path, capsys):
    out = tmp_path / "row.csv"
    assert main(["simulate", str(ad_files["params"]), "--T", "0",
                 "--solver", "expm", "--observable", str(ad_files["obs"]),
                 "-o", str(out)]) == 0
    capsys.readouterr()
    trace = load_trace(out)
    assert trace.values.shape == (1, 2, 2)
    assert np.array_equal(trace.values[0], np.diag([0.0, 1.0]))


def test_cli_simulate_grid_mismatch(ad_files, tmp_path, capsys):
    f = CoherentFunction.constant(1, 1.0, 128, 1.0)
    fpath = tmp_path / "f.json"
    save_coherent(fpath, f)
    code = main(["simulate", str(ad_files["params"]), "--T", "1.0",
                 "--steps", "256", "--solver", "transfer",
                 "--observable", str(ad_files["obs"]),
                 "--f", str(fpath), "-o", str(tmp_path / "x.csv")])
    assert code == 2
    capsys.readouterr()


def test_cli_check_ito_table(capsys):
    assert main(["check", "ito-table", "--d", "3"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["passed"] and report["violations"] == []

    assert main(["check", "ito-table", "--d", "2",
                 "--corrupt", "0", "1", "1", "2"]) == 1
    report = json.loads(capsys.readouterr().out)
    assert report["violations"] == [["-", "1", "1", "2"]]


def test_cli_check_martingale(ad_files, capsys):
    assert main(["check", "martingale", str(ad_files["gen"]),
                 "--T", "1.0", "--steps", "32"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["classification"] == "martingale"


def test_cli_check_gram(ad_files, capsys):
    assert main(["check", "gram", "--params", str(ad_files["params"]),
                 "--solver", "transfer", "--T", "1.0", "--steps", "128",
                 "--seed", "0"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["min_eig"] >= -1e-6

    assert main(["check", "gram"]) == 2
    capsys.readouterr()


def test_cli_check_cocycle_and_fault(ad_files, capsys):
    assert main(["check", "cocycle", str(ad_files["params"]),
                 "--steps", "128", "--seed", "0"]) == 0
    capsys.readouterr()
    assert main(["check", "cocycle", str(ad_files["params"]),
                 "--steps", "128", "--seed", "0", "--misalign"]) == 1
    report = json.loads(capsys.readouterr().out)
    assert report["misaligned"] and not report["passed"]
