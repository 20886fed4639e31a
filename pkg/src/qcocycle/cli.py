"""Command line interface.

Subcommands: validate, assemble, dilate, simulate, check.  Exit codes:
0 pass/accepted, 1 rejected/failed, 2 parse or grid error, 3 residual
failure, 4 non-contracting iteration.  All randomness is controlled by
explicit --seed flags (default 0).
"""

import argparse
import json
import sys

import numpy as np

from . import models
from .dilation import NotCompletelyPositive, ResidualTooLarge, extract_hp_params
from .formats import (
    FormatError,
    load_coherent,
    load_generator,
    load_hp_params,
    load_observable,
    save_generator,
    save_hp_params,
    save_trace,
)
from .generator import assemble_from_hp, check_conditionally_cp
from .ito import verify_ito_table
from .linalg import max_abs
from .sim import (
    CoherentFunction,
    GridMismatch,
    MatrixElementTrace,
    ToyFockModel,
    cocycle_residual,
    coherent_form_ode,
    gram_positivity_check,
    martingale_check,
    picard_solve,
    semigroup_trace,
    simulate_transfer,
)

EXIT_OK = 0
EXIT_REJECTED = 1
EXIT_PARSE = 2
EXIT_RESIDUAL = 3
EXIT_NON_CONTRACTION = 4


def _encode_complex_matrix(M):
    M = np.asarray(M, dtype=complex)
    return np.stack([M.real, M.imag], axis=-1).tolist()


def _emit(obj):
    print(json.dumps(obj))


def cmd_validate(args) -> int:
    try:
        gen = load_generator(args.path)
    except FormatError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    sym = gen.flat_symmetry_residual()
    print(f"flat_symmetry_residual: {sym:.3e}")
    if sym > 1e-8:
        print("verdict: rejected (adjoint symmetry violated)")
        return EXIT_REJECTED
    verdict = check_conditionally_cp(gen, tol=args.tol)
    print(f"dissipator_min_eig: {verdict.min_eig:.6e}")
    print(f"verdict: {'accepted' if verdict.accepted else 'rejected'}")
    print(f"normalization: {gen.normalization_class()}")
    if verdict.accepted:
        return EXIT_OK
    witness = [
        {"unit": [int(np.argmax(np.abs(unit)) // gen.n),
                  int(np.argmax(np.abs(unit)) % gen.n)],
         "components": _encode_complex_matrix(comp)}
        for unit, comp in verdict.witness
    ]
    json.dump({"min_eig": verdict.min_eig, "witness": witness}, sys.stderr)
    sys.stderr.write("\n")
    return EXIT_REJECTED


def cmd_assemble(args) -> int:
    try:
        params = load_hp_params(args.path)
    except FormatError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    gen = assemble_from_hp(params)
    save_generator(args.output, gen)
    _emit({"n": gen.n, "d": gen.d,
           "flat_symmetry_residual": gen.flat_symmetry_residual(),
           "normalization": gen.normalization_class()})
    return EXIT_OK


def cmd_dilate(args) -> int:
    try:
        gen = load_generator(args.path)
    except FormatError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    verdict = check_conditionally_cp(gen)
    if not verdict.accepted:
        print(f"rejected: dissipator min eigenvalue {verdict.min_eig:.6e}",
              file=sys.stderr)
        return EXIT_REJECTED
    try:
        params, residual = extract_hp_params(gen, tol=args.tol)
    except NotCompletelyPositive as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    except ResidualTooLarge as exc:
        print(f"residual failure: {exc}", file=sys.stderr)
        return EXIT_RESIDUAL
    save_hp_params(args.output, params)
    _emit({"r": params.r, "reassembly_residual": residual,
           "min_eig": verdict.min_eig})
    return EXIT_OK


def _load_simulation_inputs(args):
    params = load_hp_params(args.params)
    X = load_observable(args.observable)
    if X.shape != (params.n, params.n):
        raise FormatError("observable dimension does not match the parameters")
    d = params.d
    if args.T > 0:
        f = load_coherent(args.f) if args.f else CoherentFunction.vacuum(d, args.T, args.steps)
        h = load_coherent(args.h) if args.h else CoherentFunction.vacuum(d, args.T, args.steps)
        for fn in (f, h):
            if fn.steps != args.steps or abs(fn.T - args.T) > 1e-12 * max(1.0, args.T):
                raise GridMismatch("coherent file grid does not match --T/--steps")
            if fn.d != d:
                raise GridMismatch("coherent file noise dimension mismatch")
    else:
        f = h = None
    return params, X, f, h


def cmd_simulate(args) -> int:
    try:
        params, X, f, h = _load_simulation_inputs(args)
    except (FormatError, GridMismatch) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    gen = assemble_from_hp(params)
    if args.T == 0:
        if args.solver != "expm":
            print("error: T = 0 requires solver=expm", file=sys.stderr)
            return EXIT_PARSE
        trace = MatrixElementTrace(np.zeros(1), X[None])
        save_trace(args.output, trace)
        return EXIT_OK

    code = EXIT_OK
    if args.solver == "expm":
        trace = semigroup_trace(gen, args.T, args.steps, X)
    elif args.solver == "ode":
        trace = coherent_form_ode(gen, X, f, h)
    elif args.solver == "transfer":
        model = ToyFockModel(params, args.T, args.steps)
        try:
            trace = simulate_transfer(model, X, f, h)
        except GridMismatch as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_PARSE
    else:
        trace, report = picard_solve(params, X, f, h, iters=args.iters)
        if report.non_contraction:
            print("warning: picard iteration is not contracting "
                  "(horizon too long for this step count)", file=sys.stderr)
            code = EXIT_NON_CONTRACTION

    extra = None
    if args.reference == "expm":
        ref = semigroup_trace(gen, args.T, args.steps, X)
        err = np.array([max_abs(trace.values[k] - ref.values[k])
                        for k in range(len(trace.times))])
        extra = {"err_expm": err}
    save_trace(args.output, trace, extra_columns=extra)
    return code


def cmd_check(args) -> int:
    if args.subject == "ito-table":
        corrupt = tuple(args.corrupt) if args.corrupt else None
        report = verify_ito_table(args.d, corrupt=corrupt)
        _emit({"subject": "ito-table", "d": args.d, "cases": report.cases_checked,
               "violations": list(report.violations), "passed": report.passed})
        return EXIT_OK if report.passed else EXIT_REJECTED

    if args.subject == "martingale":
        try:
            gen = load_generator(args.path)
        except FormatError as exc:
            print(f"parse error: {exc}", file=sys.stderr)
            return EXIT_PARSE
        report = martingale_check(gen, args.T, args.steps)
        _emit({"subject": "martingale", "classification": report.classification,
               "passed": report.passed})
        return EXIT_OK if report.passed else EXIT_REJECTED

    if args.subject == "gram":
        try:
            if args.generator:
                system = load_generator(args.generator)
                n, d = system.n, system.d
            else:
                system = load_hp_params(args.params)
                n, d = system.n, system.d
        except FormatError as exc:
            print(f"parse error: {exc}", file=sys.stderr)
            return EXIT_PARSE
        families = [
            models.random_gram_family(args.seed + i, n, d, q=args.blocks,
                                      p=args.pairs, T=args.T, steps=args.steps)
            for i in range(args.families)
        ]
        report = gram_positivity_check(args.solver, system, families, seed=args.seed)
        passed = report.min_eig >= -args.tol
        _emit({"subject": "gram", "solver": args.solver, "min_eig": report.min_eig,
               "per_family": list(report.per_family), "passed": passed})
        return EXIT_OK if passed else EXIT_REJECTED

    # cocycle
    try:
        params = load_hp_params(args.params)
    except FormatError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    model = ToyFockModel(params, args.T, args.steps)
    rng = np.random.default_rng(args.seed)
    vals = rng.standard_normal((args.steps, params.d)) \
        + 1j * rng.standard_normal((args.steps, params.d))
    f = CoherentFunction(params.d, args.T, vals)
    s_steps = args.s_steps if args.s_steps is not None else args.steps // 2
    r_steps = args.steps - s_steps
    X = np.eye(params.n)
    residual = cocycle_residual(model, X, s_steps, r_steps, f, f,
                                misalign=args.misalign)
    passed = residual <= args.tol
    _emit({"subject": "cocycle", "residual": residual, "s_steps": s_steps,
           "r_steps": r_steps, "misaligned": args.misalign, "passed": passed})
    return EXIT_OK if passed else EXIT_REJECTED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcocycle",
        description="Validate, dilate and simulate CP quantum stochastic cocycles.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a generator file for conditional CP")
    p.add_argument("path")
    p.add_argument("--tol", type=float, default=1e-9,
                   help="relative PSD tolerance for the dissipator (default 1e-9)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("assemble", help="build a generator file from parameters")
    p.add_argument("path")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("dilate", help="extract flow parameters from a generator")
    p.add_argument("path")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--tol", type=float, default=1e-8,
                   help="reassembly residual tolerance (default 1e-8)")
    p.set_defaults(func=cmd_dilate)

    p = sub.add_parser("simulate", help="integrate coherent matrix elements")
    p.add_argument("params")
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--steps", type=int, default=256)
    p.add_argument("--solver", choices=["transfer", "ode", "picard", "expm"],
                   default="transfer")
    p.add_argument("--observable", required=True)
    p.add_argument("--f", help="bra-side coherent function file (default vacuum)")
    p.add_argument("--h", help="ket-side coherent function file (default vacuum)")
    p.add_argument("--iters", type=int, default=25, help="picard iterations")
    p.add_argument("--reference", choices=["expm"],
                   help="append an error column against the vacuum semigroup")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="run a named consistency check")
    subj = p.add_subparsers(dest="subject", required=True)

    q = subj.add_parser("ito-table")
    q.add_argument("--d", type=int, default=1)
    q.add_argument("--corrupt", type=int, nargs=4, metavar=("MU", "BETA", "GAMMA", "NU"),
                   help="fault-injection hook: flip the product rule at one quadruple")
    q.set_defaults(func=cmd_check)

    q = subj.add_parser("martingale")
    q.add_argument("path")
    q.add_argument("--T", type=float, default=1.0)
    q.add_argument("--steps", type=int, default=32)
    q.set_defaults(func=cmd_check)

    q = subj.add_parser("gram")
    q.add_argument("--params", help="parameter file (transfer/picard solvers)")
    q.add_argument("--generator", help="generator file (ode solver)")
    q.add_argument("--solver", choices=["transfer", "ode", "picard"],
                   default="transfer")
    q.add_argument("--T", type=float, default=1.0)
    q.add_argument("--steps", type=int, default=256)
    q.add_argument("--blocks", type=int, default=3)
    q.add_argument("--pairs", type=int, default=2)
    q.add_argument("--families", type=int, default=1)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--tol", type=float, default=1e-6)
    q.set_defaults(func=cmd_check)

    q = subj.add_parser("cocycle")
    q.add_argument("params")
    q.add_argument("--T", type=float, default=1.0)
    q.add_argument("--steps", type=int, default=128)
    q.add_argument("--s-steps", dest="s_steps", type=int, default=None)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--tol", type=float, default=1e-13)
    q.add_argument("--misalign", action="store_true",
                   help="fault-injection hook: offset the shifted slices by one")
    q.set_defaults(func=cmd_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "check" and args.subject == "gram":
        if bool(args.params) == bool(args.generator):
            print("error: provide exactly one of --params / --generator",
                  file=sys.stderr)
            return EXIT_PARSE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
