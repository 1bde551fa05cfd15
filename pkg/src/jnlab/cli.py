"""Command-line interface.

Exit codes: 0 all declared properties hold, 2 a property was violated,
3 configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

from .lattice import Ball, Cube, GridFunction, annulus
from .polyproj import ConditioningError, moment_projection
from .spaces import NormParams, SearchConfig, jn_con_norm, rm_con_norm
from .czkernel import (
    CorrectionSpec,
    apply_cz,
    apply_modified,
    apply_truncated,
    kernel_by_name,
    kernel_transpose,
)
from .hardy import (
    CertificationError,
    MoleculeRecord,
    ParameterError,
    decompose_molecule,
    make_atom,
    validate_atom,
    validate_molecule,
)
from .lab import ConfigError, ExperimentConfig, default_config, run_experiment

EXIT_OK = 0
EXIT_PROPERTY = 2
EXIT_CONFIG = 3


def _parse_region(text: str):
    parts = text.split(":")
    kind = parts[0]
    try:
        if kind == "cube":
            center = tuple(float(v) for v in parts[1].split(","))
            return Cube(center, float(parts[2]))
        if kind == "ball":
            center = tuple(float(v) for v in parts[1].split(","))
            return Ball(center, float(parts[2]))
        if kind == "annulus":
            center = tuple(float(v) for v in parts[1].split(","))
            return annulus(center, float(parts[2]), int(parts[3]))
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"bad region spec {text!r}: {exc}") from exc
    raise ConfigError(f"unknown region kind {kind!r} (cube|ball|annulus)")


def _params_from_args(args) -> NormParams:
    p = math.inf if args.p in ("inf", "Infinity") else float(args.p)
    q = math.inf if args.q in ("inf", "Infinity") else float(args.q)
    return NormParams(p, q, args.s, args.alpha)


def _write_csv(path: Path, rows: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def cmd_norm(args) -> int:
    f = GridFunction.load(args.function)
    params = _params_from_args(args)
    search = SearchConfig(policy=args.policy)
    if args.kind == "jn":
        report = jn_con_norm(f, params, search)
    else:
        report = rm_con_norm(f, params.p, params.q, params.alpha, search)
    print(json.dumps(report.csv_row()))
    if args.out:
        _write_csv(Path(args.out) / f"{report.name}.csv", [report.csv_row()])
    return EXIT_OK


def cmd_project(args) -> int:
    f = GridFunction.load(args.function)
    region = _parse_region(args.region)
    P = moment_projection(f, region, args.s)
    text = json.dumps(P.to_dict())
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    print(text)
    return EXIT_OK


def cmd_apply_op(args) -> int:
    f = GridFunction.load(args.function)
    kernel = kernel_by_name(args.kernel, **json.loads(args.kernel_params))
    if args.mode == "truncated":
        eta = args.eta if args.eta else f.window.h
        out = apply_truncated(kernel, f, eta)
        report = {"mode": "truncated", "eta": eta}
        result = out
    elif args.mode == "cz":
        res = apply_cz(kernel, f)
        report = {"mode": "cz", "etas": res.etas, "converged": res.converged,
                  "max_increments": res.max_increments, "points": res.to_json()}
        result = res.result
    else:
        span = min(u - l for l, u in zip(f.window.lower, f.window.upper))
        corr = CorrectionSpec(tuple(f.window.center), 0.375 * span, args.s)
        res = apply_modified(kernel_transpose(kernel), corr, f)
        report = {"mode": "modified", "etas": res.etas, "converged": res.converged,
                  "max_increments": res.max_increments, "points": res.to_json()}
        result = res.canonical
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        result.save(outdir / "result.json")
        (outdir / "report.json").write_text(json.dumps(report, default=repr))
    print(json.dumps({k: v for k, v in report.items() if k != "points"}, default=repr))
    return EXIT_OK


def cmd_atom(args) -> int:
    params = _params_from_args(args)
    if args.action == "make":
        from .lattice import Window

        window = Window(1, (args.lower,), (args.upper,), (args.cells,))
        span = args.upper - args.lower
        cube = Cube(((args.lower + args.upper) / 2.0,), span / 4.0)
        record = make_atom(args.seed, cube, params, window)
        if args.out:
            record.values.save(Path(args.out))
        print(json.dumps({"norm_ratio": record.certification.norm_ratio,
                          "passed": record.certification.passed}))
        return EXIT_OK
    f = GridFunction.load(args.function)
    cube = _parse_region(args.region)
    cert = validate_atom(f, cube, params)
    print(json.dumps({"passed": cert.passed, "norm_ratio": cert.norm_ratio,
                      "failures": cert.failures}))
    return EXIT_OK if cert.passed else EXIT_PROPERTY


def cmd_molecule(args) -> int:
    params = _params_from_args(args)
    f = GridFunction.load(args.function)
    cube = _parse_region(args.region)
    cert = validate_molecule(f, cube, params, args.epsilon, args.j_max)
    if args.action == "check":
        print(json.dumps({"passed": cert.passed, "constant_needed": cert.constant_needed,
                          "failures": cert.failures}))
        return EXIT_OK if cert.passed else EXIT_PROPERTY
    mol = MoleculeRecord(cube, params, args.epsilon, f, cert)
    report = decompose_molecule(mol, args.j_max)
    payload = report.to_json()
    if args.out:
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "decomposition.json").write_text(json.dumps(payload, default=repr))
        report.tail_term.save(outdir / "tail_term.json")
    print(json.dumps({"atoms": len(report.atoms), "max_residual": max(report.residuals),
                      "coef_p_sum": report.coef_p_sum_core}))
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.config:
        config = ExperimentConfig.from_json(args.config)
    else:
        config = default_config(args.name)
    if args.seed is not None:
        config.family["seed"] = args.seed
    if args.cells is not None:
        config.window["cells"] = [args.cells] * config.window["n"]
    if args.padding is not None:
        config.padding = args.padding
    for key, flag in (("residual", args.tol_residual), ("pairing_mismatch", args.tol_pairing),
                      ("refine_factor", args.tol_refine)):
        if flag is not None:
            config.tolerances[key] = flag
    result = run_experiment(args.name, config)
    out = Path(args.out) if args.out else Path("results")
    csv_path, json_path = result.write(out)
    print(json.dumps({"experiment": result.name, "passed": result.passed,
                      "violations": result.violations, "csv": str(csv_path),
                      "json": str(json_path), "summary": result.summary}, default=repr))
    return EXIT_OK if result.passed else EXIT_PROPERTY


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jnlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_params(p):
        p.add_argument("--p", default="2")
        p.add_argument("--q", default="2")
        p.add_argument("--s", type=int, default=0)
        p.add_argument("--alpha", type=float, default=0.0)

    p_norm = sub.add_parser("norm", help="cube norm of a grid-function file")
    p_norm.add_argument("--kind", choices=["jn", "rm"], default="jn")
    p_norm.add_argument("--function", required=True)
    p_norm.add_argument("--policy", choices=["restrict", "zero-extend"], default="restrict")
    p_norm.add_argument("--out")
    add_params(p_norm)
    p_norm.set_defaults(func=cmd_norm)

    p_proj = sub.add_parser("project", help="moment projection over a region")
    p_proj.add_argument("--function", required=True)
    p_proj.add_argument("--region", required=True, help="cube:C:SIDE | ball:C:R | annulus:C:R:J")
    p_proj.add_argument("--s", type=int, default=0)
    p_proj.add_argument("--out")
    p_proj.set_defaults(func=cmd_project)

    p_op = sub.add_parser("apply-op", help="apply a singular integral operator")
    p_op.add_argument("--kernel", required=True)
    p_op.add_argument("--kernel-params", default="{}")
    p_op.add_argument("--function", required=True)
    p_op.add_argument("--mode", choices=["truncated", "cz", "modified"], default="cz")
    p_op.add_argument("--eta", type=float)
    p_op.add_argument("--s", type=int, default=0)
    p_op.add_argument("--out")
    p_op.set_defaults(func=cmd_apply_op)

    p_atom = sub.add_parser("atom", help="make or check atoms")
    p_atom.add_argument("action", choices=["make", "check"])
    p_atom.add_argument("--function")
    p_atom.add_argument("--region")
    p_atom.add_argument("--seed", type=int, default=0)
    p_atom.add_argument("--lower", type=float, default=-1.0)
    p_atom.add_argument("--upper", type=float, default=1.0)
    p_atom.add_argument("--cells", type=int, default=256)
    p_atom.add_argument("--out")
    add_params(p_atom)
    p_atom.set_defaults(func=cmd_atom)

    p_mol = sub.add_parser("molecule", help="check or decompose molecules")
    p_mol.add_argument("action", choices=["check", "decompose"])
    p_mol.add_argument("--function", required=True)
    p_mol.add_argument("--region", required=True)
    p_mol.add_argument("--epsilon", type=float, required=True)
    p_mol.add_argument("--j-max", type=int, default=3)
    p_mol.add_argument("--out")
    add_params(p_mol)
    p_mol.set_defaults(func=cmd_molecule)

    p_exp = sub.add_parser("experiment", help="run a named experiment")
    p_exp.add_argument("name")
    p_exp.add_argument("--config")
    p_exp.add_argument("--out")
    p_exp.add_argument("--seed", type=int)
    p_exp.add_argument("--cells", type=int)
    p_exp.add_argument("--padding", type=float)
    p_exp.add_argument("--tol-residual", type=float)
    p_exp.add_argument("--tol-pairing", type=float)
    p_exp.add_argument("--tol-refine", type=float)
    p_exp.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParameterError, ConditioningError, KeyError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CertificationError as exc:
        print(f"certification failure: {exc}", file=sys.stderr)
        return EXIT_PROPERTY


if __name__ == "__main__":
    sys.exit(main())
