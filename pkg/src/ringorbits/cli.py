"""Command-line front end.

Subcommands: lambda, bifurcate, shoot, trace, resonance, orbit, verify.
System parameters come from --n/--m/--M/--r0 or from a JSON --config file
(flags override the file).  Machine-readable outputs carry full float
precision via repr; console summaries use 6 significant digits.

Exit codes: 0 success, 2 bad configuration or arguments, 3 numerical
failure (no convergence, singular flow), 4 requested object not found.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import continuation as cont
from .bifurcate import bifurcation_point
from .integrate import FlowError, IntegratorConfig, eval_at
from .model import SingularityError, SystemParams, lambda_n
from .orbits import (
    ResonanceNotFound,
    ResonanceTarget,
    closure_order,
    export,
    find_resonance,
    reconstruct,
    trajectory_filename,
)
from .shoot import ConvergenceError, SeedPoint, SymmetryKind, newton_correct

OUT_ENV = "RINGORBITS_OUT"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_NOT_FOUND = 4


class ConfigError(Exception):
    pass


def _g(x: float) -> str:
    return f"{x:.6g}"


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return data


def _params_from(args) -> SystemParams:
    merged: dict = {}
    if args.config:
        merged.update(_load_config_file(args.config))
    for key in ("n", "m", "M", "r0"):
        v = getattr(args, key, None)
        if v is not None:
            merged[key] = v
    try:
        return SystemParams.from_dict(merged)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad system parameters: {exc}")


def _integrator_from(args) -> IntegratorConfig:
    kw = {}
    if args.config:
        data = _load_config_file(args.config)
        for key in ("rel_tol", "abs_tol"):
            if key in data:
                kw[key] = float(data[key])
    if getattr(args, "rel_tol", None) is not None:
        kw["rel_tol"] = args.rel_tol
    if getattr(args, "abs_tol", None) is not None:
        kw["abs_tol"] = args.abs_tol
    try:
        return IntegratorConfig(**kw)
    except ValueError as exc:
        raise ConfigError(f"bad integrator settings: {exc}")


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(OUT_ENV) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(obj, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with n, m, M, r0 (flags override)")
    p.add_argument("--n", type=int, help="number of ring bodies")
    p.add_argument("--m", type=float, help="mass of each ring body")
    p.add_argument("--M", type=float, help="mass of the axial body")
    p.add_argument("--r0", type=float, help="radius of the circular seed solution")
    p.add_argument("--rel-tol", type=float, dest="rel_tol", help="integrator relative tolerance")
    p.add_argument("--abs-tol", type=float, dest="abs_tol", help="integrator absolute tolerance")
    p.add_argument("--out", help=f"output directory (default: ${OUT_ENV} or cwd)")


def _add_seed_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--a", type=float, required=True, help="angular parameter")
    p.add_argument("--b", type=float, required=True, help="initial axial velocity")
    p.add_argument("--T", type=float, required=True, help="quarter/half period T")
    p.add_argument("--kind", default="odd", help="symmetry kind: odd or odd_even")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ringorbits", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lambda", help="print the ring constant lambda_n")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("bifurcate", help="closed-form family seeds on the circular solution")
    _add_param_flags(p)
    p.add_argument("--kind", default="odd", help="odd or odd_even")
    p.add_argument("--json-out", help="also write the report as JSON to this file")

    p = sub.add_parser("shoot", help="Newton-correct a seed point at fixed b")
    _add_param_flags(p)
    _add_seed_flags(p)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=25)
    p.add_argument("--json-out", help="write the corrected point as JSON to this file")

    p = sub.add_parser("trace", help="continue a family by pseudo-arclength")
    _add_param_flags(p)
    p.add_argument("--seed-file", help="JSON seed point (as written by shoot)")
    p.add_argument("--seed-b", type=float, help="auto-seed: correct (a0, b, T*) at this b")
    p.add_argument("--kind", default="odd", help="odd or odd_even (auto-seed only)")
    p.add_argument("--direction", choices=["+", "-"], default="+")
    p.add_argument("--max-points", type=int, default=20000)
    p.add_argument("--ds-max", type=float, help="max arclength step")
    p.add_argument("--ds-min", type=float, default=1e-8)
    p.add_argument("--b-tol", type=float, default=1e-3, help="stop threshold near b = 0")
    p.add_argument("--prefix", default="branch", help="output file prefix")

    p = sub.add_parser("resonance", help="pick a rational-phase point off a traced branch")
    _add_param_flags(p)
    p.add_argument("--branch", required=True, help="branch JSON written by trace")
    p.add_argument("--n1", type=int, required=True)
    p.add_argument("--n2", type=int, required=True)
    p.add_argument("--samples", type=int, default=512, help="samples per reduced period")
    p.add_argument("--strict-closure", action="store_true",
                   help="reconstruct over the strict closure order instead of the relabeling order")

    p = sub.add_parser("orbit", help="reconstruct and export a full-space orbit")
    _add_param_flags(p)
    _add_seed_flags(p)
    p.add_argument("--periods", type=int, default=1)
    p.add_argument("--samples", type=int, default=512, help="samples per reduced period")
    p.add_argument("--prefix", default="orbit", help="output file prefix")

    p = sub.add_parser("verify", help="check residuals and conservation for a point")
    _add_param_flags(p)
    _add_seed_flags(p)
    p.add_argument("--res-tol", type=float, default=1e-3, help="residual acceptance threshold")

    return ap


def _cmd_lambda(args) -> int:
    try:
        value = lambda_n(args.n)
    except ValueError as exc:
        raise ConfigError(str(exc))
    if args.json:
        print(json.dumps({"n": args.n, "lambda": value}))
    else:
        print(f"lambda_{args.n} = {value!r}")
    return EXIT_OK


def _cmd_bifurcate(args) -> int:
    params = _params_from(args)
    kind = SymmetryKind.parse(args.kind)
    rep = bifurcation_point(params, kind)
    print(f"kind          {rep.kind.value}")
    print(f"a0            {_g(rep.a0)}  (= sqrt((lambda_n*m + M)/r0))")
    print(f"T*            {_g(rep.T_star)}  (= {rep.T_exact})")
    print(f"s             {_g(rep.s)}  (radial/axial frequency ratio)")
    print(f"nondegenerate {rep.nondegenerate}  margin {_g(rep.margin)}")
    print(f"theta(T*)     {_g(rep.theta0)}")
    if rep.xi2 is not None:
        print(f"xi'(0)        0  (parity)")
        print(f"xi''(0)       {_g(rep.xi2)}")
    if args.json_out:
        payload = {
            "kind": rep.kind.value,
            "a0": rep.a0,
            "b": rep.b,
            "T_star": rep.T_star,
            "T_exact": rep.T_exact,
            "s": rep.s,
            "nondegenerate": rep.nondegenerate,
            "margin": rep.margin,
            "theta0": rep.theta0,
            "xi2": rep.xi2,
            "params": params.to_dict(),
        }
        _write_json(payload, _out_dir(args) / args.json_out)
    return EXIT_OK


def _seed_from_args(args) -> SeedPoint:
    try:
        return SeedPoint(a=args.a, b=args.b, T=args.T, kind=SymmetryKind.parse(args.kind))
    except ValueError as exc:
        raise ConfigError(str(exc))


def _cmd_shoot(args) -> int:
    params = _params_from(args)
    config = _integrator_from(args)
    guess = _seed_from_args(args)
    point = newton_correct(guess, params, config, tol=args.tol, max_iter=args.max_iter)
    print(f"corrected  a={_g(point.a)} b={_g(point.b)} T={_g(point.T)}")
    print(f"residual   {_g(point.residual)}")
    print(f"theta(T)   {_g(point.theta)}")
    if args.json_out:
        path = _out_dir(args) / args.json_out
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(point.to_json())
        print(f"wrote {path}")
    else:
        print(point.to_json(), end="")
    return EXIT_OK


def _cmd_trace(args) -> int:
    params = _params_from(args)
    config = _integrator_from(args)
    if (args.seed_file is None) == (args.seed_b is None):
        raise ConfigError("trace needs exactly one of --seed-file or --seed-b")
    if args.seed_file:
        try:
            with open(args.seed_file, "r", encoding="utf-8") as fh:
                start = SeedPoint.from_json(fh.read())
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read seed file {args.seed_file}: {exc}")
    else:
        kind = SymmetryKind.parse(args.kind)
        rep = bifurcation_point(params, kind)
        guess = SeedPoint(a=rep.a0, b=args.seed_b, T=rep.T_star, kind=kind)
        start = newton_correct(guess, params, config)
    step = cont.StepControl(ds_max=args.ds_max, ds_min=args.ds_min)
    stop = cont.StopRules(max_points=args.max_points, b_tol=args.b_tol)
    direction = 1 if args.direction == "+" else -1
    branch = cont.continue_branch(start, direction, params, config, step=step, stop=stop)
    report = cont.classify_endpoint(branch)
    out = _out_dir(args)
    csv_path = out / f"{args.prefix}.csv"
    json_path = out / f"{args.prefix}.json"
    cont.branch_to_csv(branch, csv_path)
    cont.branch_to_json(branch, json_path)
    end = report.endpoint
    print(f"points     {len(branch.points)}")
    print(f"end        a={_g(end.a)} b={_g(end.b)} T={_g(end.T)} theta={_g(end.theta)}")
    print(f"endpoint   {report.label}")
    if report.label == "trivial-limit":
        print(f"           (a, T) off the seed by ({_g(report.detail['delta_a'])}, {_g(report.detail['delta_T'])})")
    print(f"wrote {csv_path}")
    print(f"wrote {json_path}")
    return EXIT_OK


def _cmd_resonance(args) -> int:
    params = _params_from(args)
    config = _integrator_from(args)
    try:
        target = ResonanceTarget(args.n1, args.n2)
    except ValueError as exc:
        raise ConfigError(str(exc))
    try:
        branch = cont.branch_from_json(args.branch)
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read branch file {args.branch}: {exc}")
    point = find_resonance(branch, target, config)
    k_strict, k_relabel = closure_order(target, params.n)
    periods = k_strict if args.strict_closure else k_relabel
    traj = reconstruct(point, params, periods=periods, samples_per_period=args.samples, config=config)
    out = _out_dir(args)
    csv_name = trajectory_filename(point, target, "csv")
    json_name = trajectory_filename(point, target, "json")
    seed_name = trajectory_filename(point, target, "seed.json")
    export(traj, "csv", out / csv_name)
    export(traj, "json", out / json_name)
    with open(out / seed_name, "w", encoding="utf-8") as fh:
        fh.write(point.to_json())
    print(f"theta      {_g(point.theta)}  (target {args.n1}*pi/{args.n2} = {_g(target.angle)})")
    print(f"point      a={_g(point.a)} b={_g(point.b)} T={_g(point.T)}")
    print(f"closure    strict {k_strict} periods, relabeling {k_relabel} periods")
    print(f"periods    {periods} reduced periods reconstructed")
    for key, val in traj.diagnostics.items():
        print(f"{key:22s} {_g(val)}")
    print(f"wrote {out / csv_name}")
    print(f"wrote {out / json_name}")
    print(f"wrote {out / seed_name}")
    return EXIT_OK


def _cmd_orbit(args) -> int:
    params = _params_from(args)
    config = _integrator_from(args)
    point = _seed_from_args(args)
    traj = reconstruct(point, params, periods=args.periods, samples_per_period=args.samples, config=config)
    out = _out_dir(args)
    csv_path = out / f"{args.prefix}.csv"
    json_path = out / f"{args.prefix}.json"
    export(traj, "csv", csv_path)
    export(traj, "json", json_path)
    for key, val in traj.diagnostics.items():
        print(f"{key:22s} {_g(val)}")
    print(f"wrote {csv_path}")
    print(f"wrote {json_path}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    params = _params_from(args)
    config = _integrator_from(args)
    point = _seed_from_args(args)
    e = eval_at(point.a, point.b, point.T, params, config)
    r1 = e.F if point.kind is SymmetryKind.ODD else e.Ft
    r2 = e.Rt
    traj = reconstruct(point, params, periods=1, samples_per_period=256, config=config)
    d = traj.diagnostics
    checks = [
        ("residual_1", abs(r1), args.res_tol),
        ("residual_2", abs(r2), args.res_tol),
        ("energy_drift", d["energy_drift"], 1e-9),
        ("momentum_max", d["momentum_max"], 1e-9),
        ("com_max", d["com_max"], 1e-9),
        ("lz_drift", d["lz_drift"], 1e-9),
    ]
    ok = True
    for name, value, bound in checks:
        good = value <= bound
        ok = ok and good
        print(f"{name:14s} {_g(value):>12s}  (<= {_g(bound)})  {'pass' if good else 'FAIL'}")
    print(f"theta(T)      {_g(e.Theta)}")
    print("verdict       " + ("pass" if ok else "FAIL"))
    return EXIT_OK if ok else EXIT_NUMERIC


_COMMANDS = {
    "lambda": _cmd_lambda,
    "bifurcate": _cmd_bifurcate,
    "shoot": _cmd_shoot,
    "trace": _cmd_trace,
    "resonance": _cmd_resonance,
    "orbit": _cmd_orbit,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResonanceNotFound as exc:
        print(f"not found: {exc}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except (ConvergenceError, FlowError, SingularityError, cont.SingularPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
