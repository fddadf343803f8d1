"""Command line front end.

Three subcommands share one set of flags::

    artifact compute   --weight W --nmax N
    artifact transform --weight W --nmax N (--shift JSON | --schlesinger JSON)
    artifact verify    --weight W --suite NAME [--seed S]

``--weight``, ``--shift``, ``--schlesinger`` and ``--tol-map`` take either a
path to a JSON file or the JSON text itself.  Reports go to ``--out`` (or
standard output) as JSON, or as CSV with one row per table entry or check.
Errors are written to standard error as a JSON object.

Exit codes: 0 success, 2 invalid input, 3 numerical breakdown (existence
or degeneracy), 4 transformed system disagrees with the rebuilt one,
5 some verification check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import bops, cgu, suites
from . import schlesinger as sch
from .errors import InputError, NumericalError
from .semiclassical import SemiClassicalData
from .weight import fourier_coefficients, modify_weight, spec_from_json

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_ORACLE = 4
EXIT_RESIDUAL = 5

FD_STEP_RANGE = (1e-8, 1e-3)
DEFAULT_TRANSFORM_TOL = 1e-8
DEFAULT_QUAD_TOL = 1e-14


class _Failure(Exception):
    def __init__(self, code: int, payload: dict):
        super().__init__(payload.get("message", ""))
        self.code, self.payload = code, payload


def _json_arg(text: str, what: str):
    """Parse inline JSON or the contents of a file."""
    if os.path.isfile(text):
        with open(text, encoding="utf-8") as fh:
            text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed {what} JSON: {exc}") from None


def _load_weight(text: str):
    if os.path.isfile(text):
        with open(text, encoding="utf-8") as fh:
            text = fh.read()
    return spec_from_json(text)


def _cpair(x) -> list:
    x = complex(x)
    return [float(x.real), float(x.imag)]


def _validate(args) -> None:
    if args.nmax is not None and args.nmax < 1:
        raise InputError("--nmax must be at least 1")
    if args.tol is not None and not args.tol > 0:
        raise InputError("--tol must be positive")
    lo, hi = FD_STEP_RANGE
    if not lo < args.fd_step < hi:
        raise InputError(f"--fd-step must lie in ({lo:g}, {hi:g})")
    if args.quad_max < 16:
        raise InputError("--quad-max must be at least 16")


# -- compute


def _summary(system) -> list[dict]:
    return [
        {"n": n, "I": _cpair(system.I[n]), "kappa": _cpair(system.kappa[n]),
         "r": _cpair(system.r[n]), "rbar": _cpair(system.rbar[n])}
        for n in range(system.n_max + 1)
    ]


def cmd_compute(args) -> tuple[int, dict, list[dict]]:
    spec = _load_weight(args.weight)
    n_max = args.nmax or 8
    table = fourier_coefficients(spec, tol=args.tol or DEFAULT_QUAD_TOL, n_max=args.quad_max)
    system = bops.build_system(table, n_max)
    rows = _summary(system)
    report = {"command": "compute", "n_max": n_max, "summary": rows, "system": bops.system_to_records(system)}
    return EXIT_OK, report, rows


# -- transform


def _rebuild(spec, n_max: int, quad_max: int):
    return bops.build_system(fourier_coefficients(spec, tol=DEFAULT_QUAD_TOL, n_max=quad_max), n_max)


def _schlesinger_pairs(request, M: int) -> list[tuple]:
    sch.ExponentShift.from_request(request, M)
    items = request if isinstance(request, list) else [request]
    pairs = [(int(it["j"]), int(it["direction"])) for it in items]
    if any(j == 0 for j, _ in pairs):
        raise InputError("the origin exponent is a monomial factor; request j in 1..M")
    return pairs


def cmd_transform(args) -> tuple[int, dict, list[dict]]:
    if (args.shift is None) == (args.schlesinger is None):
        raise InputError("transform needs exactly one of --shift and --schlesinger")
    spec = _load_weight(args.weight)
    n_max = args.nmax or 8
    tol = args.tol or DEFAULT_TRANSFORM_TOL
    report: dict = {"command": "transform", "n_max": n_max, "tol": tol}
    if args.shift is not None:
        shift = cgu.CguShift.from_dict(_json_arg(args.shift, "shift"))
        K, Ks, L, Ls = shift.counts
        base = _rebuild(spec, n_max + K + Ks, args.quad_max)
        T = cgu.transform_system(base, shift, n_max)
        target = modify_weight(spec, shift.alphas, shift.alpha_stars, shift.betas, shift.beta_stars)
        report["shift"] = shift.to_dict()
        coeff_diff = None
    else:
        data = SemiClassicalData.from_spec(spec)
        pairs = _schlesinger_pairs(_json_arg(args.schlesinger, "schlesinger"), data.M)
        total = sch.ExponentShift.from_request([{"j": j, "direction": d} for j, d in pairs], data.M)
        if any(abs(s) > 1 for s in total.shifts):
            raise InputError("each exponent may move by at most one step per request")
        # distinct singular points combine into one rational modification
        zs = data.zs
        shift = cgu.CguShift(
            alphas=[zs[j] for j, s in enumerate(total.shifts) if s == 1],
            betas=[zs[j] for j, s in enumerate(total.shifts) if s == -1],
        )
        base = _rebuild(spec, n_max + shift.counts[0], args.quad_max)
        T = cgu.transform_system(base, shift, n_max)
        target = sch.shifted_spec(spec, data, total.shifts)
        report["schlesinger"] = total.to_dict()
        coeff_diff = pairs if len(pairs) == 1 else None
    O = _rebuild(target, n_max, args.quad_max)
    diff = suites.compare_systems(T, O, n_max)
    if coeff_diff:
        # closed-form coefficients of a single exponent shift
        (j, d), worst = coeff_diff[0], 0.0
        for n in range(n_max + 1):
            c = sch.shifted_coeffs(base, data, j, d, n, forms=False)
            worst = max(
                worst,
                abs(c.kappa_sq - O.kappa[n] ** 2) / max(1, abs(O.kappa[n] ** 2)),
                abs(c.r - O.r[n]) / max(1, abs(O.r[n])),
                abs(c.rbar - O.rbar[n]) / max(1, abs(O.rbar[n])),
            )
        diff["closed_form"] = float(worst)
    report.update(
        formula=bops.system_to_records(T),
        rebuilt=bops.system_to_records(O),
        diff=diff,
        max_diff=max(diff.values()),
    )
    report["pass"] = bool(report["max_diff"] < tol)
    rows = [{"column": k, "max_diff": v, "tol": tol, "pass": v < tol} for k, v in sorted(diff.items())]
    if not report["pass"]:
        worst = max(diff, key=diff.get)
        raise _Failure(EXIT_ORACLE, {
            "error": "OracleMismatch", "exit": EXIT_ORACLE, "report": report, "rows": rows,
            "message": f"column {worst} differs by {diff[worst]:.3e} >= {tol:g}",
        })
    return EXIT_OK, report, rows


# -- verify


def cmd_verify(args) -> tuple[int, dict, list[dict]]:
    spec = _load_weight(args.weight)
    tol_map = None
    if args.tol_map is not None:
        tol_map = _json_arg(args.tol_map, "tol-map")
        if not isinstance(tol_map, dict) or not all(isinstance(v, (int, float)) and v > 0 for v in tol_map.values()):
            raise InputError("--tol-map must map tags to positive numbers")
        unknown = set(tol_map) - set(suites.TOLERANCES)
        if unknown:
            raise InputError(f"unknown tolerance tags {sorted(unknown)}")
    shift = None
    if args.shift is not None:
        shift = cgu.CguShift.from_dict(_json_arg(args.shift, "shift"))
    ctx = suites.Context(
        spec, n_max=args.nmax or 8, seed=args.seed, fd_step=args.fd_step,
        quad_max=args.quad_max, shift=shift, tol_map=tol_map,
    )
    if args.suite in suites.NEEDS_SINGULARITIES and not ctx.semiclassical:
        raise InputError(f"suite {args.suite!r} needs a factorised weight with a singular point besides the origin")
    if args.schlesinger is not None:
        if not ctx.semiclassical:
            raise InputError("--schlesinger needs a factorised weight with singular points")
        pairs = _schlesinger_pairs(_json_arg(args.schlesinger, "schlesinger"), ctx.data.M)
        checks = suites.schlesinger_suite(ctx, pairs) if args.suite == "schlesinger" else None
    else:
        checks = None
    if checks is None:
        checks = suites.run(ctx, args.suite)
    checks = sorted(checks, key=lambda c: c.id)
    failed = [c for c in checks if not c.passed]
    rows = [c.to_dict() for c in checks]
    report = {
        "command": "verify",
        "suite": args.suite,
        "seed": args.seed,
        "n_max": ctx.n_max,
        "fd_step": ctx.fd_step,
        "checks": rows,
        "total": len(checks),
        "failed": len(failed),
        "pass": not failed,
    }
    if failed:
        first = failed[0]
        raise _Failure(EXIT_RESIDUAL, {
            "error": "ResidualFailure", "exit": EXIT_RESIDUAL, "report": report, "rows": rows,
            "check": first.to_dict(),
            "message": f"check {first.id} [{first.tag}] = {first.value:.3e} exceeds {first.tol:g}",
        })
    return EXIT_OK, report, rows


# -- output


def _flatten(row: dict) -> dict:
    out = {}
    for k, v in row.items():
        if isinstance(v, list) and len(v) == 2 and all(isinstance(x, float) for x in v):
            out[f"{k}_re"], out[f"{k}_im"] = v
        else:
            out[k] = v
    return out


def render(report: dict, rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, sort_keys=True, indent=2) + "\n"
    flat = [_flatten(r) for r in rows]
    buf = io.StringIO()
    if flat:
        w = csv.DictWriter(buf, fieldnames=list(flat[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(flat)
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _error(code: int, exc: BaseException) -> dict:
    return {"error": type(exc).__name__, "exit": code, "message": str(exc)}


COMMANDS = {"compute": cmd_compute, "transform": cmd_transform, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--weight", required=True, help="weight JSON file or inline JSON")
    common.add_argument("--nmax", type=int, default=None, help="highest degree (default 8)")
    common.add_argument("--tol", type=float, default=None,
                        help="compute: quadrature tolerance; transform: pass threshold")
    common.add_argument("--suite", default="all", choices=sorted([*suites.RUNNERS, "all"]))
    common.add_argument("--shift", default=None, help="rational modification as JSON")
    common.add_argument("--schlesinger", default=None, help='exponent shift, e.g. {"j": 2, "direction": 1}')
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="output file (default: standard output)")
    common.add_argument("--format", default="json", choices=("json", "csv"))
    common.add_argument("--fd-step", type=float, default=1e-5)
    common.add_argument("--quad-max", type=int, default=2**16)
    common.add_argument("--tol-map", default=None, help="per-tag tolerance overrides as JSON")
    parser = argparse.ArgumentParser(prog="artifact", description="Bi-orthogonal polynomials on the unit circle.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("compute", parents=[common], help="build the system and print a summary table")
    sub.add_parser("transform", parents=[common], help="compare a transformed system with a rebuilt one")
    sub.add_parser("verify", parents=[common], help="run residual checks")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _validate(args)
        with np.errstate(all="ignore"):
            code, report, rows = COMMANDS[args.command](args)
    except _Failure as f:
        payload = dict(f.payload)
        _emit(render(payload.pop("report"), payload.pop("rows"), args.format), args.out)
        sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
        return f.code
    except InputError as exc:
        sys.stderr.write(json.dumps(_error(EXIT_INPUT, exc), sort_keys=True) + "\n")
        return EXIT_INPUT
    except NumericalError as exc:
        sys.stderr.write(json.dumps(_error(EXIT_NUMERICAL, exc), sort_keys=True) + "\n")
        return EXIT_NUMERICAL
    _emit(render(report, rows, args.format), args.out)
    return code


if __name__ == "__main__":
    sys.exit(main())
