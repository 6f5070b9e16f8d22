"""Command-line interface: mtmrc {convolve|invert|analyze|simulate|bench}.

Exit codes: 0 success, 2 shape or parse problem, 3 not convolutionally
invertible, 4 kernel validation failure, 5 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import bench as bench_mod
from .convolution import convolve
from .errors import (
    ArgumentError,
    DimensionMismatchError,
    KernelValidationError,
    NotInvertibleError,
    NumericalError,
)
from .inversion import inverse, inverse_gauss_jordan
from .kernel import load_kernel
from .renewal import MrcAnalysis, analyze
from .seqcore import Grid, load_seq, save_seq
from .simulate import Target, estimate_many

EXIT_OK = 0
EXIT_SHAPE = 2
EXIT_NOT_INVERTIBLE = 3
EXIT_KERNEL = 4
EXIT_NUMERICAL = 5


def _parse_grid(text: str) -> Grid:
    try:
        bounds = tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise ArgumentError(f"cannot parse grid bounds {text!r}") from exc
    return Grid(bounds)


def _cmd_convolve(args) -> int:
    a = load_seq(args.in_a)
    b = load_seq(args.in_b)
    save_seq(args.out, convolve(a, b, args.method))
    return EXIT_OK


def _cmd_invert(args) -> int:
    a = load_seq(args.in_a)
    if args.factorization_out and args.method != "gauss-jordan":
        raise ArgumentError(
            "--factorization-out requires --method gauss-jordan"
        )
    if args.method == "gauss-jordan":
        result, factorization = inverse_gauss_jordan(a)
        if args.factorization_out:
            with open(args.factorization_out, "w") as fh:
                json.dump(factorization.to_json_list(), fh)
    else:
        result = inverse(a, args.method)
    save_seq(args.out, result)
    return EXIT_OK


def _dim_block(label: str, values) -> list[str]:
    return [f"  {label}: ({', '.join(f'{v:.6g}' for v in values)})"]


def _summary(analysis: MrcAnalysis) -> str:
    d = analysis.u.d
    mom = analysis.moments
    lines = ["Embedded chain transition matrix p:"]
    for row in analysis.p:
        lines.append("  " + "  ".join(f"{v:.6f}" for v in row))
    if analysis.irreducible:
        lines += ["Stationary vector nu:"] + _dim_block("nu", analysis.nu)
    else:
        lines.append("warning: embedded chain is reducible; "
                     "ergodic moment tables skipped")
    for u in range(d):
        lines += _dim_block(f"sojourn mean, dim {u + 1}", mom.m1[u])
        lines += _dim_block(f"sojourn second moment, dim {u + 1}", mom.m2[u])
    for u in range(d):
        for v in range(u + 1, d):
            lines += _dim_block(f"sojourn product mean, dims {u+1}*{v+1}",
                                mom.mprod[u, v])
            lines += _dim_block(f"sojourn covariance, dims {u+1},{v+1}",
                                mom.cov[u, v])
    if analysis.irreducible:
        mu = analysis.mu
        rec = analysis.recurrence
        for u in range(d):
            diag = [mu[u, j, j] for j in range(mu.shape[1])]
            lines += _dim_block(f"mean recurrence time, dim {u + 1}", diag)
            lines += _dim_block(
                f"recurrence second moment, dim {u + 1}",
                rec.mu_cross[u, u],
            )
            lines += _dim_block(f"recurrence variance, dim {u + 1}",
                                rec.variances[u])
        for u in range(d):
            for v in range(u + 1, d):
                lines += _dim_block(
                    f"recurrence product mean, dims {u+1}*{v+1}",
                    rec.mu_cross[u, v],
                )
                lines += _dim_block(
                    f"recurrence covariance, dims {u+1},{v+1}", rec.gamma[u, v]
                )
                lines += _dim_block(
                    f"recurrence correlation, dims {u+1},{v+1}",
                    rec.correlations[u, v],
                )
    return "\n".join(lines)


def _cmd_analyze(args) -> int:
    grid = _parse_grid(args.grid) if args.grid else None
    kernel = load_kernel(args.kernel, grid)
    analysis = analyze(kernel)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(analysis.to_dict(), fh)
    print(_summary(analysis))
    return EXIT_OK


def _load_targets(text: str) -> list[Target]:
    if text.startswith("@"):
        with open(text[1:]) as fh:
            raw = json.load(fh)
    else:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ArgumentError(f"cannot parse --targets: {exc}") from exc
    if not isinstance(raw, list):
        raise ArgumentError("--targets must be a JSON array")
    targets = []
    for rec in raw:
        at = tuple(rec["at"]) if "at" in rec else None
        targets.append(
            Target(
                rec.get("quantity"),
                i=rec.get("i"),
                j=rec.get("j"),
                at=at,
                u=rec.get("u"),
                v=rec.get("v"),
            )
        )
    return targets


def _cmd_simulate(args) -> int:
    grid = _parse_grid(args.grid) if args.grid else None
    kernel = load_kernel(args.kernel, grid)
    horizon = _parse_grid(args.horizon).bounds
    targets = _load_targets(args.targets) if args.targets else []
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        if targets:
            reports = estimate_many(
                kernel, targets, args.paths, args.seed, horizon
            )
            for report in reports:
                out.write(report.to_json() + "\n")
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def _cmd_bench(args) -> int:
    sizes = [int(x) for x in args.sizes.split(",")] if args.sizes else [None]
    for size in sizes:
        results = bench_mod.run_suite(args.suite, reps=args.reps, size=size)
        print(f"suite {args.suite}" + (f", size {size}" if size else ""))
        print(bench_mod.format_table(results))
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtmrc",
        description="Multi-time Markov renewal chain toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convolve", help="convolve two sequence files")
    p.add_argument("in_a")
    p.add_argument("in_b")
    p.add_argument("--method", choices=["direct", "fft", "auto"], default="auto")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_convolve)

    p = sub.add_parser("invert", help="convolutional inverse of a sequence file")
    p.add_argument("in_a")
    p.add_argument(
        "--method",
        choices=["series", "recurrence", "newton", "gauss-jordan"],
        default="gauss-jordan",
    )
    p.add_argument("--out", required=True)
    p.add_argument("--factorization-out")
    p.set_defaults(fn=_cmd_invert)

    p = sub.add_parser("analyze", help="full renewal analysis of a kernel file")
    p.add_argument("kernel")
    p.add_argument("--grid", help="bounds for parametric kernels, e.g. 40,40")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_analyze)

    p = sub.add_parser("simulate", help="Monte Carlo estimates from a kernel file")
    p.add_argument("kernel")
    p.add_argument("--grid", help="bounds for parametric kernels")
    p.add_argument("--paths", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", required=True, help="e.g. 12,12")
    p.add_argument("--targets", help="JSON array or @file of target records")
    p.add_argument("--out")
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("bench", help="timing comparisons")
    p.add_argument("--suite", choices=list(bench_mod.SUITES), required=True)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--sizes", help="comma-separated sizes, one run per size")
    p.set_defaults(fn=_cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (DimensionMismatchError, ArgumentError, FileNotFoundError,
            KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except NotInvertibleError as exc:
        print(f"error: not convolutionally invertible: {exc}", file=sys.stderr)
        return EXIT_NOT_INVERTIBLE
    except KernelValidationError as exc:
        print(f"error: kernel invalid: {exc}", file=sys.stderr)
        return EXIT_KERNEL
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
