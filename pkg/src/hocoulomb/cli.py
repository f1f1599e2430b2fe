"""Command-line front end.

Index order for ``element`` is ``n1x n1y n1z n2x n2y n2z n3x n3y n3z n4x n4y n4z``
for the element ``<l1 l2 | 1/r12 | l3 l4>``: particles 1 and 4 share ``r1``,
particles 2 and 3 share ``r2``.

Exit codes: 0 success, 1 validation failure, 2 usage error.

Environment: ``HOCOULOMB_WORKERS`` sets the default worker count and
``HOCOULOMB_BACKEND`` the default backend of ``element`` and ``tensor``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path
from typing import List, Optional

from .bench import MAX_BENCH_INDEX, bench_family
from .closed_form import (
    BACKENDS,
    FloatOverflowError,
    cancellation_audit,
    element_direct,
)
from .core import AXES, check_indices, selection_rule
from .oracle import QuadratureSpec
from .tensor_store import FORMATS, STRATEGIES, BasisCutoff, TensorTooLargeError, build_tensor, export
from .validation import validate

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def format_value(value: float) -> str:
    """Round-trip decimal with 17 significant digits, e.g. ``7.9788456080286541e-1``."""
    if value == 0.0:
        return "0"
    mantissa, exponent = f"{value:.16e}".split("e")
    return f"{mantissa}e{int(exponent)}"


def _env_workers() -> int:
    raw = os.environ.get("HOCOULOMB_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _env_backend(fallback: str) -> str:
    backend = os.environ.get("HOCOULOMB_BACKEND", fallback)
    return backend if backend in BACKENDS else fallback


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _non_negative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return value


def _add_cutoff(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--shells", type=_non_negative_int, help="keep states with nx+ny+nz <= N")
    group.add_argument("--n-max", type=_non_negative_int, help="keep states with every n <= N")


def _cutoff(args) -> BasisCutoff:
    if args.shells is not None:
        return BasisCutoff(args.shells, "shell")
    return BasisCutoff(args.n_max, "axis")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hocoulomb",
        description="Coulomb matrix elements in the 3D isotropic oscillator basis.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("element", help="evaluate one matrix element")
    p.add_argument("indices", nargs=12, type=int, metavar="N",
                   help="n1x n1y n1z n2x n2y n2z n3x n3y n3z n4x n4y n4z")
    p.add_argument("--a", type=_positive_float, default=1.0, help="oscillator length (default 1)")
    p.add_argument("--backend", choices=BACKENDS, default=None)

    p = sub.add_parser("tensor", help="build and export the symmetry-reduced tensor")
    _add_cutoff(p)
    p.add_argument("--a", type=_positive_float, default=1.0)
    p.add_argument("--strategy", choices=STRATEGIES, default="direct")
    p.add_argument("--backend", choices=BACKENDS, default=None)
    p.add_argument("--format", choices=FORMATS, default=None,
                   help="default: from the file extension (.json, .csv), else binary")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--max-keys", type=int, default=5_000_000)

    p = sub.add_parser("validate", help="compare the closed form with quadrature")
    _add_cutoff(p)
    p.add_argument("--a", type=_positive_float, default=1.0)
    p.add_argument("--threshold", type=_positive_float, default=1e-8)
    p.add_argument("--nodes-per-axis", type=int, default=None)
    p.add_argument("--t-nodes", type=int, default=None)
    p.add_argument("--target-rel-error", type=_positive_float, default=1e-10)
    p.add_argument("--quiet", action="store_true", help="summary only, no per-key table")

    p = sub.add_parser("bench", help="time direct evaluation against the recurrence")
    p.add_argument("--n-max", type=_non_negative_int, default=8)
    p.add_argument("--repetitions", type=int, default=3)
    p.add_argument("--backend", choices=BACKENDS, default="exact")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("audit", help="float-versus-exact cancellation audit")
    p.add_argument("--max-index", type=_non_negative_int, default=14)
    p.add_argument("--tolerance", type=_positive_float, default=1e-6)
    p.add_argument("--samples", type=int, default=24)
    p.add_argument("--summation", choices=("compensated", "naive"), default="compensated")
    return parser


def cmd_element(args, out) -> int:
    backend = args.backend or _env_backend("exact")
    indices = check_indices(args.indices)
    try:
        value = element_direct(indices, args.a, backend)
    except FloatOverflowError as exc:
        print(f"float overflow: {exc}; retry with --backend exact", file=sys.stderr)
        return EXIT_FAIL
    svals = selection_rule(indices)
    print(format_value(value.value), file=out)
    print("s: " + " ".join(
        f"{ax}={'odd' if s is None else s}" for ax, s in zip(AXES, svals)), file=out)
    odd = [ax for ax, s in zip(AXES, svals) if s is None]
    if odd:
        print(f"selection rule: vanishes ({', '.join(odd)} odd)", file=out)
    else:
        print("selection rule: allowed", file=out)
    if value.exact is not None and value.exact.rational != 0:
        ex = value.exact
        root = "" if ex.radicand == 1 else f" * sqrt({ex.radicand})"
        print(f"exact: {ex.rational}{root} * sqrt(2/pi) / a", file=out)
    return EXIT_OK


def _infer_format(path: Path) -> str:
    suffix = path.suffix.lower()
    return {".json": "json", ".csv": "csv"}.get(suffix, "binary")


def cmd_tensor(args, out) -> int:
    cutoff = _cutoff(args)
    backend = args.backend or _env_backend("exact")
    workers = args.workers or _env_workers()
    fmt = args.format or _infer_format(args.out)
    t0 = time.perf_counter()
    try:
        store = build_tensor(cutoff, args.a, args.strategy, backend, workers, args.max_keys)
    except TensorTooLargeError as exc:
        print(f"refusing to build: {exc}", file=sys.stderr)
        return EXIT_USAGE
    export(store, fmt, args.out)
    elapsed = time.perf_counter() - t0
    print(
        f"count={store.count} strategy={args.strategy} backend={backend} "
        f"workers={workers} time={elapsed:.3f}s digest={store.digest} out={args.out}",
        file=out,
    )
    return EXIT_OK


def cmd_validate(args, out) -> int:
    cutoff = _cutoff(args)
    default = QuadratureSpec.for_max_index(cutoff.max_index, args.target_rel_error)
    spec = QuadratureSpec(
        args.nodes_per_axis or default.nodes_per_axis,
        args.t_nodes or default.t_nodes,
        args.target_rel_error,
    )
    report = validate(cutoff, args.a, spec, args.threshold)
    if not args.quiet:
        print(f"{'key':<40} {'closed_form':>24} {'quadrature':>24} {'rel_err':>10} status", file=out)
        for row in report.rows:
            print(
                f"{' '.join(map(str, row.key)):<40} {format_value(row.closed_form):>24} "
                f"{format_value(row.quadrature):>24} {row.rel_error:10.2e} {row.status}",
                file=out,
            )
    zeros = sum(r.status == "zero" for r in report.rows)
    print(
        f"keys={len(report.rows)} exact_zero_matches={zeros} "
        f"max_rel_err={report.max_rel_error:.3e} mean_rel_err={report.mean_rel_error:.3e} "
        f"threshold={report.threshold:.0e} {'PASS' if report.passed else 'FAIL'}",
        file=out,
    )
    for row in report.failures[:20]:
        print(f"FAIL key={row.key} closed_form={row.closed_form!r} quadrature={row.quadrature!r}",
              file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_bench(args, out) -> int:
    if args.n_max > MAX_BENCH_INDEX:
        print(f"--n-max above the safety limit {MAX_BENCH_INDEX}", file=sys.stderr)
        return EXIT_USAGE
    result = bench_family(args.n_max, args.repetitions, backend=args.backend)
    if args.json:
        print(json.dumps(result), file=out)
    else:
        print(
            f"family sweep n_max={result['n_max']} entries={result['entries']} "
            f"direct={result['direct_ns'] / 1e6:.3f} ms "
            f"recurrence={result['recurrence_ns'] / 1e6:.3f} ms "
            f"speedup={result['ratio']:.2f}",
            file=out,
        )
    return EXIT_OK


def cmd_audit(args, out) -> int:
    report = cancellation_audit(args.max_index, args.tolerance, args.samples, args.summation)
    for n, err in sorted(report.max_rel_error.items()):
        flag = "" if err <= args.tolerance else "  > tolerance"
        print(f"index {n:3d}: max rel err {err:.2e}{flag}", file=out)
    first = report.first_failure
    print(
        f"summation={args.summation} first_failure="
        f"{'none' if first is None else first} reliable_up_to={report.reliable_up_to}",
        file=out,
    )
    return EXIT_OK


COMMANDS = {
    "element": cmd_element,
    "tensor": cmd_tensor,
    "validate": cmd_validate,
    "bench": cmd_bench,
    "audit": cmd_audit,
}


def main(argv: Optional[List[str]] = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, out)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
