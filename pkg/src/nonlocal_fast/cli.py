"""``nonlocal-fast`` command line: ``study``, ``timing`` and ``diag`` subcommands."""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys

from scipy import fft as sfft

from .solvers import CgsConfig
from .study import PROBLEMS, StudySpec, records_to_csv, run_diagnostics, run_study, run_timing

EXIT_OK, EXIT_SPEC, EXIT_ROW_FAILURE = 0, 1, 2


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    out = []
    for v in text.split(","):
        v = v.strip()
        if not v:
            continue
        out.append(2 ** int(v[2:]) if v.startswith("2^") else int(v))
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nonlocal-fast", description=__doc__)
    p.add_argument("--threads", type=int, default=None, help="FFT worker threads")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("study", help="manufactured-solution convergence study (CSV)")
    s.add_argument("--problem", required=True, choices=sorted(PROBLEMS))
    s.add_argument("--gamma", required=True, type=_floats, help="comma list, e.g. 0.2,0.5,0.8")
    s.add_argument("--M", required=True, type=_ints, help="comma list, e.g. 128,256 or 2^7,2^8")
    s.add_argument("--tau", default="equal-h", help="'equal-h' or a fixed step")
    s.add_argument("--T", type=float, default=None, help="final time (default: the solution's)")
    s.add_argument("--solution", default=None, help="named manufactured solution")
    s.add_argument("--domain", type=_floats, default=None, help="a,b (square in 2D) or a,b,c,d")
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--maxit", type=int, default=1000)
    s.add_argument("--startup", default="exact", choices=["exact", "cn-ramp"])
    s.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")

    t = sub.add_parser("timing", help="structured 1D timing, fit to c M log M")
    t.add_argument("--problem", default="matvec1d", choices=["matvec1d", "step1d"])
    t.add_argument("--M", type=_ints, default=[])
    t.add_argument("--gamma", type=float, default=0.5)
    t.add_argument("--repeats", type=int, default=5)
    t.add_argument("--out", default="-")

    d = sub.add_parser("diag", help="dense spectral diagnostics")
    d.add_argument("--problem", default="1d", choices=["1d", "2d-mult", "2d-add"])
    d.add_argument("--gamma", type=float, default=0.5)
    d.add_argument("--M", type=int, default=16)
    d.add_argument("--scan", action="store_true", help="also scan for an indefinite symmetric part")
    d.add_argument("--out", default="-")
    return p


@contextlib.contextmanager
def _output(path):
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    workers = args.threads if args.threads else 1
    try:
        with sfft.set_workers(workers):
            return _dispatch(args)
    except (ValueError, KeyError) as exc:
        print(f"nonlocal-fast: {exc}", file=sys.stderr)
        return EXIT_SPEC


def _dispatch(args) -> int:
    if args.command == "study":
        spec = StudySpec(args.problem, args.gamma, args.M, args.tau, args.T, args.solution,
                         tuple(args.domain) if args.domain else None,
                         CgsConfig(tol=args.tol, maxit=args.maxit), args.startup)
        records = run_study(spec)
        with _output(args.out) as fh:
            records_to_csv(records, fh)
        return EXIT_OK if all(r.ok for r in records) else EXIT_ROW_FAILURE
    if args.command == "timing":
        res = run_timing(args.problem, args.M, args.gamma, args.repeats)
        with _output(args.out) as fh:
            fh.write(res.to_csv())
        if len(args.M):
            print(f"fit t = c M log M: c={res.c:.3e} R^2={res.r2:.4f}", file=sys.stderr)
        return EXIT_OK
    text = run_diagnostics(args.problem, args.gamma, args.M, args.scan)
    with _output(args.out) as fh:
        fh.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
