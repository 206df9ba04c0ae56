"""Command-line entry point: ``ffqls {check,synthesize,verify,suite}``.

Exit codes: 0 success or certified, 1 error, 2 NOT_FFQLS or failed verification,
3 UNDETERMINED.  Reports go to ``--out`` (or stdout); logs and errors go to stderr.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

logger = logging.getLogger("ffqls")

EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE, EXIT_UNDETERMINED = 0, 1, 2, 3


def _set_threads() -> None:
    n = os.environ.get("FFQLS_THREADS")
    if n:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, n)


def _parse_tol(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"--tol expects KEY=VAL, got {item!r}")
        out[key.strip()] = int(val) if key.strip() == "max_extended_dim" else float(val)
    return out


def _emit(text: str, out: str | None, force: bool = True) -> None:
    if out:
        path = Path(out)
        if path.exists() and not force:
            raise FileExistsError(f"{out} exists; pass --force to overwrite")
        path.write_text(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _error(exc: Exception) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
    return EXIT_ERROR


def _load(args):
    from .problem import load_problem
    return load_problem(args.problem, _parse_tol(args.tol), args.seed)


def cmd_check(args) -> int:
    from . import check
    from .io import dumps
    prob = _load(args)
    rep = check.classify(prob.rho, prob.structure, prob.tol)
    if prob.psi is not None:
        rep.notes.append(f"dqls_condition: {check.dqls_condition(prob.psi, prob.structure, prob.tol)}")
    body = dict(rep.to_dict(), seed=prob.seed)
    _emit(dumps(body), args.out)
    return {check.NOT_FFQLS: EXIT_NEGATIVE, check.UNDETERMINED: EXIT_UNDETERMINED}.get(rep.classification, EXIT_OK)


def cmd_synthesize(args) -> int:
    from . import check
    from .io import bundle_to_json, dumps
    from .synthesis import synthesize
    prob = _load(args)
    rep = check.classify(prob.rho, prob.structure, prob.tol)
    if rep.classification == check.NOT_FFQLS and not args.force:
        sys.stderr.write(json.dumps({"error": "NOT_FFQLS", "message": "target fails the necessary "
                                     "condition; pass --force to synthesize anyway"}) + "\n")
        return EXIT_NEGATIVE
    bundle = synthesize(prob.rho, prob.structure, args.mode or prob.mode, prob.seed, prob.tol)
    bundle.meta["classification"] = rep.classification
    bundle.meta["target_hash"] = rep.target_hash
    _emit(dumps(bundle_to_json(bundle)), args.out)
    return EXIT_OK


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in r])


def cmd_verify(args) -> int:
    from .io import bundle_from_json, dumps
    from .verify import verify_bundle
    prob = _load(args)
    try:
        bundle = bundle_from_json(json.loads(Path(args.bundle).read_text()))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ValueError(f"cannot read bundle {args.bundle}: {exc}") from exc
    if bundle.layout.dims != prob.layout.dims:
        raise ValueError("bundle layout does not match the problem layout")
    rep = verify_bundle(bundle, prob.rho, prob.tol, seed=prob.seed)
    if args.csv:
        rows = []
        for tr in rep.convergence:
            for t, td, V in zip(tr["t"], tr["trace_distance"], tr["V"]):
                rows.append([tr["initial"], t, td, V])
        _write_csv(args.csv, ["initial", "t", "trace_distance", "V"], rows)
    if args.gap_sweep:
        if str(prob.state_spec.get("family", "")).upper() != "RHO_EPSILON":
            raise ValueError("--gap-sweep applies to RHO_EPSILON problems")
        from .suite import gap_sweep
        keys = ["epsilon", "gap_raw", "gap_spectral", "gap_frobenius", "predicted"]
        _write_csv(args.gap_sweep, keys, [[r[k] for k in keys] for r in gap_sweep(seed=prob.seed)])
    _emit(dumps(dict(rep.to_dict(), seed=prob.seed, bundle_hash=bundle.global_hash())), args.out)
    return EXIT_OK if rep.gas_ok and rep.ff_ok else EXIT_NEGATIVE


def cmd_suite(args) -> int:
    from .io import dumps
    from .suite import run_suite
    results = run_suite(args.select)
    if args.json:
        table = [{"index": r.index, "name": r.name, "passed": r.passed, "detail": r.detail, "checks": r.checks}
                 for r in results]
        _emit(dumps(table), args.out)
    else:
        lines = [r.line() for r in results]
        lines.append(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
        _emit("\n".join(lines), args.out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_NEGATIVE


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the report here instead of stdout")
    common.add_argument("--json", action="store_true", help="emit JSON (reports are always JSON)")
    common.add_argument("-v", "--verbose", action="count", default=0)
    prob = argparse.ArgumentParser(add_help=False)
    prob.add_argument("--problem", required=True, help="problem JSON file")
    prob.add_argument("--seed", type=int, help="override the problem seed")
    prob.add_argument("--tol", action="append", metavar="KEY=VAL", help="tolerance override (repeatable)")

    p = argparse.ArgumentParser(prog="ffqls", description="Frustration-free quasi-local stabilization toolkit.")
    sub = p.add_subparsers(dest="command", required=True)
    c = sub.add_parser("check", parents=[common, prob], help="classify a target state")
    c.set_defaults(func=cmd_check)
    s = sub.add_parser("synthesize", parents=[common, prob], help="build a stabilizing generator bundle")
    s.add_argument("--force", action="store_true", help="synthesize even when the check is negative")
    s.add_argument("--mode", choices=["FULL_RANK", "GENERAL"])
    s.set_defaults(func=cmd_synthesize)
    v = sub.add_parser("verify", parents=[common, prob], help="verify a generator bundle against a target")
    v.add_argument("--bundle", required=True)
    v.add_argument("--csv", help="trajectory CSV (initial, t, trace_distance, V)")
    v.add_argument("--gap-sweep", help="gap-versus-epsilon CSV for the rho_epsilon family")
    v.set_defaults(func=cmd_verify)
    u = sub.add_parser("suite", parents=[common], help="run the acceptance fixtures")
    u.add_argument("--select", nargs="+", metavar="NAME")
    u.set_defaults(func=cmd_suite)
    return p


def main(argv=None) -> int:
    _set_threads()
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, KeyError, FileExistsError, MemoryError, RuntimeError) as exc:
        return _error(exc)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
