"""Command-line front end: ``ssmcert <command> ...``.

Exit codes: 0 success, 1 verification failure, 2 invalid arguments,
3 resource cap hit, 4 undecided under ``--strict``.
"""
import argparse
import json
import sys

from . import __version__
from .artifacts import RunConfig, read_json, unwrap, wrap, write_json
from .branching import (BranchingMatrix, Partition, auto_reduce, reduce, refine_to_consistent,
                        same_generated_trees)
from .certify import (WsmFailsCert, WsmHoldsCert, threshold_estimate, verify_wsm_fails,
                      verify_wsm_holds, wsm_certify, wsm_refute)
from .errors import InvalidParameterError, ResourceLimitError, SsmCertError
from .exact import format_rational, parse_activity, parse_rational
from .lattice import (Ordering, build_cycle_free_matrix, build_named_machine, enumerate_saw_tree,
                      named_partition, walks_of_machine)
from .recurrence import Cuboid, GridVector

EXIT_OK, EXIT_VERIFY, EXIT_ARGS, EXIT_CAP, EXIT_UNDECIDED = 0, 1, 2, 3, 4

HOLDS, FAILS, UNDECIDED = "WSM-CERTIFIED", "WSM-REFUTED", "UNDECIDED"


class UsageError(InvalidParameterError):
    pass


# ------------------------------------------------------------ helpers

def _config(args, **extra):
    return RunConfig(
        command=args.command,
        matrix_source=_matrix_source(args),
        lam=getattr(args, "lam", "") or "",
        scale=args.scale,
        d=getattr(args, "d", 0) or 0,
        n_pairs=getattr(args, "N", 0) or 0,
        budget=args.budget or 0.0,
        outputs=[p for p in (getattr(args, "output", None), getattr(args, "trace", None)) if p],
        jobs=args.jobs,
        extra=extra,
    )


def _matrix_source(args):
    if getattr(args, "matrix", None):
        return f"file:{args.matrix}"
    if getattr(args, "machine", None):
        return f"machine:{args.machine}"
    if getattr(args, "cycle_free", None):
        return f"cycle-free:{args.cycle_free}{':trim' if args.trim else ''}"
    return ""


def load_matrix_file(path):
    doc = read_json(path)
    if isinstance(doc, dict) and "payload" in doc:
        doc = unwrap(doc, "matrix")
    return BranchingMatrix.from_dict(doc)


def _matrix_from_args(args, reduce_named=True):
    if getattr(args, "matrix", None):
        return load_matrix_file(args.matrix)
    if getattr(args, "machine", None):
        M = build_named_machine(args.machine)
        if reduce_named:
            M = reduce(M, named_partition(M)).reduced
        return M
    if getattr(args, "cycle_free", None):
        return build_cycle_free_matrix(args.cycle_free, trim_boundary=args.trim,
                                       ordering=Ordering(args.ordering), minimize=True)
    raise UsageError("give one of --matrix, --machine or --cycle-free")


def _add_matrix_source(p, cycle_free=True):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--matrix", help="matrix JSON file")
    g.add_argument("--machine", help="named walk machine (D_H, D_G, D_prime), reduced")
    if cycle_free:
        g.add_argument("--cycle-free", type=int, metavar="ELL",
                       help="cycle-free walk matrix for even ELL, minimized")
        p.add_argument("--trim", action="store_true", help="apply the boundary trimming rule")
        p.add_argument("--ordering", default="NEWS", help="homogeneous direction ordering")


def _lam(text):
    try:
        return parse_activity(text)
    except (InvalidParameterError, ValueError, TypeError) as exc:
        raise UsageError(f"invalid lambda {text!r}: {exc}") from exc


def _emit(args, kind, payload, config):
    doc = wrap(kind, payload, config)
    if getattr(args, "output", None):
        write_json(args.output, doc)
        print(f"wrote {args.output}")
    return doc


# ------------------------------------------------------------ commands

def cmd_build(args):
    if args.machine:
        M = build_named_machine(args.machine)
    elif args.cycle_free:
        minimize = args.reduce == "minimize"
        M = build_cycle_free_matrix(args.cycle_free, trim_boundary=args.trim,
                                    ordering=Ordering(args.ordering), minimize=minimize,
                                    max_states=args.max_states)
    else:
        raise UsageError("build needs --machine or --cycle-free")
    extra = {"raw_types": M.t}
    if args.reduce == "auto":
        M = auto_reduce(M.core).reduced
    elif args.reduce == "named":
        if not args.machine:
            raise UsageError("--reduce named needs --machine")
        M = reduce(M, named_partition(M)).reduced
    elif args.reduce == "minimize" and args.machine:
        M = reduce(M.core, refine_to_consistent(M.core)).reduced
    print(f"{M.name or 'matrix'}: {M.t} types ({M.core.t} recurrent)")
    _emit(args, "matrix", M.to_dict(), _config(args, **extra))
    if not args.output:
        print(M.to_json())
    return EXIT_OK


def cmd_reduce(args):
    M = load_matrix_file(args.matrix)
    if args.partition:
        with open(args.partition) as fh:
            C = Partition.from_json(fh.read(), M.t)
        res = reduce(M, C)
    else:
        res = auto_reduce(M)
    ok = same_generated_trees(M, res, depth=args.check_depth)
    print(f"{M.t} -> {res.reduced.t} types; generated trees agree to depth "
          f"{args.check_depth}: {'yes' if ok else 'NO'}")
    payload = res.to_dict(M)
    _emit(args, "reduction", payload, _config(args))
    return EXIT_OK if ok else EXIT_VERIFY


def _parse_vector(text):
    return tuple(parse_rational(x) for x in text.split(","))


def _load_cuboids(path, scale):
    with open(path) as fh:
        d = json.load(fh)
    s = int(d.get("scale", scale))
    g = lambda key: GridVector.from_strings(d[key], s)  # noqa: E731
    return Cuboid(g("x_LL"), g("x_LR")), Cuboid(g("x_RL"), g("x_RR"))


def _verdict_exit(args, verdict):
    print(verdict)
    if verdict == UNDECIDED and args.strict:
        return EXIT_UNDECIDED
    return EXIT_OK


def cmd_certify(args):
    M = _matrix_from_args(args)
    lam = _lam(args.lam)
    v = _parse_vector(args.test_vector) if args.test_vector else None
    cert = wsm_certify(M, lam, N=args.N, scale=args.scale, test_vector=v)
    if cert:
        print(f"bound {float(cert.bound):.9f} after {cert.pairs} pairs")
        _emit(args, cert.kind, cert.to_dict(), _config(args))
        return _verdict_exit(args, HOLDS)
    print(f"certify: {cert.detail}")
    if not args.no_refute:
        ref = wsm_refute(M, lam, scale=args.scale)
        if ref:
            _emit(args, ref.kind, ref.to_dict(), _config(args))
            return _verdict_exit(args, FAILS)
        print(f"refute: {ref.detail}")
    return _verdict_exit(args, UNDECIDED)


def cmd_refute(args):
    M = _matrix_from_args(args)
    lam = _lam(args.lam)
    cuboids = _load_cuboids(args.cuboids, args.scale) if args.cuboids else None
    ref = wsm_refute(M, lam, cuboids=cuboids, scale=args.scale)
    if ref:
        _emit(args, ref.kind, ref.to_dict(), _config(args))
        return _verdict_exit(args, FAILS)
    print(f"refute: {ref.detail}")
    return _verdict_exit(args, UNDECIDED)


def cmd_ssm(args):
    from .lp.generation import pipeline, potential_csv, write_trace_csv
    M = _matrix_from_args(args)
    lam = _lam(args.lam)
    res = pipeline(M, lam, d=args.d, batch=args.batch, top_n=args.top_n, budget=args.budget,
                   d_max=args.d_max,
                   log=(lambda row: print(json.dumps(row), file=sys.stderr)) if args.verbose else None)
    if args.trace:
        write_trace_csv(res.trace, args.trace)
    print(f"{res.status} after {res.elapsed:.1f}s, {res.refinements} refinements, "
          f"{res.lp_rounds} LP rounds, {sum(res.grid.sizes())} intervals")
    if res.certified:
        cert = res.certificate
        print(f"SSM-CERTIFIED margin {float(cert.margin):.3e} over {cert.n_rows} rows")
        _emit(args, "ssm-potential", cert.to_dict(),
              _config(args, batch=args.batch, top_n=args.top_n, d_max=args.d_max))
        if args.potential_csv:
            potential_csv(cert.grid, cert.potential, args.potential_csv)
        return EXIT_OK
    # an infeasible LP only says this function class failed
    print(f"{UNDECIDED}: no potential found ({res.reason})")
    return EXIT_UNDECIDED if args.strict else EXIT_OK


def verify_document(doc):
    """Re-check an artifact from scratch; returns ``(ok, message)``."""
    from .lp.verify import SsmPotentialCert, verify_potential
    try:
        payload = unwrap(doc)
    except InvalidParameterError as exc:
        return False, str(exc)
    kind = doc.get("kind")
    if kind == "wsm-holds":
        res = verify_wsm_holds(WsmHoldsCert.from_dict(payload))
        return bool(res), res.detail or "WSM holds certificate valid"
    if kind == "wsm-fails":
        res = verify_wsm_fails(WsmFailsCert.from_dict(payload))
        return bool(res), res.detail or "WSM fails certificate valid"
    if kind == "ssm-potential":
        cert = SsmPotentialCert.from_dict(payload)
        res = verify_potential(cert.matrix, cert.lam, cert.grid, cert.potential)
        if not res:
            return False, f"first violation: {res}"
        if res.margin != cert.margin:
            return False, "stated margin differs from the recomputed one"
        return True, f"SSM potential valid, margin {float(res.margin):.3e}, {res.n_rows} rows"
    if kind == "matrix":
        BranchingMatrix.from_dict(payload)
        return True, "matrix file intact"
    return False, f"unknown artifact kind {kind!r}"


def cmd_verify(args):
    try:
        doc = read_json(args.file)
    except (OSError, ValueError) as exc:
        print(f"INVALID: cannot read {args.file}: {exc}")
        return EXIT_VERIFY
    try:
        ok, msg = verify_document(doc)
    except (SsmCertError, KeyError, TypeError, ValueError) as exc:
        ok, msg = False, f"malformed certificate: {exc}"
    print(("VALID: " if ok else "INVALID: ") + msg)
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_sweep(args):
    from .lp.generation import ssm_threshold_sweep, write_trace_csv
    M = _matrix_from_args(args)
    if args.mode == "wsm":
        if args.lo is None or args.hi is None:
            raise UsageError("wsm sweep needs --lo and --hi")
        est = threshold_estimate(M, _lam(args.lo), _lam(args.hi), parse_rational(args.tol),
                                 N=args.N, scale=args.scale)
        rows = [{"lambda": format_rational(p.lam), "verdict": p.verdict} for p in est.probes]
        for r in rows:
            print(f"{r['lambda']:>12} {r['verdict']}")
        print(f"bracket [{float(est.lo):.6f}, {float(est.hi):.6f}] width {float(est.width):.6f}")
        payload = est.to_dict()
    else:
        if not args.lambdas:
            raise UsageError("ssm sweep needs --lambdas")
        lams = [_lam(x) for x in args.lambdas.split(",")]
        table, best = ssm_threshold_sweep(M, lams, budget=args.budget, d=args.d)
        rows = [{"lambda": format_rational(r.lam), "status": r.status, "seconds": r.elapsed,
                 "intervals": r.cells, "lp_rounds": r.lp_rounds,
                 "margin": format_rational(r.margin) if r.margin is not None else ""}
                for r in table]
        for r in rows:
            print(f"{r['lambda']:>8} {r['status']:<14} {r['seconds']:>9}s")
        print("largest certified: " + (format_rational(best) if best is not None else "none"))
        payload = {"rows": rows, "largest_certified": format_rational(best) if best else None}
    if args.csv:
        write_trace_csv(rows, args.csv)
    _emit(args, f"{args.mode}-sweep", payload, _config(args))
    return EXIT_OK


def cmd_saw_check(args):
    M = build_named_machine(args.machine)
    orderings = [Ordering(args.ordering)]
    if args.random_orderings:
        orderings += [Ordering.random(args.seed + k) for k in range(args.random_orderings)]
    paths = walks_of_machine(M, args.depth)
    bad = 0
    for o in orderings:
        tree = enumerate_saw_tree(args.radius, args.depth, o)
        missing = paths - tree.nodes
        status = "contained" if not missing else f"{len(missing)} paths missing, e.g. {min(missing)}"
        print(f"ordering {o}: {len(paths)} machine paths, {len(tree)} tree nodes: {status}")
        bad += bool(missing)
    return EXIT_OK if not bad else EXIT_VERIFY


# ------------------------------------------------------------ parser

def _globals(p, suppress):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--scale", type=int, default=d(7), help="decimal digits of the rounding grid")
    p.add_argument("--jobs", type=int, default=d(1), help="parallel workers (recorded)")
    p.add_argument("--budget", type=float, default=d(None), help="time budget in seconds")
    p.add_argument("--strict", action="store_true", default=d(False),
                   help="exit 4 when the verdict is undecided")


def build_parser():
    parser = argparse.ArgumentParser(prog="ssmcert", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _globals(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _globals(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", parents=[common], help="build a branching matrix")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--machine")
    g.add_argument("--cycle-free", type=int, metavar="ELL")
    p.add_argument("--trim", action="store_true")
    p.add_argument("--ordering", default="NEWS")
    p.add_argument("--reduce", choices=["none", "auto", "named", "minimize"], default="none")
    p.add_argument("--max-states", type=int, default=10**7)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("reduce", parents=[common], help="reduce a matrix by a partition")
    p.add_argument("--matrix", required=True)
    p.add_argument("--partition", help="partition JSON (list of blocks); default: automatic")
    p.add_argument("--check-depth", type=int, default=6)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("certify", parents=[common], help="WSM certificate or refutation")
    _add_matrix_source(p)
    p.add_argument("--lambda", dest="lam", required=True)
    p.add_argument("--N", type=int, default=1000, help="minimum number of rounded pairs")
    p.add_argument("--test-vector", help="comma-separated positive test vector")
    p.add_argument("--no-refute", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("refute", parents=[common], help="WSM failure certificate")
    _add_matrix_source(p)
    p.add_argument("--lambda", dest="lam", required=True)
    p.add_argument("--cuboids", help="JSON with x_LL, x_LR, x_RL, x_RR")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_refute)

    p = sub.add_parser("ssm", parents=[common], help="search and verify an SSM potential")
    _add_matrix_source(p)
    p.add_argument("--lambda", dest="lam", required=True)
    p.add_argument("--d", type=int, default=20, help="initial intervals per type")
    p.add_argument("--d-max", type=int, default=400)
    p.add_argument("--batch", type=int, default=5000)
    p.add_argument("--top-n", type=int, default=None)
    p.add_argument("--trace", help="CSV of the generation/refinement trace")
    p.add_argument("--potential-csv", help="CSV of the certified potential")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_ssm)

    p = sub.add_parser("verify", parents=[common], help="re-check any certificate file")
    p.add_argument("file")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", parents=[common], help="threshold sweeps")
    _add_matrix_source(p)
    p.add_argument("--mode", choices=["wsm", "ssm"], default="wsm")
    p.add_argument("--lo")
    p.add_argument("--hi")
    p.add_argument("--tol", default="0.01")
    p.add_argument("--N", type=int, default=1000)
    p.add_argument("--lambdas", help="comma-separated activities for --mode ssm")
    p.add_argument("--d", type=int, default=20)
    p.add_argument("--csv")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("saw-check", parents=[common],
                       help="check machine paths against finite SAW trees")
    p.add_argument("--machine", default="D_H")
    p.add_argument("--depth", type=int, default=8)
    p.add_argument("--radius", type=int, default=5)
    p.add_argument("--ordering", default="NEWS")
    p.add_argument("--random-orderings", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_saw_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ResourceLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (InvalidParameterError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGS


if __name__ == "__main__":
    sys.exit(main())
