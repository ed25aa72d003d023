"""Command-line front end.

    robust-persuasion solve INSTANCE --method exact [--out scheme.json]
    robust-persuasion eval INSTANCE SCHEME
    robust-persuasion generate {apples,direct-fail,subset-sum,random} [...]
    robust-persuasion compare INSTANCE --methods exact,small-states,qptas

Results go to stdout as JSON. Failures print ``{"error": ..., "message": ...}``
and exit with 2 (invalid input), 3 (solver failure) or 4 (size guard).
"""

from __future__ import annotations

import argparse
import csv
import io as _stdio
import json
import sys
import time
from fractions import Fraction

from . import instances as gen
from . import io
from .errors import NoWitness, PersuasionError, SizeGuard, SolverFailure
from .exact import SolverResult, build_robust_lp, live_signal_space, solve_exact
from .lp import to_lp_format
from .model import PersuasionInstance, evaluate_signals, robust_utility
from .oracle import grid_search_optimum
from .qptas import build_qptas_lp, solve_qptas
from .smallstate import solve_small_states

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_SIZE = 0, 2, 3, 4
METHODS = ("exact", "small-states", "qptas", "grid-oracle")
AGREE_TOL = 1e-6


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, SizeGuard):
        return EXIT_SIZE
    if isinstance(exc, (SolverFailure, NoWitness)):
        return EXIT_SOLVER
    return EXIT_INVALID


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, default=_json_default))


def _json_default(o):
    if isinstance(o, Fraction):
        return str(o)
    if hasattr(o, "tolist"):
        return o.tolist()
    if isinstance(o, (set, frozenset)):
        return sorted(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _load(args) -> PersuasionInstance:
    inst = io.load_instance(args.instance)
    if getattr(args, "delta", None) is not None:
        inst = inst.with_delta(args.delta)
    return inst


def _signal_rows(instance, scheme, tie_tolerance=0.0, exact=False):
    rows = []
    for ev in evaluate_signals(instance, scheme, tie_tolerance, exact=exact):
        rows.append(
            {
                "label": ev.label,
                "marginal": ev.marginal,
                "posterior": [str(x) if exact else float(x) for x in ev.posterior],
                "br_set": [instance.actions[a] for a in sorted(ev.br_set)],
                "best": instance.actions[ev.best],
                "worst": instance.actions[ev.worst],
                "worst_value": ev.worst_value,
            }
        )
    return rows


def _run(instance, method, args) -> SolverResult:
    if method == "exact":
        return solve_exact(instance, backend=args.backend)
    if method == "small-states":
        return solve_small_states(instance, paranoid=args.paranoid, backend=args.backend)
    if method == "qptas":
        return solve_qptas(instance, args.eps, log_base=args.log_base, backend=args.backend)
    if method == "grid-oracle":
        t0 = time.perf_counter()
        g = grid_search_optimum(instance, args.k, backend=args.backend)
        rv = robust_utility(instance, g.scheme)
        return SolverResult(
            scheme=g.scheme,
            value=g.value,
            per_signal=evaluate_signals(instance, g.scheme),
            tuples=list(g.scheme.signal_labels),
            realized=float(rv.value),
            method="grid-oracle",
            lp_vars=len(g.weights),
            wall_time=time.perf_counter() - t0,
            extra={"k": g.k},
        )
    raise ValueError(f"unknown method {method!r}")


def _export_lp(instance, args) -> None:
    if args.method == "exact":
        program, _ = build_robust_lp(instance, live_signal_space(instance), names=True)
    elif args.method == "qptas":
        program, _ = build_qptas_lp(instance, args.eps, log_base=args.log_base)
    else:
        raise ValueError(f"--lp-out needs --method exact or qptas, not {args.method}")
    with open(args.lp_out, "w") as fh:
        fh.write(to_lp_format(program))


def cmd_solve(args) -> int:
    instance = _load(args)
    res = _run(instance, args.method, args)
    report = {
        "method": res.method,
        "value": res.value,
        "realized": float(robust_utility(instance, res.scheme, args.tie_tolerance).value),
        "wall_time": res.wall_time,
        "lp_vars": res.lp_vars,
        "lp_rows": res.lp_rows,
        "num_signals": res.scheme.num_signals,
        "scheme_path": args.out,
        "extra": {k: v for k, v in res.extra.items() if k != "centers"},
        "signals": _signal_rows(instance, res.scheme, args.tie_tolerance),
    }
    if args.rational:
        report["realized_exact"] = str(robust_utility(instance, res.scheme, args.tie_tolerance, exact=True).value)
    if args.out:
        io.dump(io.scheme_to_dict(res.scheme), args.out)
    if args.lp_out:
        _export_lp(instance, args)
        report["lp_path"] = args.lp_out
    _emit(report)
    return EXIT_OK


def cmd_eval(args) -> int:
    instance = _load(args)
    scheme = io.load_scheme(args.scheme, instance.m)
    rv = robust_utility(instance, scheme, args.tie_tolerance, exact=args.rational)
    out = {
        "value": float(rv.value),
        "worst_actions": {k: instance.actions[a] for k, a in rv.worst_actions.items()},
        "signals": _signal_rows(instance, scheme, args.tie_tolerance, exact=args.rational),
    }
    if args.rational:
        out["value_exact"] = str(rv.value)
    _emit(out)
    return EXIT_OK


def cmd_generate(args) -> int:
    kind = args.kind
    if kind == "apples":
        inst = gen.apples_instance(args.delta if args.delta is not None else 0.1)
    elif kind == "direct-fail":
        inst = gen.direct_revelation_example(args.eps if args.eps is not None else 0.01,
                                             args.delta if args.delta is not None else 1)
    elif kind == "subset-sum":
        if not args.values:
            raise gen.BadSubsetSumInput("subset-sum needs --values, e.g. --values 1,-1,2,-2")
        try:
            values = [int(v) for v in args.values.split(",")]
        except ValueError:
            raise gen.BadSubsetSumInput(f"--values must be comma-separated integers, got {args.values!r}") from None
        data = gen.SubsetSumInput(tuple(values))
        inst, meta = gen.subset_sum_instance(data, args.delta if args.delta is not None else 0.25)
        if args.certificate_out:
            io.dump(io.scheme_to_dict(gen.yes_certificate_scheme(data, meta)), args.certificate_out)
    elif kind == "random":
        inst = gen.random_instance(args.m, args.n, args.delta if args.delta is not None else 0.1, args.seed)
    else:  # argparse restricts choices
        raise ValueError(kind)
    text = io.dump(io.instance_to_dict(inst), args.out)
    if not args.out:
        print(text)
    return EXIT_OK


def cmd_compare(args) -> int:
    instance = _load(args)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise ValueError(f"unknown methods: {', '.join(bad)}")
    rows = []
    results = {}
    for method in methods:
        res = _run(instance, method, args)
        results[method] = res
        rows.append({"method": method, "value": res.value, "realized": res.realized, "wall_time": res.wall_time})
    ref = results.get("exact") or results.get("small-states")
    for row in rows:
        res = results[row["method"]]
        flag = "ok"
        if ref is not None:
            if row["method"] in ("exact", "small-states"):
                flag = "ok" if abs(res.value - ref.value) <= AGREE_TOL else "DISAGREE"
            elif row["method"] == "qptas":
                flag = "ok" if res.realized >= ref.value - args.eps else "SHORTFALL"
            elif row["method"] == "grid-oracle":
                flag = "ok" if res.value <= ref.value + AGREE_TOL else "ABOVE_OPTIMUM"
        row["flag"] = flag
    if args.format == "csv":
        buf = _stdio.StringIO()
        w = csv.DictWriter(buf, fieldnames=["method", "value", "realized", "wall_time", "flag"])
        w.writeheader()
        w.writerows(rows)
        print(buf.getvalue(), end="")
    else:
        _emit({"rows": rows, "all_ok": all(r["flag"] == "ok" for r in rows)})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="robust-persuasion", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def solver_opts(sp):
        sp.add_argument("instance")
        sp.add_argument("--eps", type=float, default=0.3, help="QPTAS accuracy")
        sp.add_argument("--k", type=int, default=100, help="grid denominator for grid-oracle")
        sp.add_argument("--delta", type=float, help="override the instance's delta")
        sp.add_argument("--paranoid", action="store_true", help="cross-check exploration by brute force")
        sp.add_argument("--log-base", choices=("e", "2"), default="e")
        sp.add_argument("--backend", choices=("highs", "simplex"), default="highs")
        sp.add_argument("--tie-tolerance", type=float, default=0.0)

    s = sub.add_parser("solve", help="compute a robust signaling scheme")
    solver_opts(s)
    s.add_argument("--method", choices=METHODS, default="exact")
    s.add_argument("--out", help="write the scheme JSON here")
    s.add_argument("--lp-out", help="also write the solved LP in CPLEX LP text format (exact, qptas)")
    s.add_argument("--rational", action="store_true", help="also evaluate the scheme in exact arithmetic")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("eval", help="robust utility of a given scheme")
    e.add_argument("instance")
    e.add_argument("scheme")
    e.add_argument("--delta", type=float)
    e.add_argument("--tie-tolerance", type=float, default=0.0)
    e.add_argument("--rational", action="store_true")
    e.set_defaults(func=cmd_eval)

    g = sub.add_parser("generate", help="write an instance JSON")
    g.add_argument("kind", choices=("apples", "direct-fail", "subset-sum", "random"))
    g.add_argument("--eps", type=float)
    g.add_argument("--delta", type=float)
    g.add_argument("--values", help="comma-separated integers for subset-sum")
    g.add_argument("--m", type=int, default=3)
    g.add_argument("--n", type=int, default=5)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.add_argument("--certificate-out", help="subset-sum: also write the YES certificate scheme")
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("compare", help="run several methods on one instance")
    solver_opts(c)
    c.add_argument("--methods", default=",".join(METHODS))
    c.add_argument("--format", choices=("json", "csv"), default="json")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PersuasionError, ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        code = _exit_code(exc)
        _emit({"error": type(exc).__name__, "message": str(exc), "exit_code": code})
        return code


if __name__ == "__main__":
    sys.exit(main())
