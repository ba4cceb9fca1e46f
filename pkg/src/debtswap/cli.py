"""Command-line front end.

Exit codes: 0 success, 1 a verification found a violation, 2 bad input,
3 numerical failure, 4 enumeration budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import _kernels
from .clearing import NonConvergenceError, solve, solve_fictitious_default, solve_picard, solve_with_default_costs
from .gadgets import FIXTURES, compose, d_boolean, densest_k_reduction, one_fix, paper_fixture
from .network import NetworkError, dumps, load
from .shocks import (DEFAULT_BUDGET, BudgetExceededError, proportional_shock_function, worst_set_function,
                     worst_sum_function, worst_sum_value)
from .swaps import (PortfolioSwapSpec, ReorgSpec, ShockModel, SwapSpec, classify_portfolio_swap,
                    classify_reorg, classify_swap, search_positive_swaps)

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT, EXIT_NUMERIC, EXIT_BUDGET = 0, 1, 2, 3, 4


def fmt(x) -> str:
    """Nine significant digits, no negative zero."""
    x = float(x)
    if x == 0.0:
        x = 0.0
    return f"{x:.9g}"


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n"


def _model(args) -> ShockModel:
    kind = args.model.replace("-", "_")
    if kind == "worst_set":
        if args.K is None:
            raise NetworkError("--K is required for the worst-set model")
        return ShockModel("worst_set", args.K, budget=args.budget)
    return ShockModel(kind, budget=args.budget)


# -- commands -----------------------------------------------------------------

def cmd_clear(args, out) -> int:
    net = load(args.network)
    if args.beta is not None:
        net = net.with_beta(args.beta)
    if net.beta != 1.0:
        sol = solve_with_default_costs(net, tol=args.tol)
    elif args.method == "picard":
        sol = solve_picard(net, tol=args.tol)
    else:
        sol = solve_fictitious_default(net, tol=args.tol)
    if args.format == "object":
        out.write(_json(sol.to_dict()))
    elif args.payments:
        rows = [(u, v, fmt(net.liability(u, v)), fmt(p)) for (u, v), p in sorted(sol.payments.items())]
        out.write(_csv(rows, ["debtor", "creditor", "weight", "payment"]))
    else:
        rows = [(b, fmt(sol.assets[b]), fmt(sol.recovery[b]), fmt(sol.equity[b]), int(b in sol.defaulting))
                for b in net.bank_ids]
        out.write(_csv(rows, ["bank", "assets", "recovery", "equity", "default"]))
    return EXIT_OK


def cmd_shock(args, out) -> int:
    net = load(args.network)
    if args.target not in net.index:
        raise NetworkError(f"unknown target bank {args.target!r}")
    model = args.model.replace("-", "_")
    if model == "worst_set":
        if args.K is None:
            raise NetworkError("--K is required for the worst-set model")
        f = worst_set_function(net, args.target, args.K, args.budget)
        rows = [(k, fmt(val), ";".join(w or ())) for k, (val, w) in enumerate(zip(f.values, f.witnesses))]
        if args.format == "object":
            out.write(_json({"bank": f.bank, "values": list(f.values), "witnesses": [list(w) for w in f.witnesses]}))
        else:
            out.write(_csv(rows, ["k", "value", "witness"]))
        return EXIT_OK
    if model == "worst_sum" and args.rho is not None:
        val, shock = worst_sum_value(net, args.target, args.rho, args.budget)
        if args.format == "object":
            out.write(_json({"rho": args.rho, "value": val, "shock": shock.reductions}))
        else:
            out.write(_csv([(fmt(args.rho), fmt(val))], ["x", "value"]))
        return EXIT_OK
    if model == "proportional":
        f = proportional_shock_function(net, args.target)
        grid = args.lambda_grid
    elif model == "worst_sum":
        f = worst_sum_function(net, args.target, args.max_depth, args.chord_tol, args.budget)
        grid = args.rho_grid
    else:
        raise NetworkError(f"unknown model {args.model!r}")
    if grid:
        xs = np.linspace(f.xs[0], f.xs[-1], grid + 1)
        pts = list(zip(xs, f(xs)))
    else:
        pts = list(f.breakpoints)
    if args.format == "object":
        out.write(_json({"bank": f.bank, "domain": f.domain, "exact": f.exact,
                         "points": [[float(x), float(y)] for x, y in pts]}))
    else:
        out.write(_csv([(fmt(x), fmt(y)) for x, y in pts], ["x", "value"]))
    return EXIT_OK


def _pair_list(text):
    return [p.strip() for p in text.split(",") if p.strip()]


def _operation(args):
    """Parse the operation from --swap / --portfolio / --reorg or a spec file."""
    if args.spec:
        data = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        return operation_from_dict(data)
    if args.swap:
        p = _pair_list(args.swap)
        if len(p) != 4:
            raise NetworkError("--swap expects u1,v1,u2,v2")
        return SwapSpec((p[0], p[1]), (p[2], p[3]))
    if args.portfolio:
        parts = args.portfolio.split(":")
        if len(parts) != 4:
            raise NetworkError("--portfolio expects v1:v2:u,u:u,u")
        return PortfolioSwapSpec(parts[0], parts[1], tuple(_pair_list(parts[2])), tuple(_pair_list(parts[3])))
    if args.reorg:
        cs = []
        for item in _pair_list(args.reorg):
            u, _, v = item.partition(">")
            cs.append((u.strip("-"), v))
        if not args.perm:
            raise NetworkError("--reorg needs --perm")
        return ReorgSpec(tuple(cs), tuple(int(x) for x in _pair_list(args.perm)))
    raise NetworkError("give one of --swap, --portfolio, --reorg or --spec")


def operation_to_dict(op) -> dict:
    if isinstance(op, SwapSpec):
        return {"swap": [list(op.c1), list(op.c2)]}
    if isinstance(op, PortfolioSwapSpec):
        return {"portfolio": {"v1": op.v1, "v2": op.v2, "U1": list(op.U1), "U2": list(op.U2)}}
    if isinstance(op, ReorgSpec):
        return {"reorg": {"contracts": [list(c) for c in op.contracts], "permutation": list(op.permutation)}}
    raise TypeError(f"not an operation: {op!r}")


def operation_from_dict(data) -> SwapSpec | PortfolioSwapSpec | ReorgSpec:
    try:
        if "swap" in data:
            c1, c2 = data["swap"]
            return SwapSpec(tuple(c1), tuple(c2))
        if "portfolio" in data:
            p = data["portfolio"]
            return PortfolioSwapSpec(p["v1"], p["v2"], tuple(p["U1"]), tuple(p["U2"]))
        if "reorg" in data:
            r = data["reorg"]
            return ReorgSpec(tuple(tuple(c) for c in r["contracts"]), tuple(r["permutation"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise NetworkError(f"malformed operation spec: {exc}") from exc
    raise NetworkError("operation spec needs a 'swap', 'portfolio' or 'reorg' entry")


def _verdict_csv(v) -> str:
    rows = []
    for b, c in v.banks.items():
        for x, y0, y1 in zip(c.points, c.before, c.after):
            rows.append((b, fmt(x), fmt(y0), fmt(y1), c.status))
    return f"# verdict {v.verdict.value}\n" + _csv(rows, ["bank", "point", "before", "after", "status"])


def cmd_swap_check(args, out) -> int:
    net = load(args.network)
    op = _operation(args)
    model = _model(args)
    observe = _pair_list(args.observe) if args.observe else ()
    if isinstance(op, SwapSpec):
        v = classify_swap(net, op, model, observe)
    elif isinstance(op, PortfolioSwapSpec):
        v = classify_portfolio_swap(net, op, model, observe)
    else:
        v = classify_reorg(net, op, model, observe)
    if args.format == "csv":
        out.write(_verdict_csv(v))
    else:
        out.write(_json({**v.to_dict(), "operation": operation_to_dict(op)}))
    return EXIT_OK


def cmd_swap_search(args, out) -> int:
    net = load(args.network)
    pair = tuple(_pair_list(args.pair)) if args.pair else None
    if pair is not None and len(pair) != 2:
        raise NetworkError("--pair expects v1,v2")
    res = search_positive_swaps(net, _model(args), pair, args.max_candidates)
    if args.format == "csv":
        rows = [(s.c1[0], s.c1[1], s.c2[0], s.c2[1], v.verdict.value) for s, v in res.hits]
        text = _csv(rows, ["u1", "v1", "u2", "v2", "verdict"])
        if res.truncated:
            text += f"# truncated: {res.reason}\n"
        out.write(text)
    else:
        out.write(_json({
            "candidates": res.candidates, "examined": res.examined,
            "truncated": res.truncated, "reason": res.reason,
            "hits": [{"swap": [list(s.c1), list(s.c2)], "verdict": v.verdict.value} for s, v in res.hits],
        }))
    return EXIT_OK


def cmd_tree_dp(args, out) -> int:
    from .tree_dp import tree_worst_set

    net = load(args.network)
    res = tree_worst_set(net, args.target, args.K)
    f = res.function
    if args.format == "object":
        out.write(_json({"bank": f.bank, "values": list(f.values), "merge_steps": res.merge_steps}))
    else:
        out.write(_csv([(k, fmt(x), "") for k, x in enumerate(f.values)], ["k", "value", "witness"]))
    return EXIT_OK


def cmd_gadget(args, out) -> int:
    spec = None
    if args.name:
        fx = paper_fixture(args.name)
        net, spec = fx.network, fx.operation
    elif args.boolean is not None:
        g = d_boolean(args.boolean, "worst_sum" if args.D is not None else "worst_set", args.D)
        net = g.attach(args.sink)
    elif args.fix is not None:
        g = one_fix(args.fix, "worst_sum" if args.sum_variant else "worst_set")
        net = g.attach(args.sink)
    elif args.densest:
        edges = [tuple(e.split("-")) for e in _pair_list(args.densest)]
        net, _ = densest_k_reduction(edges, model="worst_sum" if args.sum_variant else "worst_set")
    else:
        raise NetworkError("give --name, --boolean, --fix or --densest")
    text = dumps(net) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        out.write(text)
    if args.spec_out and spec is not None:
        Path(args.spec_out).write_text(_json(operation_to_dict(spec)), encoding="utf-8")
    return EXIT_OK


def cmd_verify(args, out) -> int:
    from .oracle import theorem_harness

    theorem = args.theorem.replace("-", "_")
    rep = theorem_harness(theorem, args.trials, args.seed, args.out)
    out.write(_json({"theorem": rep.theorem, "trials": rep.trials, "seed": rep.seed,
                     "specs_checked": rep.specs_checked, "verdicts": rep.verdicts,
                     "positives": rep.positives}))
    return EXIT_OK if rep.ok else EXIT_VIOLATION


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["csv", "object"], default=None)
    common.add_argument("--threads", type=int, default=1, help="worker threads for batched kernels")
    common.add_argument("--tol", type=float, default=1e-9)
    common.add_argument("--budget", type=int, default=DEFAULT_BUDGET, help="max enumerated configurations")

    def model_flags(p):
        p.add_argument("--model", choices=["base", "proportional", "worst-set", "worst-sum"], required=True)
        p.add_argument("--K", type=int)

    ap = argparse.ArgumentParser(prog="debtswap", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("clear", parents=[common], help="maximal clearing vector")
    p.add_argument("network")
    p.add_argument("--beta", type=float, help="default-cost factor in (0, 1]")
    p.add_argument("--method", choices=["fda", "picard"], default="fda")
    p.add_argument("--payments", action="store_true", help="emit per-contract payments")
    p.set_defaults(func=cmd_clear, default_format="csv")

    p = sub.add_parser("shock", parents=[common], help="shock function of one bank")
    p.add_argument("network")
    p.add_argument("--model", choices=["proportional", "worst-set", "worst-sum"], required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--K", type=int)
    p.add_argument("--rho", type=float, help="single worst-sum evaluation")
    p.add_argument("--lambda-grid", type=int, help="sample the proportional function on N intervals")
    p.add_argument("--rho-grid", type=int, help="sample the worst-sum function on N intervals")
    p.add_argument("--max-depth", type=int, default=12)
    p.add_argument("--chord-tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_shock, default_format="csv")

    p = sub.add_parser("swap-check", parents=[common], help="classify one operation")
    p.add_argument("network")
    model_flags(p)
    p.add_argument("--swap", help="u1,v1,u2,v2")
    p.add_argument("--portfolio", help="v1:v2:u,u:u,u")
    p.add_argument("--reorg", help="u1>v1,u2>v2,...")
    p.add_argument("--perm", help="comma-separated permutation for --reorg")
    p.add_argument("--spec", help="JSON file with the operation")
    p.add_argument("--observe", help="extra banks to report")
    p.set_defaults(func=cmd_swap_check, default_format="object")

    p = sub.add_parser("swap-search", parents=[common], help="find positive swaps")
    p.add_argument("network")
    model_flags(p)
    p.add_argument("--pair", help="restrict to swaps between v1,v2")
    p.add_argument("--max-candidates", type=int)
    p.set_defaults(func=cmd_swap_search, default_format="object")

    p = sub.add_parser("tree-dp", parents=[common], help="worst-set function on a tree network")
    p.add_argument("network")
    p.add_argument("--target", required=True)
    p.add_argument("--K", type=int, required=True)
    p.set_defaults(func=cmd_tree_dp, default_format="csv")

    p = sub.add_parser("gadget", parents=[common], help="build reference networks")
    gsub = p.add_subparsers(dest="gadget_command", required=True)
    g = gsub.add_parser("build", parents=[common])
    g.add_argument("--name", choices=sorted(FIXTURES))
    g.add_argument("--boolean", type=int, metavar="D", help="d-boolean gadget attached to --sink")
    g.add_argument("--D", type=float, help="worst-sum variant of the boolean gadget")
    g.add_argument("--fix", type=int, metavar="K", help="1-fix gadget attached to --sink")
    g.add_argument("--densest", help="edge list a-b,b-c,... for the densest-k reduction")
    g.add_argument("--sum-variant", action="store_true", help="worst-sum variant for --fix / --densest")
    g.add_argument("--sink", default="t")
    g.add_argument("--out")
    g.add_argument("--spec-out", help="also write the fixture's operation as JSON")
    g.set_defaults(func=cmd_gadget, default_format="object")

    p = sub.add_parser("verify", parents=[common], help="randomized theorem checks")
    p.add_argument("--theorem", choices=["nopos-base", "noport-base", "nopos-prop"], required=True)
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", help="directory for counterexample files")
    p.set_defaults(func=cmd_verify, default_format="object")
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    if args.format is None:
        args.format = args.default_format
    _kernels.set_threads(args.threads)
    try:
        return args.func(args, out)
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (NetworkError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
