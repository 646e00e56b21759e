"""Command-line front end: solve, simulate, stats, compare."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
import warnings
from pathlib import Path

from .core import Model, uniform_interactive_belief
from .domains import BUILDERS, DomainSpec, builtin, nested_model_space
from .io import (FormatError, load_domain, load_json, load_policy, load_trace, policy_model,
                 save_policy, save_trace, write_csv)
from .simulate import save_report, simulate
from .solver import METHODS, SolverConfig, solve

log = logging.getLogger("idid")


def load_spec(name: str) -> DomainSpec:
    if name in BUILDERS:
        return builtin(name)
    p = Path(name)
    if p.exists():
        return load_domain(p)
    raise FormatError(f"unknown domain {name!r}: not a builtin ({', '.join(sorted(BUILDERS))}) "
                      "and no such file")


def _read_beliefs(path: str) -> list:
    doc = load_json(path)
    beliefs = doc.get("beliefs")
    if not isinstance(beliefs, list) or not beliefs:
        raise FormatError(f"{path}: expected a non-empty 'beliefs' list")
    return beliefs


def build_subject(spec: DomainSpec, args) -> Model:
    if args.models:
        beliefs = _read_beliefs(args.models)
    elif args.num_models is not None:
        beliefs = args.num_models
    else:
        beliefs = None
    space = nested_model_space(spec, args.level, beliefs, args.seed)
    b = uniform_interactive_belief(spec.subject_frame.n_states, space.ids)
    return Model(b, spec.subject_frame, args.level, 0, space)


def _config(args, method: str | None = None) -> SolverConfig:
    return SolverConfig(method or args.method, args.horizon, K=args.K, epsilon=args.epsilon,
                        seed=args.seed)


def _counts(trace) -> str:
    return ";".join(str(c) for c in trace.counts)


def cmd_solve(args) -> int:
    spec = load_spec(args.domain)
    model = build_subject(spec, args)
    cfg = _config(args)
    tree, value, trace = solve(model, cfg)
    out = Path(args.out)
    save_policy(out, tree, value, model, spec, cfg)
    trace_path = Path(args.trace) if args.trace else out.with_name(out.stem + ".trace.csv")
    save_trace(trace, trace_path)
    print(f"expected utility {value!r}")
    print(f"root action {model.frame.actions[tree.action]}")
    print(f"counts per step {_counts(trace)}")
    print(f"policy written to {out}; trace to {trace_path}")
    return 0


def cmd_simulate(args) -> int:
    doc = load_policy(args.policy)
    spec = load_spec(args.domain or doc["domain"])
    model = policy_model(doc, spec)
    report = simulate(doc["tree"], spec, model.belief, model.other_space, args.runs, args.seed,
                      keep_trajectories=args.trajectories)
    csv_path, side = save_report(report, args.out)
    print(f"mean reward {report.mean_reward!r} (std {report.std_dev!r}) over {report.runs} runs")
    print(f"report written to {csv_path} and {side}")
    return 0


def cmd_stats(args) -> int:
    trace = load_trace(args.trace)
    fr = args.branching
    rows = []
    for t, c in enumerate(trace.counts):
        row = {"t": t, "count": c,
               "model_count": trace.model_counts[t] if t < len(trace.model_counts) else c}
        if fr:
            row["bound"] = trace.initial_count * fr ** t
        rows.append(row)
    cols = ["t", "count", "model_count"] + (["bound"] if fr else [])
    write_csv(args.out, cols, rows)
    print(f"{len(rows)} steps written to {args.out}")
    return 0


def cmd_compare(args) -> int:
    spec = load_spec(args.domain)
    model = build_subject(spec, args)
    rows = []
    for method in args.methods.split(","):
        cfg = _config(args, method)
        t0 = time.perf_counter()
        tree, value, trace = solve(model, cfg)
        secs = time.perf_counter() - t0
        rows.append({"method": cfg.method, "expected_utility": repr(value),
                     "root_action": model.frame.actions[tree.action],
                     "counts": _counts(trace), "max_count": max(trace.counts, default=0),
                     "seconds": f"{secs:.3f}"})
    width = max(len(r["method"]) for r in rows)
    print(f"{'method':<{width}}  {'utility':>22}  {'root':>6}  {'seconds':>8}  counts")
    for r in rows:
        print(f"{r['method']:<{width}}  {r['expected_utility']:>22}  {r['root_action']:>6}  "
              f"{r['seconds']:>8}  {r['counts']}")
    if args.out:
        write_csv(args.out, list(rows[0]), rows)
    return 0


def _add_problem_args(p: argparse.ArgumentParser, with_method: bool = True) -> None:
    p.add_argument("--domain", required=True, help="builtin name or domain file")
    p.add_argument("--level", type=int, choices=(1, 2), default=1)
    p.add_argument("--horizon", type=int, required=True)
    if with_method:
        p.add_argument("--method", choices=METHODS, default="exact-be")
    p.add_argument("--K", type=int, default=None, help="models solved up front (default: all)")
    p.add_argument("--epsilon", type=float, default=0.0)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--models", help="JSON file with a 'beliefs' list")
    g.add_argument("--num-models", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)


def parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="idid", description="Solve and evaluate two-agent I-DIDs.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the subject's model and write its policy")
    _add_problem_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--trace", help="trace CSV path (default: <out>.trace.csv)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("simulate", help="execute a policy against sampled true models")
    p.add_argument("--policy", required=True)
    p.add_argument("--domain", help="defaults to the domain named in the policy file")
    p.add_argument("--runs", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--trajectories", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stats", help="per-step model/class counts from a trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--branching", type=int, default=None,
                   help="|A_j||Omega_j|; adds the |M0| * branching**t growth bound column")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("compare", help="solve with several methods side by side")
    _add_problem_args(p, with_method=False)
    p.add_argument("--methods", default="exact,exact-be,dmu,ae")
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("IDID_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return args.func(args)
    except (ValueError, KeyError, OSError, FormatError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
