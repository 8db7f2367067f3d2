"""Command-line interface.

Subcommands: synthesize, verify, demonstrate, simulate, benchmark.
Exit codes: 0 success/valid, 2 no CLF found (empty/converged) or
counterexample, 3 budget exhausted, 64 usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from typing import Optional

import numpy as np

EX_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(EX_USAGE)


def _load_problem_arg(args):
    from .dynamics import load_benchmark
    from .probio import load_problem

    if args.benchmark:
        return load_benchmark(args.benchmark)
    if args.problem:
        return load_problem(args.problem)
    raise SystemExit(EX_USAGE)


def _add_problem_args(p):
    p.add_argument("problem", nargs="?", help="problem JSON file")
    p.add_argument("--benchmark", choices=("double_integrator", "tora",
                                           "bicycle", "inverted_pendulum"),
                   help="use a shipped benchmark instead of a file")


def _load_clf(args, problem):
    import os

    from .poly import Polynomial
    from .probio import parse_poly

    spec = args.clf
    if os.path.exists(spec):
        with open(spec) as fh:
            doc = json.load(fh)
        if "coefficients" in doc:
            return problem.candidate(np.asarray(doc["coefficients"], float))
        if "expression" in doc:
            variables = doc.get("variables",
                                [f"x{i + 1}" for i in range(problem.system.n)])
            return parse_poly(doc["expression"], variables)
        raise ValueError("CLF file needs 'coefficients' or 'expression'")
    variables = [f"x{i + 1}" for i in range(problem.system.n)]
    return parse_poly(spec, variables)


def _synth_config(problem, args):
    from .engine import default_config

    kw = {}
    if args.tau is not None or args.horizon is not None:
        kw["tau"] = args.tau if args.tau is not None else 0.25
        kw["horizon"] = args.horizon if args.horizon is not None else 5.0
    cfg = default_config(problem, D_V=args.dv, **kw)
    if args.max_iterations:
        cfg.max_iterations = args.max_iterations
    if args.max_seconds:
        cfg.max_seconds = args.max_seconds
    return cfg


def cmd_synthesize(args) -> int:
    from .engine import synthesize

    problem = _load_problem_arg(args)
    cfg = _synth_config(problem, args)
    report = synthesize(problem, cfg, log_path=args.log)
    if args.out:
        report.save(args.out)
    print(f"outcome: {report.outcome}")
    print(f"iterations: {report.iterations}")
    print(f"seconds: {report.total_seconds:.1f}")
    if report.coefficients is not None:
        from .probio import format_poly

        variables = [f"x{i + 1}" for i in range(problem.system.n)]
        V = problem.candidate(report.coefficients)
        print(f"coefficients: {report.coefficients.tolist()}")
        print(f"V = {format_poly(V, variables)}")
    return report.exit_code


def cmd_verify(args) -> int:
    from .verifier import Valid, VerifierConfig, project, required_degree, verify

    problem = _load_problem_arg(args)
    V = _load_clf(args, problem)
    D = args.dv or max(2, required_degree(problem))
    verdict = verify(V, problem, VerifierConfig(D_V=D,
                                                reach_while_stay=args.rws))
    if isinstance(verdict, Valid):
        print("verdict: Valid")
        return 0
    w = verdict.witness
    print(f"verdict: Counterexample ({w.kind})")
    print(f"projected state: {project(w, problem.S_box).tolist()}")
    if w.lam is not None:
        print(f"multipliers: {w.lam.tolist()}")
    return 2


def cmd_demonstrate(args) -> int:
    from .demonstrator import default_mpc_config, demonstrate

    problem = _load_problem_arg(args)
    x = np.asarray([float(v) for v in args.state.split(",")], float)
    cfg = default_mpc_config(problem.system.n, problem.system.m,
                             tau=args.tau or 0.25, horizon=args.horizon or 5.0)
    demo = demonstrate(problem, cfg, x)
    print(f"u: {','.join(f'{v:.9g}' for v in demo.u)}")
    print(f"cost: {demo.cost:.6g}")
    print(f"converged: {demo.converged}")
    n, m = problem.system.n, problem.system.m
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + [f"u{i + 1}" for i in range(m)]
    print(",".join(header))
    for k, xs in enumerate(demo.planned_states):
        t = k * cfg.tau
        us = demo.planned_inputs[k] if k < len(demo.planned_inputs) else [float("nan")] * m
        row = [f"{t:.6g}"] + [f"{v:.9g}" for v in xs] + [f"{v:.9g}" for v in us]
        print(",".join(row))
    return 0


def cmd_simulate(args) -> int:
    from .feedback import FeedbackLaw
    from .poly import Polynomial
    from .simulator import simulate

    problem = _load_problem_arg(args)
    V = _load_clf(args, problem)
    x0 = np.asarray([float(v) for v in args.x0.split(",")], float)
    mode = "sontag" if args.law == "sontag" else "min_norm"
    law = FeedbackLaw(V=V, sys=problem.system, mode=mode,
                      U=problem.U if mode == "min_norm" else None,
                      sigma=args.sigma)
    traj = simulate(problem.system, law, x0, args.t_end, h=args.step,
                    S=problem.S, V=V, target_radius=args.target_radius)
    n, m = problem.system.n, problem.system.m
    header = ["t"] + [f"x{i + 1}" for i in range(n)] + \
        [f"u{i + 1}" for i in range(m)] + ["V"]
    print(",".join(header))
    for k in range(len(traj.times)):
        us = traj.inputs[k] if k < len(traj.inputs) else [float("nan")] * m
        row = [f"{traj.times[k]:.6g}"] + [f"{v:.9g}" for v in traj.states[k]] + \
            [f"{v:.9g}" for v in us] + [f"{traj.V_values[k]:.9g}"]
        print(",".join(row))
    return 0


_BENCH_SETTINGS = {
    "double_integrator": {"dv": 2, "tau": 0.25, "horizon": 5.0},
    "tora": {"dv": 4, "tau": 1.0, "horizon": 30.0},
    "bicycle": {"dv": 3, "tau": 0.4, "horizon": 8.0},
    "inverted_pendulum": {"dv": 5, "tau": 0.04, "horizon": 2.0},
}


def cmd_benchmark(args) -> int:
    from .dynamics import load_benchmark
    from .engine import default_config, synthesize

    names = (list(_BENCH_SETTINGS) if args.all else
             [n for n in args.names if n in _BENCH_SETTINGS])
    if not names:
        print("nothing to run; pass --all or benchmark names", file=sys.stderr)
        return EX_USAGE
    rows = []
    for name in names:
        problem = load_benchmark(name)
        s = _BENCH_SETTINGS[name]
        cfg = default_config(problem, D_V=s["dv"], tau=s["tau"],
                             horizon=s["horizon"])
        if args.max_seconds:
            cfg.max_seconds = args.max_seconds
        t0 = time.monotonic()
        report = synthesize(problem, cfg)
        rows.append((name, problem.system.n, problem.system.m, s["tau"],
                     s["horizon"], s["dv"], report.iterations,
                     (time.monotonic() - t0) / 60.0, report.outcome))
    print(f"{'system':<20} {'n':>2} {'m':>2} {'tau':>5} {'T':>5} {'D_V':>3} "
          f"{'#itr':>5} {'time(min)':>9} outcome")
    for row in rows:
        print(f"{row[0]:<20} {row[1]:>2} {row[2]:>2} {row[3]:>5.2f} {row[4]:>5.1f} "
              f"{row[5]:>3} {row[6]:>5} {row[7]:>9.1f} {row[8]}")
    return 0 if all(r[8] == "success" for r in rows) else 2


def build_parser() -> _Parser:
    p = _Parser(prog="clfsyn",
                description="Control Lyapunov function synthesis from "
                            "counterexamples and demonstrations")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("synthesize", help="run the synthesis loop")
    _add_problem_args(ps)
    ps.add_argument("--out", help="write the report JSON here")
    ps.add_argument("--log", help="write a JSON-lines iteration log here")
    ps.add_argument("--dv", type=int, help="relaxation degree bound")
    ps.add_argument("--tau", type=float, help="MPC time step")
    ps.add_argument("--horizon", type=float, help="MPC horizon")
    ps.add_argument("--max-iterations", type=int)
    ps.add_argument("--max-seconds", type=float)
    ps.set_defaults(func=cmd_synthesize)

    pv = sub.add_parser("verify", help="check a CLF candidate")
    _add_problem_args(pv)
    pv.add_argument("--clf", required=True,
                    help="coefficient/expression JSON file, or an expression")
    pv.add_argument("--dv", type=int)
    pv.add_argument("--rws", action="store_true",
                    help="also check reach-while-stay levels")
    pv.set_defaults(func=cmd_verify)

    pd = sub.add_parser("demonstrate", help="query the MPC demonstrator")
    _add_problem_args(pd)
    pd.add_argument("--state", required=True, help="comma-separated state")
    pd.add_argument("--tau", type=float)
    pd.add_argument("--horizon", type=float)
    pd.set_defaults(func=cmd_demonstrate)

    pm = sub.add_parser("simulate", help="closed-loop simulation")
    _add_problem_args(pm)
    pm.add_argument("--clf", required=True)
    pm.add_argument("--x0", required=True, help="comma-separated initial state")
    pm.add_argument("--law", choices=("sontag", "min-norm"), default="min-norm")
    pm.add_argument("--sigma", type=float, default=0.1)
    pm.add_argument("--t-end", type=float, default=10.0)
    pm.add_argument("--step", type=float, default=0.01)
    pm.add_argument("--target-radius", type=float, default=None)
    pm.set_defaults(func=cmd_simulate)

    pb = sub.add_parser("benchmark", help="run the shipped benchmark suite")
    pb.add_argument("names", nargs="*", help="benchmark names")
    pb.add_argument("--all", action="store_true")
    pb.add_argument("--max-seconds", type=float)
    pb.set_defaults(func=cmd_benchmark)
    return p


def cli(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EX_USAGE
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EX_USAGE


def main():
    sys.exit(cli())


if __name__ == "__main__":
    main()
