"""Command-line front end.

Exit codes: 0 success, 1 infeasible experiment (a subset size exceeds the
values seen so far), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import control_solver as cs
from . import harness
from .core import ProblemInstance, TieBreaker, parse_distribution
from .profiles import InfeasibleSchedule

EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE = 0, 1, 2


def _default_seed() -> int:
    env = os.environ.get("PROPHET_SEED")
    if env is None or env == "":
        return 0
    try:
        return int(env, 0)
    except ValueError:
        raise SystemExit(f"PROPHET_SEED must be an integer, got {env!r}") from None


def _floats(text: str) -> list:
    text = text.strip()
    return [float(x) for x in text.split(",") if x.strip()] if text else []


def _json_default(o):
    if isinstance(o, float) and not math.isfinite(o):
        return None
    raise TypeError(type(o).__name__)


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


GNUPLOT_SIMULATE = """# columns: {cols}
set datafile separator ','
set key autotitle columnhead
set xlabel '{xlabel}'
set ylabel 'ratio'
plot '{csv}' using {x}:{y}:({err}*3) with yerrorbars title 'mean +- 3 stderr'
"""

GNUPLOT_TABLE1 = """set datafile separator ','
set key autotitle columnhead left bottom
set xlabel 'beta'
set ylabel 'alpha'
set xrange [0:1.5]
plot '{csv}' using 1:2 with linespoints title 'solved', \\
     '{csv}' using 1:5 with points title 'reference', \\
     -x*log(x/(1+x)) title '-x ln(x/(1+x))', (1+x)/exp(1) title '(1+x)/e'
"""


def _write_gnuplot(script_path: str, csv_text: str, csv_path: str | None, kind: str) -> None:
    """Write a gnuplot script; the CSV goes next to it unless --output named a file."""
    script = Path(script_path)
    data = Path(csv_path) if csv_path else script.with_suffix(".csv")
    if not csv_path:
        data.write_text(csv_text, encoding="utf-8")
    if kind == "table1":
        body = GNUPLOT_TABLE1.format(csv=data.name)
    else:
        cols = list(harness.CSV_COLUMNS)
        x = cols.index("a") + 1 if kind == "sweep" else cols.index("n") + 1
        body = GNUPLOT_SIMULATE.format(cols=",".join(cols), csv=data.name, x=x,
                                       y=cols.index("mean") + 1,
                                       err=f"${cols.index('stderr') + 1}",
                                       xlabel="a" if kind == "sweep" else "n")
    script.write_text(body, encoding="utf-8")


# -- commands -----------------------------------------------------------------------

def cmd_solve(args, parser) -> int:
    if args.problem == "q":
        if args.beta is None:
            parser.error("solve q requires --beta")
        if not 0 < args.beta:
            parser.error("--beta must be positive")
        sol = cs.solve_q(args.beta)
    else:
        if args.beta is not None:
            parser.error("solve p takes no --beta")
        sol = cs.solve_p()
    d = sol.as_dict()
    if args.json:
        sys.stdout.write(json.dumps(d, indent=2, sort_keys=True, default=_json_default) + "\n")
        return EXIT_OK
    for key in ("problem", "beta", "alpha", "mu_bar", "a_star", "t_star"):
        if d.get(key) is not None:
            sys.stdout.write(f"{key}: {d[key]!r}\n")
    for key, val in sorted(d["residuals"].items()):
        sys.stdout.write(f"residual.{key}: {val!r}\n")
    for flag in d["flags"]:
        sys.stdout.write(f"flag: {flag}\n")
    return EXIT_OK


def cmd_table1(args, parser) -> int:
    try:
        betas = _floats(args.betas) if args.betas is not None else list(cs.DEFAULT_BETAS)
    except ValueError:
        parser.error(f"--betas must be a comma-separated list of numbers, got {args.betas!r}")
    if any(not b > 0 for b in betas):
        parser.error("every beta must be positive")
    rows = cs.table1(betas, workers=args.workers)
    if args.json:
        _emit(json.dumps({"config": {"betas": betas}, "rows": rows}, indent=2, sort_keys=True) + "\n",
              args.output)
        return EXIT_OK
    text = cs.table1_csv(rows)
    _emit(text, args.output)
    if args.gnuplot:
        _write_gnuplot(args.gnuplot, text, args.output, "table1")
    return EXIT_OK


def _resolve_run(args, parser):
    """(rule, n, k, seed) from simulate/sweep flags, or a usage error."""
    if args.k is not None and args.beta is not None:
        parser.error("give at most one of --k and --beta")
    if args.n < 1:
        parser.error("--n must be at least 1")
    if args.trials < 1:
        parser.error("--trials must be at least 1")
    if args.k is not None and args.k < 0:
        parser.error("--k must be nonnegative")
    if args.beta is not None and args.beta < 0:
        parser.error("--beta must be nonnegative")
    kind = args.algo.partition(":")[0].lower()
    if kind not in ("mrs", "streaming", "secretary"):
        parser.error("--algo must be mrs:<profile>, streaming:<profile> or secretary")
    if kind == "streaming" and args.epsilon is None:
        parser.error("streaming rules need --epsilon")
    if kind != "streaming" and args.epsilon is not None:
        parser.error("--epsilon applies to streaming rules only")
    beta = args.beta
    if kind == "secretary" and beta is None:
        beta = (args.k / args.n) if args.k is not None else 0.0
    try:
        rule = harness.parse_rule(args.algo, epsilon=args.epsilon, beta=beta, clamp=args.clamp)
        k = args.k if args.k is not None else harness.default_k(rule, args.n, beta)
        if kind == "secretary":
            from .secretary import check_beta
            check_beta(beta)
    except (ValueError, KeyError) as exc:
        parser.error(str(exc))
    seed = args.seed if args.seed is not None else _default_seed()
    return rule, args.n, k, seed


def _config(args, rule, n, k, seed, extra=None) -> dict:
    cfg = {"command": args.command, "algo": args.algo, "n": n, "k": k, "trials": args.trials,
           "seed": seed, "epsilon": args.epsilon, "beta": args.beta, "clamp": args.clamp,
           "rule_id": rule.id}
    if extra:
        cfg.update(extra)
    return cfg


def _infeasible(exc: InfeasibleSchedule) -> int:
    sys.stderr.write(f"infeasible: {exc}\n")
    return EXIT_INFEASIBLE


def cmd_simulate(args, parser) -> int:
    rule, n, k, seed = _resolve_run(args, parser)
    try:
        dist = parse_distribution(args.dist, n=n)
    except ValueError as exc:
        parser.error(str(exc))
    inst = ProblemInstance(n, k, dist, seed)
    tie = TieBreaker[args.tie.upper()]
    try:
        est = harness.monte_carlo_ratio(rule, inst, args.trials, tie=tie, denominator=args.denominator)
    except InfeasibleSchedule as exc:
        return _infeasible(exc)
    except ValueError as exc:
        parser.error(str(exc))
    cfg = _config(args, rule, n, k, seed, {"dist": args.dist, "tie": args.tie,
                                          "denominator": args.denominator})
    if args.json:
        _emit(harness.to_json([est], cfg) + "\n", args.output)
        return EXIT_OK
    text = harness.to_csv([est])
    _emit(text, args.output)
    if args.gnuplot:
        _write_gnuplot(args.gnuplot, text, args.output, "simulate")
    return EXIT_OK


def _a_grid(args, parser) -> list:
    if args.a_grid is not None:
        try:
            grid = _floats(args.a_grid)
        except ValueError:
            parser.error("--a-grid must be a comma-separated list of numbers")
    else:
        m = args.a_points
        if m < 1:
            parser.error("--a-points must be positive")
        grid = [round(0.05 + 0.9 * j / max(m - 1, 1), 10) for j in range(m)]
    if any(not 0.0 <= a < 1.0 for a in grid):
        parser.error("every a must lie in [0, 1)")
    return grid


def cmd_sweep(args, parser) -> int:
    rule, n, k, seed = _resolve_run(args, parser)
    grid = _a_grid(args, parser)
    try:
        sw = harness.sweep_two_point(rule, grid, n=n, trials=args.trials, seed=seed, k=k)
    except InfeasibleSchedule as exc:
        return _infeasible(exc)
    cfg = _config(args, rule, n, k, seed, {"dist": "two-point-max", "a_grid": grid,
                                          "argmin_a": sw.argmin_a, "min_ratio": sw.min_ratio})
    if args.json:
        _emit(harness.to_json(sw.estimates, cfg) + "\n", args.output)
        return EXIT_OK
    text = harness.to_csv(sw.estimates)
    _emit(text, args.output)
    sys.stderr.write(f"argmin_a: {sw.argmin_a!r} min_ratio: {sw.min_ratio!r}\n")
    if args.gnuplot:
        _write_gnuplot(args.gnuplot, text, args.output, "sweep")
    return EXIT_OK


def cmd_report(args, parser) -> int:
    from . import plotting
    from .profiles import UnconstrainedOpt
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed if args.seed is not None else _default_seed()
    sol_p = cs.solve_p()
    rows = cs.table1(cs.DEFAULT_BETAS, mu_bar=sol_p.mu_bar, workers=args.workers)
    written = []
    (out / "table1.csv").write_text(cs.table1_csv(rows), encoding="utf-8")
    written.append(out / "table1.csv")
    written.append(plotting.plot_table1(rows, out / "table1.png", p_alpha=sol_p.alpha))
    profs = plotting.report_profiles(sol_p.mu_bar)
    written.append(plotting.plot_profiles(profs, out / "profiles.png"))
    written.append(plotting.plot_pointwise(profs, out / "pointwise.png"))
    if args.trials > 0:
        grid = [round(0.05 + 0.05 * j, 10) for j in range(18)]
        sw = harness.sweep_two_point("mrs:opt", grid, n=args.n, trials=args.trials, seed=seed)
        (out / "sweep_opt.csv").write_text(harness.to_csv(sw.estimates), encoding="utf-8")
        written.append(out / "sweep_opt.csv")
        written.append(plotting.plot_sweep(sw, out / "sweep_opt.png", UnconstrainedOpt(sol_p.mu_bar)))
    for p in written:
        sys.stdout.write(f"{p}\n")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------

def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--algo", required=True, help="mrs:<profile>, streaming:<profile> or secretary; "
                   "profiles: opt, three-step, constrained:beta=B,t=T, const:C, custom:@file.csv")
    p.add_argument("--n", type=int, default=harness.DEFAULT_N, help="number of online values")
    p.add_argument("--k", type=int, help="number of upfront samples")
    p.add_argument("--beta", type=float, help="sample budget; k = floor(beta n)")
    p.add_argument("--trials", type=int, default=harness.DEFAULT_TRIALS)
    p.add_argument("--seed", type=int, help="master seed (default: $PROPHET_SEED or 0)")
    p.add_argument("--epsilon", type=float, help="grid width for streaming rules")
    p.add_argument("--clamp", action="store_true",
                   help="clamp subset sizes to the values seen instead of failing with exit 1")
    p.add_argument("--output", help="write CSV/JSON here instead of stdout")
    p.add_argument("--json", action="store_true", help="emit JSON with the full config echo")
    p.add_argument("--gnuplot", metavar="SCRIPT", help="also write a gnuplot script for the CSV")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrs-prophet",
                                     description="Prophet inequalities with samples: solve, "
                                                 "tabulate and simulate stopping rules.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the unconstrained (p) or budgeted (q) control problem")
    p.add_argument("problem", choices=["p", "q"])
    p.add_argument("--beta", type=float, help="sample budget (required for q)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("table1", help="ratio, t and a for a list of sample budgets, as CSV")
    p.add_argument("--betas", help="comma-separated budgets (default 1.4,1.3,...,0.1; '' for none)")
    p.add_argument("--workers", type=int, default=1, help="processes for solving rows")
    p.add_argument("--output")
    p.add_argument("--json", action="store_true")
    p.add_argument("--gnuplot", metavar="SCRIPT")
    p.set_defaults(func=cmd_table1)

    p = sub.add_parser("simulate", help="Monte Carlo ratio of one rule on one distribution")
    _run_flags(p)
    p.add_argument("--dist", required=True, help="two-point:A (per-draw zero probability), "
                   "two-point-max:A (max is zero w.p. A), uniform01, exp:RATE, adversarial:N, "
                   "empirical:@file.csv or empirical:v1,v2,...")
    p.add_argument("--tie", choices=["jitter", "strict"], default="jitter")
    p.add_argument("--denominator", choices=["auto", "exact", "paired"], default="auto")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="ratio over two-point instances indexed by a = P[max = 0]")
    _run_flags(p)
    p.add_argument("--a-grid", help="comma-separated a values in [0, 1)")
    p.add_argument("--a-points", type=int, default=19, help="evenly spaced a in [0.05, 0.95]")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="write the beta table, profile and sweep figures (PNG) and CSVs")
    p.add_argument("--outdir", default="report")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--trials", type=int, default=20_000, help="0 skips the Monte Carlo sweep")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args, parser)


if __name__ == "__main__":
    sys.exit(main())
