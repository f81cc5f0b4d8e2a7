"""Command-line harness: ``procnet {calibrate,train,evaluate,oracle,compare}``.

Exit status is 0 on success. Failures print a single ``error[<category>]:``
line to stderr and exit with the category's code.
"""
from __future__ import annotations

import argparse
import logging
import re
import sys
import time
from pathlib import Path

import numpy as np

from . import kernel
from .artifacts import (
    ArtifactError,
    moving_average,
    read_discretizer,
    read_qtable,
    trace_rows,
    write_curve_csv,
    write_discretizer,
    write_qtable,
    write_trace_csv,
)
from .config import ConfigError, ExperimentConfig, load_config
from .env import (
    Discretizer,
    EpisodeResult,
    Scenario,
    brute_force_best,
    calibration_samples,
    evaluate_many,
    run_episode,
    static_policy,
)
from .model import NumericalError
from .qlearning import run_greedy, train

log = logging.getLogger("procnet")

EXIT_CODES = {"usage": 2, "config": 3, "io": 4, "input": 5, "numerical": 6}

#: Moving-average window (steps) for the smoothed trace CSV: one decision window.
MA_WINDOW = 50


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


def _load(args) -> ExperimentConfig:
    if args.config is None:
        return ExperimentConfig()
    if not Path(args.config).is_file():
        raise CliError("io", f"config file {args.config} not found")
    return load_config(args.config)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


_ALL_A = re.compile(r"^all-(\d+)$", re.IGNORECASE)


def resolve_policy(spec: str, scenario: Scenario) -> tuple[str, tuple[int, ...], EpisodeResult | None]:
    """Turn ``All-a``, a comma list, or a Q-table path into decisions.

    Returns ``(label, decisions, result)``; ``result`` is set when the policy
    is a table (the greedy episode has already been run).
    """
    m = _ALL_A.match(spec)
    if m:
        a = int(m.group(1))
        if a > scenario.N:
            raise CliError("input", f"All-{a} needs {a} sensors, the scenario has {scenario.N}")
        return f"All-{a}", static_policy(scenario, a), None
    if re.fullmatch(r"\s*\d+(\s*,\s*\d+)*\s*", spec):
        decisions = tuple(int(x) for x in spec.split(","))
        if len(decisions) != scenario.L:
            raise CliError("input", f"decision list has {len(decisions)} entries, need {scenario.L}")
        if max(decisions) > scenario.N:
            raise CliError("input", f"decisions must lie in 0..{scenario.N}")
        return "list", decisions, None
    path = Path(spec)
    if not path.is_file():
        raise CliError("input", f"policy {spec!r} is not All-a, a decision list, or an existing table file")
    q, disc = read_qtable(path)
    if q.n_actions != scenario.N + 1:
        raise CliError("input", f"table {spec} has {q.n_actions} actions, scenario needs {scenario.N + 1}")
    res = run_greedy(scenario, disc, q)
    return path.name, res.decisions, res


def _fmt_decisions(d) -> str:
    return " ".join(str(a) for a in d)


# -- subcommands ---------------------------------------------------------------


def cmd_calibrate(args) -> int:
    cfg = _load(args)
    sc = cfg.scenario()
    M = args.bins or cfg.learning.bins
    samples = calibration_samples(sc)
    disc = Discretizer.from_samples(samples, M)
    out = _outdir(args)
    path = out / "discretizer.txt"
    write_discretizer(disc, path)
    print(f"bins: {disc.M}")
    print("edges: " + " ".join(f"{e:.6g}" for e in disc.edges))
    print("occupancy: " + " ".join(str(int(c)) for c in disc.occupancy(samples)))
    print(f"wrote {path}")
    return 0


def cmd_train(args) -> int:
    cfg = _load(args)
    if args.calibration is None or not Path(args.calibration).is_file():
        raise CliError("io", "training needs a calibration file; run `procnet calibrate` first")
    disc = read_discretizer(args.calibration)
    if disc.M != cfg.learning.bins:
        log.warning("calibration has %d bins, config says %d; using the calibration", disc.M, cfg.learning.bins)
    sc = cfg.scenario()
    params = cfg.learning_params(
        seed=args.seed, episodes=args.episodes, early_stop=0 if args.no_early_stop else None
    )
    t0 = time.perf_counter()
    res = train(sc, disc, params)
    elapsed = time.perf_counter() - t0
    greedy = run_greedy(sc, disc, res.table)
    out = _outdir(args)
    write_qtable(res.table, disc, out / "qtable.txt")
    write_curve_csv(res.returns, res.greedy_evals, out / "training_curve.csv")
    (out / "policy.txt").write_text(
        f"state_policy {_fmt_decisions(res.policy)}\n"
        f"decisions {_fmt_decisions(greedy.decisions)}\n"
        f"cost {greedy.cost!r}\n"
        f"return {greedy.ret!r}\n"
    )
    print(f"seed {params.seed}: {res.episodes_run} episodes in {elapsed:.1f} s ({kernel.BACKEND} kernel)")
    print(f"greedy decisions: {_fmt_decisions(greedy.decisions)}")
    print(f"cost {greedy.cost:.4f}  return {greedy.ret:.3f}")
    print(f"wrote {out / 'qtable.txt'}, {out / 'training_curve.csv'}, {out / 'policy.txt'}")
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load(args)
    sc = cfg.scenario()
    label, decisions, res = resolve_policy(args.policy, sc)
    if res is None:
        res = run_episode(sc, decisions)
    print(f"policy {label}: decisions {_fmt_decisions(decisions)}")
    print(f"cost {res.cost:.6f}  return {res.ret:.6f}  discarded {res.discarded}")
    if args.out:
        out = _outdir(args)
        with open(out / "evaluation.csv", "a") as fh:
            if fh.tell() == 0:
                fh.write("policy,decisions,cost,return\n")
            fh.write(f"{label},{_fmt_decisions(decisions)},{res.cost!r},{res.ret!r}\n")
    starts = sc.schedule.decision_times
    if args.csv:
        write_trace_csv(trace_rows(res, sc.K, starts), args.csv)
    if args.ma_csv:
        rows = trace_rows(res, sc.K, starts)
        ma = moving_average(np.array([r[1] for r in rows]), args.ma_window)
        write_trace_csv([(k, float(m), l, a) for (k, _, l, a), m in zip(rows, ma)], args.ma_csv, "trace_ma")
    return 0


def cmd_oracle(args) -> int:
    cfg = _load(args)
    sc = cfg.scenario()
    L = args.windows
    if not 1 <= L <= sc.L:
        raise CliError("input", f"--windows must lie in 1..{sc.L}")
    seq, best = brute_force_best(sc, L)
    short = sc.truncated(L)
    statics = {a: run_episode(short, static_policy(short, a)).cost for a in short.actions}
    print(f"oracle over {L} windows ({(sc.N + 1) ** L} sequences): {_fmt_decisions(seq)}  cost {best:.6f}")
    for a, c in statics.items():
        print(f"  All-{a}: cost {c:.6f}")
    if args.table:
        q, disc = read_qtable(args.table)
        if q.n_actions != sc.N + 1:
            raise CliError("input", f"table has {q.n_actions} actions, scenario needs {sc.N + 1}")
        res = run_greedy(short, disc, q)
        gap = res.cost / best - 1
        print(f"learned: {_fmt_decisions(res.decisions)}  cost {res.cost:.6f}  gap {100 * gap:.3f}%")
    return 0


def cmd_compare(args) -> int:
    cfg = _load(args)
    sc = cfg.scenario()
    rows: list[tuple[str, tuple[int, ...]]] = [(f"All-{a}", static_policy(sc, a)) for a in sc.actions]
    for t in args.tables or []:
        label, decisions, _ = resolve_policy(t, sc)
        rows.append((label, decisions))
    scores = evaluate_many(sc, [d for _, d in rows], jobs=args.jobs, with_return=True)
    table = sorted((c, label, d, r) for (label, d), (c, r) in zip(rows, scores))
    print(f"{'policy':<14} {'cost':>10} {'return':>11}  decisions")
    for c, label, d, r in table:
        print(f"{label:<14} {c:>10.4f} {r:>11.3f}  {_fmt_decisions(d)}")
    if args.out:
        out = _outdir(args)
        with open(out / "compare.csv", "w") as fh:
            fh.write("policy,decisions,cost,return\n")
            for c, label, d, r in table:
                fh.write(f"{label},{_fmt_decisions(d)},{c!r},{r!r}\n")
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="procnet", description="Sensing-policy learning for processing networks.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default=None):
        sp.add_argument("--config", help="YAML experiment file (defaults apply when omitted)")
        sp.add_argument("--out", default=out_default, help="output directory")

    sp = sub.add_parser("calibrate", help="build the tr(P) discretizer from static-policy episodes")
    common(sp, "runs")
    sp.add_argument("--bins", type=int, help="number of bins (default: config)")
    sp.set_defaults(func=cmd_calibrate)

    sp = sub.add_parser("train", help="learn a Q-table")
    common(sp, "runs")
    sp.add_argument("--calibration", help="discretizer file written by `calibrate`")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--episodes", type=int)
    sp.add_argument("--no-early-stop", action="store_true")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="cost and return of one policy")
    common(sp)
    sp.add_argument("policy", help="All-a, a comma-separated decision list, or a Q-table file")
    sp.add_argument("--csv", help="write per-step tr(P_k) to this CSV")
    sp.add_argument("--ma-csv", help="write the moving-average trace to this CSV")
    sp.add_argument("--ma-window", type=int, default=MA_WINDOW)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("oracle", help="brute-force the best decisions over the first windows")
    common(sp)
    sp.add_argument("--windows", type=int, default=3)
    sp.add_argument("--table", help="Q-table whose greedy policy is graded against the oracle")
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("compare", help="static policies and learned tables side by side")
    common(sp)
    sp.add_argument("tables", nargs="*", help="extra policies (tables, lists, or All-a)")
    sp.add_argument("--jobs", type=int, default=1, help="worker processes")
    sp.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        category, msg = exc.category, str(exc)
    except ConfigError as exc:
        category, msg = "config", str(exc)
    except ArtifactError as exc:
        category, msg = "io", str(exc)
    except NumericalError as exc:
        category, msg = "numerical", str(exc)
    except OSError as exc:
        category, msg = "io", f"{exc.filename or ''}: {exc.strerror}".lstrip(": ")
    except ValueError as exc:
        category, msg = "input", str(exc)
    print(f"error[{category}]: {msg}", file=sys.stderr)
    return EXIT_CODES[category]


if __name__ == "__main__":
    sys.exit(main())
