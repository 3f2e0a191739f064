"""Command-line front end: ``ncarq run | sweep | replay``."""

from __future__ import annotations

import argparse
import csv
import difflib
import io
import json
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .analytics import analytic_summary
from .engine import (
    ConfigError,
    ScheduleError,
    SimConfig,
    TraceWriter,
    load_schedule,
    replay_header,
    replay_rows,
    run_scripted,
    run_simulation,
)
from .fastsim import dof_paths, run_dof
from .receiver import InvariantViolation

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_GOLDEN = 2
EXIT_INVARIANT = 3


class UsageError(Exception):
    pass


class RegressionError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mu", type=float, default=0.5, help="per-receiver success probability")
    p.add_argument("--receivers", type=int, default=1)
    p.add_argument("--field", type=int, default=None, help="prime field order")
    p.add_argument("--slots", type=int, default=10_000)
    p.add_argument("--warmup", type=int, default=None, help="slots excluded from statistics (default 10%%)")
    p.add_argument("--decode-rule", choices=["empty", "exact"], default="empty")
    p.add_argument("--payload-len", type=int, default=0, help="payload symbols per packet")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ncarq", description="Feedback-based network coding broadcast simulator")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run one simulation and print a JSON summary")
    run.add_argument("--alg", choices=["dws", "dwd"], default="dws")
    load = run.add_mutually_exclusive_group()
    load.add_argument("--lambda", dest="lam", type=float, help="arrival probability per slot")
    load.add_argument("--rho", type=float, help="load factor lambda/mu")
    _add_model_flags(run)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--engine", choices=["exact", "dof"], default="exact")
    run.add_argument("--check-mirrors", action="store_true", help="compare sender mirrors to receivers every slot")
    run.add_argument("--trace", type=Path, help="write the per-slot CSV trace here")
    run.add_argument("--out", type=Path, help="write the summary here instead of stdout")
    run.add_argument("--format", choices=["json", "csv"], default="json")

    sw = sub.add_parser("sweep", help="sweep the load factor and fit queue-size scaling exponents")
    sw.add_argument("--rho-values", type=float, nargs="+", default=[0.8, 0.9, 0.95])
    _add_model_flags(sw)
    sw.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    sw.add_argument("--algs", choices=["dws", "dwd"], nargs="+", default=["dws", "dwd"])
    sw.add_argument("--engine", choices=["exact", "dof"], default="dof")
    sw.add_argument("--jobs", type=int, default=1)
    sw.add_argument("--table", type=Path, help="CSV table path (default stdout)")
    sw.add_argument("--out", type=Path, help="JSON slopes path (default stdout)")

    rp = sub.add_parser("replay", help="replay a scripted schedule and print the per-slot table")
    rp.add_argument("schedule", nargs="?", type=Path, help="schedule JSON (default: bundled two-receiver example)")
    rp.add_argument("--assert", dest="golden", metavar="GOLDEN",
                    help="compare against a golden CSV ('builtin' for the bundled one)")
    rp.add_argument("--out", type=Path)
    return parser


# --- run ---------------------------------------------------------------------------


def config_from_args(args, algorithm: str, lam: float, seed: int) -> SimConfig:
    return SimConfig(
        lam=lam,
        mu=args.mu,
        n=args.receivers,
        q=args.field,
        slots=args.slots,
        seed=seed,
        algorithm=algorithm,
        decode_rule=args.decode_rule,
        warmup=args.warmup,
        payload_len=args.payload_len,
    )


def summary_json(stats, cfg: SimConfig) -> dict:
    d = stats.to_dict()
    out = {
        "schema_version": SCHEMA_VERSION,
        "config": d.pop("config"),
        "engine": d.pop("engine"),
        "mean_Q": d.pop("mean_Q"),
        "mean_Qj": d.pop("mean_Qj"),
        "max_Q": d.pop("max_Q"),
        "analytic": analytic_summary(cfg.lam, cfg.mu, cfg.n),
        "noninnovative_count": d.pop("noninnovative_count"),
    }
    out.update(d)
    return out


def simulate(cfg: SimConfig, engine: str, check_mirrors: bool = False, trace=None):
    if engine == "dof":
        return run_dof(cfg)
    return run_simulation(cfg, trace=trace, check_mirrors=check_mirrors)


def cmd_run(args) -> int:
    if args.lam is None and args.rho is None:
        args.lam = 0.45
    lam = args.lam if args.lam is not None else args.rho * args.mu
    cfg = config_from_args(args, args.alg, lam, args.seed)
    cfg.validate()
    if args.engine == "dof" and args.trace:
        raise UsageError("--trace needs the exact engine")
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            stats = simulate(cfg, args.engine, args.check_mirrors, trace=fh)
    else:
        stats = simulate(cfg, args.engine, args.check_mirrors)
    summary = summary_json(stats, cfg)
    if args.format == "json":
        text = json.dumps(summary, indent=2) + "\n"
    else:
        text = summary_csv(summary)
    _emit(text, args.out)
    return EXIT_OK


def summary_csv(summary: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n = len(summary["mean_Qj"])
    a = summary["analytic"]
    w.writerow(
        ["algorithm", "lambda", "mu", "receivers", "field", "seed", "mean_Q"]
        + [f"mean_Q_{j + 1}" for j in range(n)]
        + ["max_Q", "noninnovative_count", "EQj", "dwd_lb", "dws_ub"]
    )
    c = summary["config"]
    w.writerow(
        [c["algorithm"], c["lambda"], c["mu"], c["receivers"], c["field"], c["seed"], summary["mean_Q"]]
        + summary["mean_Qj"]
        + [summary["max_Q"], summary["noninnovative_count"], a["EQj"], a["dwd_lb"], a["dws_ub"]]
    )
    return buf.getvalue()


def _emit(text: str, path: Optional[Path]) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# --- sweep -------------------------------------------------------------------------


def fit_slope(rhos: Sequence[float], means: Sequence[float]) -> float:
    """Least-squares slope of log E[Q] against log 1/(1-rho)."""
    if len(rhos) < 3:
        raise RegressionError("insufficient points for regression (need at least 3 rho values)")
    x = -np.log1p(-np.asarray(rhos, dtype=float))
    y = np.asarray(means, dtype=float)
    if np.any(y <= 0):
        raise RegressionError("regression rejected: mean queue size is zero (zero variance)")
    y = np.log(y)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise RegressionError("regression rejected: zero variance in the data")
    return float(np.polyfit(x, y, 1)[0])


def _sweep_job(job):
    rho, seed, algs, base, engine = job
    cfg = SimConfig(**{**base, "lam": rho * base["mu"], "seed": seed})
    out = {}
    if engine == "dof":
        paths = dof_paths(cfg)
        for alg in algs:
            cfg.algorithm = alg
            out[alg] = run_dof(cfg, paths).mean_Q
    else:
        for alg in algs:
            cfg.algorithm = alg
            out[alg] = run_simulation(cfg).mean_Q
    return rho, seed, out


def run_sweep(rhos, seeds, algs, base: dict, engine: str = "dof", jobs: int = 1):
    """Mean physical queue per (rho, algorithm, seed) and fitted slopes per algorithm."""
    if len(rhos) < 3:
        raise RegressionError("insufficient points for regression (need at least 3 rho values)")
    for rho in rhos:
        if not 0 <= rho < 1:
            raise ConfigError(f"rho must be in [0, 1), got {rho}")
    if engine == "dof" and base.get("decode_rule", "empty") != "empty":
        raise ConfigError("the dof engine supports only the emptying decode rule")
    work = [(rho, seed, list(algs), base, engine) for rho in rhos for seed in seeds]
    for alg in algs:
        # field/receiver constraints are checked before any work starts
        SimConfig(**{**base, "lam": rhos[0] * base["mu"], "algorithm": alg}).validate()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sweep_job, work))
    else:
        results = [_sweep_job(w) for w in work]
    table = []
    for rho, seed, out in results:
        for alg in algs:
            table.append({"rho": rho, "algorithm": alg, "seed": seed, "mean_Q": out[alg]})
    table.sort(key=lambda r: (r["rho"], r["algorithm"], r["seed"]))
    means = {
        alg: [float(np.mean([r["mean_Q"] for r in table if r["rho"] == rho and r["algorithm"] == alg])) for rho in rhos]
        for alg in algs
    }
    slopes = {alg: fit_slope(rhos, means[alg]) for alg in algs}
    return table, means, slopes


def cmd_sweep(args) -> int:
    base = dict(
        mu=args.mu,
        n=args.receivers,
        q=args.field,
        slots=args.slots,
        decode_rule=args.decode_rule,
        warmup=args.warmup,
        payload_len=args.payload_len,
    )
    rhos = list(args.rho_values)
    table, means, slopes = run_sweep(rhos, args.seeds, args.algs, base, args.engine, args.jobs)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rho", "algorithm", "seed", "mean_Q"])
    for r in table:
        w.writerow([r["rho"], r["algorithm"], r["seed"], r["mean_Q"]])
    doc = {
        "schema_version": SCHEMA_VERSION,
        "engine": args.engine,
        "mu": args.mu,
        "receivers": args.receivers,
        "slots": args.slots,
        "seeds": list(args.seeds),
        "rho_values": rhos,
        "mean_Q": means,
        "analytic": {str(rho): analytic_summary(rho * args.mu, args.mu, args.receivers) for rho in rhos},
        "slopes": slopes,
    }
    _emit(buf.getvalue(), args.table)
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK


# --- replay ------------------------------------------------------------------------


def bundled(name: str) -> Path:
    return Path(str(resources.files("ncarq") / "data" / name))


def replay_text(schedule_path: Path) -> str:
    schedule = load_schedule(schedule_path)
    if not schedule.slots:
        return ""
    records = run_scripted(schedule)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(replay_header(schedule.n))
    w.writerows(replay_rows(records, schedule.n))
    return buf.getvalue()


def cmd_replay(args) -> int:
    path = args.schedule or bundled("table1.json")
    text = replay_text(path)
    _emit(text, args.out)
    if args.golden:
        gpath = bundled("table1.golden.csv") if args.golden == "builtin" else Path(args.golden)
        golden = gpath.read_text()
        if golden != text:
            got, want = text.splitlines(), golden.splitlines()
            first = next(
                (i for i, (a, b) in enumerate(zip(got, want)) if a != b),
                min(len(got), len(want)),
            )
            slot = got[first].split(",", 1)[0] if first < len(got) else "end"
            sys.stderr.write(f"golden mismatch at line {first + 1} (slot {slot})\n")
            sys.stderr.writelines(
                difflib.unified_diff(
                    golden.splitlines(True), text.splitlines(True), str(gpath), "replay"
                )
            )
            return EXIT_GOLDEN
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_VALIDATION
    handler = {"run": cmd_run, "sweep": cmd_sweep, "replay": cmd_replay}[args.command]
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return handler(args)
    except (ConfigError, ScheduleError, RegressionError, UsageError, OSError) as e:
        sys.stderr.write(f"ncarq: error: {e}\n")
        return EXIT_VALIDATION
    except InvariantViolation as e:
        sys.stderr.write(f"ncarq: invariant violation: {e}\n")
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
