"""
Command-line front end.

    tlportfolio simulate example1 --n 30 500 --reps 200 --seed 7 --out runs/e1
    tlportfolio simulate sim1 --mode ssr --rho 1 5 10 --reps 100 --seed 7 --out runs/s1
    tlportfolio simulate ff3 --factors ff.csv --calib-returns stocks.csv --rho 1 5 --seed 7 --out runs/f
    tlportfolio backtest --target t.csv --source s1.csv --oos 117 --strategies tl,non --out runs/bt
    tlportfolio solve --target t.csv
    tlportfolio report --summary runs/e1/summary.json --format csv

Every option can also come from a JSON file passed with ``--config``; keys are
the option names with dashes replaced by underscores. Flags win over the file.
Exit status: 0 success, 2 usage error, 3 input error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .errors import InputError, NumericalError
from .evaluate import (
    BacktestConfig,
    ExperimentParams,
    monte_carlo,
    run_backtest,
    samples_csv,
    ssr,
    summarize,
    summary_from_dict,
    to_jsonable,
)
from .maxsharpe import SolverConfig
from .panel import AlignedPanel, load_returns_csv
from .simulate import Example1Config, FF3Config, VarFactorConfig, fit_ff3_ols, load_factors_csv
from .strategies import StrategyKind, StrategySpec, allocate_detailed, parse_kind

EXIT_USAGE, EXIT_INPUT, EXIT_NUMERICAL = 2, 3, 4


class UsageError(Exception):
    pass


# defaults applied after the config file is merged
DEFAULTS: dict[str, Any] = {
    "reps": 100,
    "format": "csv",
    "jobs": None,
    "n": [500],
    "m": 5,
    "mode": "ssr",
    "n0": [500],
    "rho": [1.0],
    "oos": 50,
    "strategies": "tl,tl_equal,non,pool",
    "refit_every": 1,
    "h": None,
    "lam": 0.2,
    "tlc_source": None,
    "sources": None,
    "factors": None,
    "calib_returns": None,
    "source": [],
    "strategy": "non",
    "no_header": False,
}


def _add_common_sim(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with option values")
    p.add_argument("--reps", type=int, help="replications (default 100)")
    p.add_argument("--seed", type=int, help="master seed (required)")
    p.add_argument("--out", help="output directory (required)")
    p.add_argument("--format", choices=["csv", "json"], help="what to print on stdout")
    p.add_argument("--jobs", type=int, help="worker processes (default: CPU count)")


def _add_strategy_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--oos", type=int, help="out-of-sample periods (default 50)")
    p.add_argument("--strategies", help="comma list of tl, tl_equal, non, pool, tlc")
    p.add_argument("--refit-every", type=int, dest="refit_every")
    p.add_argument("--h", type=int, help="TL block length (default: frozen at in-sample length // 5)")
    p.add_argument("--lam", type=float, help="TLc penalty (default 0.2)")
    p.add_argument("--tlc-source", type=int, dest="tlc_source", help="1-based source index for TLc")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tlportfolio", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="Monte Carlo experiments")
    sim_sub = sim.add_subparsers(dest="experiment", required=True)

    e1 = sim_sub.add_parser("example1", help="i.i.d. normal panels, ESR/VSR")
    _add_common_sim(e1)
    e1.add_argument("--n", type=int, nargs="+", help="n_tilde values to sweep")
    e1.add_argument("--m", type=int, help="number of sources (default 5)")

    s1 = sim_sub.add_parser("sim1", help="VAR factor DGP")
    _add_common_sim(s1)
    _add_strategy_opts(s1)
    s1.add_argument("--mode", choices=["ssr", "gamma"])
    s1.add_argument("--n0", type=int, nargs="+")
    s1.add_argument("--rho", type=float, nargs="+")
    s1.add_argument("--sources", help="comma list of source indices to include (default all)")

    f3 = sim_sub.add_parser("ff3", help="three-factor calibrated DGP")
    _add_common_sim(f3)
    _add_strategy_opts(f3)
    f3.add_argument("--mode", choices=["ssr", "gamma"])
    f3.add_argument("--n", type=int, nargs="+", help="common dataset length (default 500)")
    f3.add_argument("--rho", type=float, nargs="+")
    f3.add_argument("--factors", help="CSV with header date,smb,hml,mkt")
    f3.add_argument("--calib-returns", dest="calib_returns", help="returns to fit alpha/beta by OLS")
    f3.add_argument("--sources", help="comma list of source indices to include (default all)")

    bt = sub.add_parser("backtest", help="walk-forward backtest on return files")
    bt.add_argument("--config")
    bt.add_argument("--target")
    bt.add_argument("--source", action="append", help="source return file (repeatable)")
    bt.add_argument("--out")
    bt.add_argument("--no-header", action="store_true", default=None, dest="no_header")
    _add_strategy_opts(bt)

    so = sub.add_parser("solve", help="one allocation from return files")
    so.add_argument("--config")
    so.add_argument("--target")
    so.add_argument("--source", action="append")
    so.add_argument("--strategy", help="tl, tl_equal, non, pool or tlc (default non)")
    so.add_argument("--h", type=int)
    so.add_argument("--lam", type=float)
    so.add_argument("--tlc-source", type=int, dest="tlc_source")
    so.add_argument("--no-header", action="store_true", default=None, dest="no_header")

    rep = sub.add_parser("report", help="re-render a summary.json")
    rep.add_argument("--config")
    rep.add_argument("--summary")
    rep.add_argument("--format", choices=["csv", "json"])
    return parser


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    values = vars(args)
    path = values.get("config")
    if path:
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as exc:
            raise InputError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise InputError(f"config {path} must hold a JSON object")
        unknown = sorted(set(doc) - set(values))
        if unknown:
            raise InputError(f"config {path}: unknown keys {unknown}")
        for key, val in doc.items():
            if values.get(key) is None:
                values[key] = val
    for key, val in DEFAULTS.items():
        if key in values and values[key] is None:
            values[key] = val
    return args


def _as_list(x) -> list:
    return list(x) if isinstance(x, (list, tuple)) else [x]


def _index_list(text) -> Optional[tuple[int, ...]]:
    if text is None:
        return None
    if isinstance(text, (list, tuple)):
        return tuple(int(v) for v in text)
    try:
        return tuple(int(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise InputError(f"bad index list {text!r}") from None


def _strategy_specs(args) -> tuple[StrategySpec, ...]:
    names = args.strategies if isinstance(args.strategies, list) else str(args.strategies).split(",")
    specs = []
    for name in names:
        kind = parse_kind(name)
        specs.append(StrategySpec(kind, h=args.h, lam=args.lam, tlc_source_index=args.tlc_source))
    return tuple(specs)


def _pick_sweep(candidates: dict[str, list]) -> tuple[str, tuple]:
    swept = [k for k, v in candidates.items() if len(v) > 1]
    if len(swept) > 1:
        raise UsageError(f"only one of {sorted(candidates)} may take several values")
    name = swept[0] if swept else next(iter(candidates))
    return name, tuple(candidates[name])


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) in (None, "")]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + n.replace("_", "-") for n in missing))


def _write(out: Path, name: str, text: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)


def _cmd_simulate(args) -> int:
    _require(args, "seed", "out")
    exp = args.experiment
    if exp == "example1":
        ns = [int(v) for v in _as_list(args.n)]
        params = ExperimentParams(Example1Config(n_tilde=ns[0], M=int(args.m)), "n_tilde", tuple(ns))
        experiment = "EXAMPLE1"
    elif exp == "sim1":
        rhos = [float(v) for v in _as_list(args.rho)]
        n0s = [int(v) for v in _as_list(args.n0)]
        name, values = _pick_sweep({"rho": rhos, "n0": n0s})
        dgp = VarFactorConfig(n0=n0s[0], rho=rhos[0], sources=_index_list(args.sources))
        params = ExperimentParams(
            dgp, name, values, mode=args.mode, strategies=_strategy_specs(args),
            oos_size=int(args.oos), refit_every=int(args.refit_every), h=args.h,
        )
        experiment = "SIM1"
    else:
        rhos = [float(v) for v in _as_list(args.rho)]
        ns = [int(v) for v in _as_list(args.n)]
        if len(ns) > 1:
            raise UsageError("ff3 sweeps rho only; give a single --n")
        kwargs: dict[str, Any] = {"sizes": (ns[0],) * 6, "rho": rhos[0], "sources": _index_list(args.sources)}
        if args.factors:
            factors = load_factors_csv(args.factors)
            kwargs["factors"] = factors
            if args.calib_returns:
                calib = load_returns_csv(args.calib_returns)
                if calib.n_rows != factors.shape[0]:
                    raise InputError("calibration returns and factors differ in length")
                alpha, beta = fit_ff3_ols(calib, factors)
                kwargs["alpha"] = tuple(alpha.tolist())
                kwargs["beta"] = tuple(tuple(r) for r in beta.tolist())
        elif args.calib_returns:
            raise UsageError("--calib-returns needs --factors")
        params = ExperimentParams(
            FF3Config(**kwargs), "rho", tuple(rhos), mode=args.mode, strategies=_strategy_specs(args),
            oos_size=int(args.oos), refit_every=int(args.refit_every), h=args.h,
        )
        experiment = "FF3"

    jobs = int(args.jobs) if args.jobs else (os.cpu_count() or 1)
    summary = monte_carlo(experiment, params, int(args.reps), int(args.seed), jobs=jobs)
    out = Path(args.out)
    _write(out, "summary.json", summarize(summary, "json"))
    _write(out, "summary.csv", summarize(summary, "csv"))
    _write(out, "samples.csv", samples_csv(summary))
    sys.stdout.write(summarize(summary, args.format))
    return 0


def _load_panel(args) -> AlignedPanel:
    _require(args, "target")
    header = not args.no_header
    target = load_returns_csv(args.target, has_header=header)
    sources = [load_returns_csv(p, has_header=header) for p in (args.source or [])]
    return AlignedPanel(target, tuple(sources))


def _cmd_backtest(args) -> int:
    _require(args, "out")
    panel = _load_panel(args)
    specs = _strategy_specs(args)
    cfg = BacktestConfig(int(args.oos), specs, int(args.refit_every), args.h)
    series = run_backtest(panel, cfg)

    table = io.StringIO()
    w = csv.writer(table, lineterminator="\n")
    w.writerow(["strategy", "ssr", "mean_payoff", "n_oos"])
    for label, pay in series.payoffs.items():
        w.writerow([label, repr(ssr(pay)), repr(float(np.mean(pay))), len(pay)])

    pays = io.StringIO()
    w = csv.writer(pays, lineterminator="\n")
    w.writerow(["time", "strategy", "payoff"] + [f"phi{i + 1}" for i in range(panel.d)])
    for label, pay in series.payoffs.items():
        for j, t in enumerate(series.times):
            w.writerow([int(t), label, repr(float(pay[j]))] + [repr(float(x)) for x in series.allocations[label][j]])

    weights = io.StringIO()
    w = csv.writer(weights, lineterminator="\n")
    w.writerow(["strategy", "refit"] + [f"w{m}" for m in range(panel.M + 1)])
    for label, ws in series.weights.items():
        for j, vec in enumerate(ws):
            w.writerow([label, j] + [repr(float(x)) for x in vec])

    out = Path(args.out)
    _write(out, "ssr.csv", table.getvalue())
    _write(out, "payoffs.csv", pays.getvalue())
    _write(out, "weights.csv", weights.getvalue())
    echo = {
        "target": args.target,
        "sources": list(args.source or []),
        "backtest": to_jsonable(cfg),
        "n_tilde": panel.n_tilde,
    }
    _write(out, "config.json", json.dumps(echo, indent=2) + "\n")
    sys.stdout.write(table.getvalue())
    return 0


def _cmd_solve(args) -> int:
    panel = _load_panel(args)
    spec = StrategySpec(parse_kind(args.strategy), h=args.h, lam=args.lam, tlc_source_index=args.tlc_source)
    res = allocate_detailed(spec, panel)
    print(",".join(f"{x:.10f}" for x in res.allocation))
    if spec.kind is StrategyKind.TL:
        print("weights:", ",".join(f"{x:.10f}" for x in res.weights), file=sys.stderr)
    return 0


def _cmd_report(args) -> int:
    _require(args, "summary")
    try:
        doc = json.loads(Path(args.summary).read_text())
    except OSError as exc:
        raise InputError(f"cannot read {args.summary}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.summary} is not valid JSON: {exc}") from exc
    sys.stdout.write(summarize(summary_from_dict(doc), args.format))
    return 0


COMMANDS = {"simulate": _cmd_simulate, "backtest": _cmd_backtest, "solve": _cmd_solve, "report": _cmd_report}


def run_command(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args = _merge_config(args)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"tlportfolio: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"tlportfolio: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"tlportfolio: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
