"""
Walk-forward backtests, the sample Sharpe ratio and the Monte Carlo driver.

A backtest walks through the last ``oos_size`` periods of the target. Before
each out-of-sample period ``s`` every strategy is refitted on all rows strictly
before ``s`` (every ``refit_every`` periods; the allocation is held in between)
and earns ``phi' r_s``.

``monte_carlo`` repeats one experiment over independent replications. Replication ``j``
draws from stream ``(master_seed, j)`` whatever the sweep value, so the outcome
does not depend on how replications are scheduled across worker processes.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional, Sequence, Union

import numpy as np

from .errors import InputError, NumericalError, TLPortfolioError, ZeroVarianceError
from .estimators import GaussianMoments
from .maxsharpe import DEFAULT_SOLVER, SolverConfig, max_sharpe, oracle_sharpe, sharpe_value
from .panel import AlignedPanel
from .simulate import (
    Example1Config,
    FF3Config,
    SeededRng,
    VarFactorConfig,
    gen_example1,
    gen_ff3,
    gen_var_factor,
)
from .strategies import StrategyKind, StrategySpec, allocate_detailed, pool_moments
from .transfer import informative_mass, terminal_allocations


# ----------------------------------------------------------------- backtest


@dataclass(frozen=True)
class BacktestConfig:
    """``h`` freezes TL's block length for the whole walk; ``None`` means ``(n_tilde - oos_size) // 5``."""

    oos_size: int
    strategies: tuple[StrategySpec, ...]
    refit_every: int = 1
    h: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))
        if self.oos_size < 2:
            raise InputError("oos_size must be >= 2")
        if self.refit_every < 1:
            raise InputError("refit_every must be >= 1")


@dataclass
class PayoffSeries:
    times: np.ndarray  # aligned times of the out-of-sample periods
    payoffs: dict[str, np.ndarray]
    allocations: dict[str, np.ndarray]  # (oos_size, d) per strategy
    weights: dict[str, list[np.ndarray]] = field(default_factory=dict)  # TL, one entry per refit


def strategy_labels(specs: Sequence[StrategySpec]) -> list[str]:
    """Strategy names, suffixed ``_2``, ``_3``... when a kind repeats."""
    seen: dict[str, int] = {}
    labels = []
    for spec in specs:
        seen[spec.name] = seen.get(spec.name, 0) + 1
        labels.append(spec.name if seen[spec.name] == 1 else f"{spec.name}_{seen[spec.name]}")
    return labels


def run_backtest(panel: AlignedPanel, cfg: BacktestConfig) -> PayoffSeries:
    nt = panel.n_tilde
    n_oos = cfg.oos_size
    if n_oos >= nt:
        raise InputError(f"oos_size {n_oos} leaves no in-sample history (n_tilde={nt})")
    h = cfg.h if cfg.h is not None else (nt - n_oos) // 5
    specs = [
        dataclasses.replace(s, h=h) if s.kind is StrategyKind.TL and s.h is None else s
        for s in cfg.strategies
    ]
    labels = strategy_labels(specs)
    times = np.arange(nt - n_oos + 1, nt + 1)
    target = panel.target.values
    offset = panel.target.n_rows - nt - 1

    payoffs = {k: np.empty(n_oos) for k in labels}
    allocations = {k: np.empty((n_oos, panel.d)) for k in labels}
    weights: dict[str, list[np.ndarray]] = {k: [] for k, s in zip(labels, specs) if s.kind is StrategyKind.TL}
    current: dict[str, np.ndarray] = {}
    for j, s in enumerate(times):
        if j % cfg.refit_every == 0:
            history = panel.truncate(int(s))
            for label, spec in zip(labels, specs):
                try:
                    res = allocate_detailed(spec, history)
                except InputError as exc:
                    raise InputError(f"insufficient history for {label} at t={s}: {exc}") from exc
                current[label] = res.allocation
                if label in weights:
                    weights[label].append(res.weights)
        r = target[s + offset]
        for label in labels:
            allocations[label][j] = current[label]
            payoffs[label][j] = float(current[label] @ r)
    return PayoffSeries(times, payoffs, allocations, weights)


def ssr(payoffs: Sequence[float]) -> float:
    """Sample mean over (n - 1)-divisor sample standard deviation."""
    x = np.asarray(payoffs, dtype=float)
    if x.size < 2:
        raise InputError("SSR needs at least 2 payoffs")
    if np.ptp(x) == 0:
        raise ZeroVarianceError("payoffs have zero sample variance")
    return float(x.mean() / x.std(ddof=1))


# -------------------------------------------------------------- Monte Carlo


class Experiment(str, Enum):
    EXAMPLE1 = "EXAMPLE1"
    SIM1 = "SIM1"
    FF3 = "FF3"


DgpConfig = Union[Example1Config, VarFactorConfig, FF3Config]


@dataclass(frozen=True)
class ExperimentParams:
    """
    What one Monte Carlo run does.

    ``sweep_name`` names a field of ``dgp`` (``n_tilde``, ``n0``, ``rho``...) taking
    each of ``sweep_values`` in turn. ``mode`` is ``"ssr"`` (walk-forward
    backtest of ``strategies``) or ``"gamma"`` (TL once at ``n_tilde + 1``,
    recording the weight on informative datasets). Example 1 ignores ``mode``
    and ``strategies``.
    """

    dgp: DgpConfig
    sweep_name: Optional[str] = None
    sweep_values: tuple = ()
    mode: str = "ssr"
    strategies: tuple[StrategySpec, ...] = ()
    oos_size: int = 50
    refit_every: int = 1
    h: Optional[int] = None
    solver: SolverConfig = DEFAULT_SOLVER

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))
        object.__setattr__(self, "sweep_values", tuple(self.sweep_values))
        if self.mode not in ("ssr", "gamma"):
            raise InputError(f"mode must be 'ssr' or 'gamma', got {self.mode!r}")
        if self.sweep_name is not None:
            if self.sweep_name not in {f.name for f in dataclasses.fields(self.dgp)}:
                raise InputError(f"cannot sweep {self.sweep_name!r}: not a field of {type(self.dgp).__name__}")
            if not self.sweep_values:
                raise InputError("sweep_values is empty")

    def points(self) -> list[tuple[Any, DgpConfig]]:
        if self.sweep_name is None:
            return [(None, self.dgp)]
        return [(v, dataclasses.replace(self.dgp, **{self.sweep_name: v})) for v in self.sweep_values]


@dataclass(frozen=True)
class StrategyStats:
    sweep_value: Any
    strategy: str
    metrics: dict[str, float]


@dataclass(frozen=True)
class Sample:
    sweep_value: Any
    replication: int
    strategy: str
    metric: str
    value: float


@dataclass
class ReplicationSummary:
    experiment: str
    master_seed: int
    replications: int
    sweep_name: Optional[str]
    config: dict
    rows: list[StrategyStats]
    samples: list[Sample] = field(default_factory=list, repr=False)

    def metric(self, name: str, strategy: str, sweep_value: Any = None) -> float:
        for row in self.rows:
            if row.strategy == strategy and row.sweep_value == sweep_value:
                return row.metrics[name]
        raise KeyError((name, strategy, sweep_value))

    @property
    def strategies(self) -> list[str]:
        return list(dict.fromkeys(r.strategy for r in self.rows))


def _example1_replication(cfg: Example1Config, rng: SeededRng, solver: SolverConfig) -> dict[str, float]:
    panel = gen_example1(rng, cfg)
    truth = cfg.moments()
    per_dataset = terminal_allocations(panel, solver)
    allocs = {
        "NON_TRANSFER": per_dataset[0],
        "TL_EQUAL": per_dataset.mean(axis=0),
        "POOL": max_sharpe(pool_moments(panel), solver),
    }
    return {k: sharpe_value(phi, truth) for k, phi in allocs.items()}


def _panel_for(experiment: Experiment, cfg: DgpConfig, rng: SeededRng) -> AlignedPanel:
    if experiment is Experiment.SIM1:
        return gen_var_factor(rng, cfg)
    return gen_ff3(rng, cfg)


def _replication(experiment: Experiment, params: ExperimentParams, master_seed: int, j: int) -> list[Sample]:
    rng = SeededRng(master_seed, j)
    out: list[Sample] = []
    try:
        for value, cfg in params.points():
            if experiment is Experiment.EXAMPLE1:
                for name, sr in _example1_replication(cfg, rng, params.solver).items():
                    out.append(Sample(value, j, name, "SR", sr))
                continue
            panel = _panel_for(experiment, cfg, rng)
            informative = cfg.informative_set()
            if params.mode == "gamma":
                spec = StrategySpec(StrategyKind.TL, h=params.h, solver=params.solver)
                res = allocate_detailed(spec, panel)
                out.append(Sample(value, j, "TL", "GAMMA", informative_mass(res.weights, informative)))
                continue
            bt = BacktestConfig(params.oos_size, params.strategies, params.refit_every, params.h)
            series = run_backtest(panel, bt)
            for label, pay in series.payoffs.items():
                out.append(Sample(value, j, label, "SSR", ssr(pay)))
            for label, ws in series.weights.items():
                gammas = [informative_mass(w, informative) for w in ws]
                out.append(Sample(value, j, label, "GAMMA", float(np.mean(gammas))))
    except TLPortfolioError as exc:
        raise type(exc)(f"replication {j} (master_seed={master_seed}) failed: {exc}") from exc
    return out


def _aggregate(experiment: Experiment, params: ExperimentParams, samples: list[Sample]) -> list[StrategyStats]:
    grouped: dict[tuple, dict[str, list[float]]] = {}
    for s in samples:
        grouped.setdefault((s.sweep_value, s.strategy), {}).setdefault(s.metric, []).append(s.value)

    rows = []
    for (value, strategy), metrics in grouped.items():
        stats: dict[str, float] = {}
        for metric, vals in metrics.items():
            x = np.asarray(vals)
            if experiment is Experiment.EXAMPLE1:
                stats["ESR"] = float(x.mean())
                stats["VSR"] = float(np.mean((x - x.mean()) ** 2))
            else:
                stats[f"{metric}_mean"] = float(x.mean())
                stats[f"{metric}_se"] = float(x.std(ddof=1) / np.sqrt(x.size)) if x.size > 1 else 0.0
        rows.append(StrategyStats(value, strategy, stats))

    if experiment is Experiment.EXAMPLE1:
        base = {r.sweep_value: r.metrics["VSR"] for r in rows if r.strategy == "NON_TRANSFER"}
        for r in rows:
            if r.strategy != "NON_TRANSFER":
                r.metrics["VSR_RATIO"] = r.metrics["VSR"] / base[r.sweep_value] if base[r.sweep_value] > 0 else float("nan")
    return rows


def monte_carlo(
    experiment: Union[Experiment, str],
    params: ExperimentParams,
    replications: int,
    master_seed: int,
    jobs: int = 1,
) -> ReplicationSummary:
    """Run ``replications`` independent copies of an experiment and summarise them."""
    experiment = Experiment(str(experiment).upper() if isinstance(experiment, str) else experiment)
    if replications < 2:
        raise InputError("need at least 2 replications")
    expected = {
        Experiment.EXAMPLE1: Example1Config,
        Experiment.SIM1: VarFactorConfig,
        Experiment.FF3: FF3Config,
    }[experiment]
    if not isinstance(params.dgp, expected):
        raise InputError(f"{experiment.value} needs a {expected.__name__}")
    if experiment is not Experiment.EXAMPLE1 and params.mode == "ssr" and not params.strategies:
        raise InputError("ssr mode needs at least one strategy")

    args = [(experiment, params, master_seed, j) for j in range(replications)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_replication, *zip(*args)))
    else:
        chunks = [_replication(*a) for a in args]
    samples = [s for chunk in chunks for s in chunk]

    config = {"params": to_jsonable(params)}
    if experiment is Experiment.EXAMPLE1:
        config["max_sharpe"] = {
            str(v): oracle_sharpe(cfg.moments()) for v, cfg in params.points()
        }
    rows = _aggregate(experiment, params, samples)
    return ReplicationSummary(experiment.value, master_seed, replications, params.sweep_name, config, rows, samples)


# ---------------------------------------------------------------- reporting


def to_jsonable(obj: Any) -> Any:
    """Plain JSON types for dataclasses, enums, numpy scalars and arrays."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, np.ndarray):
        return {"shape": list(obj.shape)} if obj.size > 64 else obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    return obj


BASE_COLUMNS = ("experiment", "sweep_name", "sweep_value", "strategy")


def summary_to_dict(results: ReplicationSummary) -> dict:
    return {
        "experiment": results.experiment,
        "master_seed": results.master_seed,
        "replications": results.replications,
        "sweep_name": results.sweep_name,
        "config": to_jsonable(results.config),
        "rows": [
            {"sweep_value": to_jsonable(r.sweep_value), "strategy": r.strategy, "metrics": dict(r.metrics)}
            for r in results.rows
        ],
    }


def summary_from_dict(doc: dict) -> ReplicationSummary:
    try:
        rows = [StrategyStats(r["sweep_value"], r["strategy"], dict(r["metrics"])) for r in doc["rows"]]
        return ReplicationSummary(
            doc["experiment"], int(doc["master_seed"]), int(doc["replications"]),
            doc.get("sweep_name"), doc.get("config", {}), rows,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed summary document: {exc}") from exc


def summarize(results: ReplicationSummary, fmt: str = "json") -> str:
    """
    Serialise a summary.

    ``json`` gives the full document (config echo, seed, statistics). ``csv``
    gives one row per (sweep value, strategy) with one column per metric.
    """
    if fmt == "json":
        return json.dumps(summary_to_dict(results), indent=2, allow_nan=True) + "\n"
    if fmt != "csv":
        raise InputError(f"unknown format {fmt!r}")
    metric_cols = list(dict.fromkeys(k for r in results.rows for k in r.metrics))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(BASE_COLUMNS) + metric_cols)
    for r in results.rows:
        writer.writerow(
            [results.experiment, results.sweep_name or "", "" if r.sweep_value is None else r.sweep_value, r.strategy]
            + [repr(r.metrics[k]) if k in r.metrics else "" for k in metric_cols]
        )
    return buf.getvalue()


def samples_csv(results: ReplicationSummary) -> str:
    """Long format: one line per (replication, sweep value, strategy, metric)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["experiment", "strategy", "sweep_value", "replication", "metric", "value"])
    for s in results.samples:
        writer.writerow([
            results.experiment, s.strategy, "" if s.sweep_value is None else s.sweep_value,
            s.replication, s.metric, repr(float(s.value)),
        ])
    return buf.getvalue()
