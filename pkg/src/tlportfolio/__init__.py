"""Forward-validated transfer learning for long-only maximum-Sharpe portfolios."""

from .errors import InputError, NumericalError, TLPortfolioError, ZeroVarianceError
from .estimators import GaussianMoments, block_moments, ensure_positive_definite, expanding_moments
from .evaluate import BacktestConfig, ExperimentParams, monte_carlo, run_backtest, ssr, summarize
from .maxsharpe import SolverConfig, grid_search_sharpe, max_sharpe, max_sharpe_penalized, oracle_sharpe, sharpe_value
from .panel import AlignedPanel, ReturnMatrix, RiskFreeSeries, align_panel, load_returns_csv, to_excess
from .strategies import StrategyKind, StrategySpec, allocate, pool_moments
from .transfer import (
    build_schedule,
    final_allocation,
    fit_candidates,
    informative_mass,
    solve_weights,
    transfer_allocate,
    weight_objective,
)

__version__ = "0.1.0"
