"""
Forward-validated transfer weights.

Each dataset is split into ``k = n_tilde // h`` time-ordered parts: the first
part of dataset ``m`` holds ``N_m - (k - 1) h`` rows and the others exactly
``h``. ``taus[i]`` is the first period after the i-th boundary. At every tau the
per-dataset max-Sharpe allocations fitted on all earlier rows are mixed by a
weight vector ``w``. ``w`` is chosen to maximise the average Sharpe ratio of the
mix under the target's moments over the next block of ``h`` periods.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .errors import InputError, NumericalError
from .estimators import GaussianMoments, block_moments, expanding_moments, repaired
from .maxsharpe import DEFAULT_SOLVER, SolverConfig, max_sharpe
from .panel import AlignedPanel
from .simplex import composition_count, projected_ascent, simplex_lattice


@dataclass(frozen=True)
class ValidationSchedule:
    h: int
    k: int
    taus: tuple[int, ...]
    first_segment_lengths: tuple[int, ...]


@dataclass(frozen=True)
class CandidateAllocations:
    """
    Per-tau, per-dataset allocations and the target's validation moments.

    ``allocations[i, m]`` was fitted on every row of dataset ``m`` before
    ``taus[i]``. ``validation[i]`` holds the target's moments over the ``h``
    periods before ``taus[i + 1]``, so it scores ``allocations[i]``.
    ``source_blocks[i][m - 1]`` are the matching block moments of the sources;
    they are kept for diagnostics and not used to choose weights.
    """

    schedule: ValidationSchedule
    allocations: np.ndarray  # (k, M + 1, d)
    validation: tuple[GaussianMoments, ...]  # k - 1 entries
    source_blocks: tuple[tuple[GaussianMoments, ...], ...] = field(default=(), repr=False)

    @property
    def n_datasets(self) -> int:
        return self.allocations.shape[1]


def default_h(n0: int) -> int:
    return n0 // 5


def build_schedule(panel: AlignedPanel, h: int) -> ValidationSchedule:
    nt = panel.n_tilde
    if h < 2:
        raise InputError(f"block length h must be >= 2, got {h}")
    k = nt // h
    if k < 2:
        raise InputError(f"n_tilde={nt} with h={h} gives {k} part(s); need at least 2")
    taus = tuple(nt - (k - i) * h + 1 for i in range(1, k + 1))
    first = tuple(m.n_rows - (k - 1) * h for m in panel.datasets)
    if min(first) < 2:
        raise InputError(f"first segment has {min(first)} rows; need at least 2")
    return ValidationSchedule(h, k, taus, first)


def fit_candidates(
    panel: AlignedPanel,
    sched: ValidationSchedule,
    cfg: SolverConfig = DEFAULT_SOLVER,
) -> CandidateAllocations:
    nt = panel.n_tilde
    allocs = np.empty((sched.k, panel.M + 1, panel.d))
    for i, tau in enumerate(sched.taus):
        for m, data in enumerate(panel.datasets):
            allocs[i, m] = max_sharpe(expanding_moments(data, nt, tau), cfg)
    validation = tuple(
        repaired(block_moments(panel.target, nt, tau, sched.h), cfg.pd_floor) for tau in sched.taus[1:]
    )
    source_blocks = tuple(
        tuple(block_moments(s, nt, tau, sched.h) for s in panel.sources) for tau in sched.taus[1:]
    )
    allocs.setflags(write=False)
    return CandidateAllocations(sched, allocs, validation, source_blocks)


class _Criterion:
    """Average validation Sharpe ratio as a function of the mixing weights.

    Term ``i`` is ``c_i'w / sqrt(w'Q_i w)`` with ``c_i = A_i' mu_i`` and
    ``Q_i = A_i' Sigma_i A_i``, where the columns of ``A_i`` are the candidate
    allocations at tau_i.
    """

    def __init__(self, cand: CandidateAllocations):
        A = cand.allocations[:-1]  # (k-1, M+1, d); the last tau has no later block
        mus = np.stack([v.mean for v in cand.validation])
        covs = np.stack([v.cov for v in cand.validation])
        self.c = np.einsum("imd,id->im", A, mus)
        self.Q = np.einsum("imd,ide,ine->imn", A, covs, A)

    def value(self, w: np.ndarray) -> float:
        num = self.c @ w
        var = np.einsum("m,imn,n->i", w, self.Q, w)
        if np.any(var <= 0):
            raise NumericalError("zero validation variance")
        return float(np.mean(num / np.sqrt(var)))

    def grad(self, w: np.ndarray) -> np.ndarray:
        num = self.c @ w
        Qw = self.Q @ w
        var = Qw @ w
        sd = np.sqrt(var)
        g = self.c / sd[:, None] - (num / (var * sd))[:, None] * Qw
        return g.mean(axis=0)

    def values(self, W: np.ndarray) -> np.ndarray:
        num = W @ self.c.T
        var = np.einsum("pm,imn,pn->pi", W, self.Q, W)
        return np.mean(num / np.sqrt(var), axis=1)


def weight_objective(w: np.ndarray, cand: CandidateAllocations) -> float:
    """Average over validation blocks of the Sharpe ratio of the ``w``-mixed allocation."""
    w = np.asarray(w, dtype=float)
    if w.shape != (cand.n_datasets,):
        raise InputError(f"weights have shape {w.shape}, expected ({cand.n_datasets},)")
    return _Criterion(cand).value(w)


def _grid_incumbent(crit: _Criterion, n_datasets: int, step: float = 0.01):
    n = int(round(1 / step))
    points = simplex_lattice(n, n_datasets)
    vals = crit.values(points)
    i = int(np.argmax(vals))
    return points[i].copy(), float(vals[i])


def solve_weights(
    cand: CandidateAllocations,
    cfg: SolverConfig = DEFAULT_SOLVER,
    grid_max_datasets: int = 3,
) -> np.ndarray:
    """
    Mixing weights maximising the validation criterion over the simplex.

    Projected ascent from every vertex and the barycentre; with at most three
    datasets the best point of a 0.01 lattice is searched and used as one more
    start. The first start reaching the best value (within ``cfg.tol``) wins.
    """
    n = cand.n_datasets
    if n == 1:
        return np.ones(1)
    crit = _Criterion(cand)
    starts = [np.eye(n)[m] for m in range(n)] + [np.full(n, 1.0 / n)]
    grid_w = None
    if n <= grid_max_datasets and composition_count(100, n) <= 1_000_000:
        grid_w, grid_val = _grid_incumbent(crit, n)
        starts.append(grid_w)

    best_w, best_val = None, -np.inf
    for w0 in starts:
        w, val = projected_ascent(crit.value, crit.grad, w0, cfg.max_iters, cfg.tol)
        if val > best_val + cfg.tol:
            best_w, best_val = w, val
    if grid_w is not None and grid_val > best_val:
        best_w = grid_w
    best_w = np.clip(best_w, 0.0, None)
    return best_w / best_w.sum()


def combine(w: np.ndarray, allocations: np.ndarray) -> np.ndarray:
    """``sum_m w[m] * allocations[m]``, renormalised against rounding."""
    phi = np.asarray(w, dtype=float) @ np.asarray(allocations, dtype=float)
    phi = np.clip(phi, 0.0, None)
    return phi / phi.sum()


def terminal_allocations(panel: AlignedPanel, cfg: SolverConfig = DEFAULT_SOLVER) -> np.ndarray:
    """Each dataset's max-Sharpe allocation from all of its rows, shape ``(M + 1, d)``."""
    nt = panel.n_tilde
    return np.stack([max_sharpe(expanding_moments(m, nt, nt + 1), cfg) for m in panel.datasets])


def final_allocation(panel: AlignedPanel, w: np.ndarray, cfg: SolverConfig = DEFAULT_SOLVER) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (panel.M + 1,):
        raise InputError(f"weights have shape {w.shape}, panel has {panel.M + 1} datasets")
    return combine(w, terminal_allocations(panel, cfg))


def informative_mass(w: np.ndarray, informative_set: Iterable[int]) -> float:
    """Total weight on the datasets listed in ``informative_set``."""
    w = np.asarray(w, dtype=float)
    idx = sorted(set(informative_set))
    if idx and (idx[0] < 0 or idx[-1] >= w.shape[0]):
        raise InputError(f"dataset index out of range 0..{w.shape[0] - 1}: {idx}")
    return float(w[idx].sum()) if idx else 0.0


@dataclass(frozen=True)
class TransferResult:
    weights: np.ndarray
    allocation: np.ndarray
    candidates: CandidateAllocations


def transfer_allocate(
    panel: AlignedPanel,
    h: Optional[int] = None,
    cfg: SolverConfig = DEFAULT_SOLVER,
) -> TransferResult:
    """Schedule, fit, weigh and combine; the whole procedure in one call."""
    h = default_h(panel.target.n_rows) if h is None else h
    sched = build_schedule(panel, h)
    cand = fit_candidates(panel, sched, cfg)
    w = solve_weights(cand, cfg)
    # the last tau is n_tilde + 1, so its candidates are the terminal allocations
    return TransferResult(w, combine(w, cand.allocations[-1]), cand)
