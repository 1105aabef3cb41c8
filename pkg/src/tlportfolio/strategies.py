"""The five allocation rules compared throughout: TL, TL_equal, Non-transfer, Pool and TLc."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import InputError
from .estimators import GaussianMoments, expanding_moments, sample_moments
from .maxsharpe import DEFAULT_SOLVER, SolverConfig, max_sharpe, max_sharpe_penalized
from .panel import AlignedPanel
from .transfer import combine, terminal_allocations, transfer_allocate


class StrategyKind(str, Enum):
    TL = "TL"
    TL_EQUAL = "TL_EQUAL"
    NON_TRANSFER = "NON_TRANSFER"
    POOL = "POOL"
    TLC = "TLC"


ALIASES = {
    "tl": StrategyKind.TL,
    "tl_equal": StrategyKind.TL_EQUAL,
    "equal": StrategyKind.TL_EQUAL,
    "non": StrategyKind.NON_TRANSFER,
    "non_transfer": StrategyKind.NON_TRANSFER,
    "pool": StrategyKind.POOL,
    "tlc": StrategyKind.TLC,
}


def parse_kind(name: str) -> StrategyKind:
    key = name.strip().lower().replace("-", "_")
    if key not in ALIASES:
        raise InputError(f"unknown strategy {name!r}; choose from {sorted(ALIASES)}")
    return ALIASES[key]


@dataclass(frozen=True)
class StrategySpec:
    """
    One strategy and its settings.

    ``h`` is the validation block length for TL (``None`` means ``N_0 // 5``).
    ``lam`` and ``tlc_source_index`` only matter for TLc; the index counts
    sources from 1 as in the panel.
    """

    kind: StrategyKind
    h: Optional[int] = None
    lam: float = 0.2
    tlc_source_index: Optional[int] = None
    solver: SolverConfig = field(default=DEFAULT_SOLVER)

    def __post_init__(self):
        object.__setattr__(self, "kind", StrategyKind(self.kind))
        if self.lam < 0:
            raise InputError("TLc penalty must be non-negative")
        if self.h is not None and self.h < 2:
            raise InputError("h must be >= 2")

    @property
    def name(self) -> str:
        return self.kind.value


@dataclass(frozen=True)
class AllocationResult:
    allocation: np.ndarray
    weights: Optional[np.ndarray] = None  # TL only


def pool_moments(panel: AlignedPanel) -> GaussianMoments:
    """Moments of every row of every dataset stacked into one sample."""
    return sample_moments(np.vstack([m.values for m in panel.datasets]))


def _non_transfer(panel: AlignedPanel, cfg: SolverConfig) -> np.ndarray:
    nt = panel.n_tilde
    return max_sharpe(expanding_moments(panel.target, nt, nt + 1), cfg)


def allocate_detailed(spec: StrategySpec, panel: AlignedPanel) -> AllocationResult:
    cfg = spec.solver
    kind = spec.kind
    if kind is StrategyKind.TL:
        res = transfer_allocate(panel, spec.h, cfg)
        return AllocationResult(res.allocation, res.weights)
    if kind is StrategyKind.TL_EQUAL:
        w = np.full(panel.M + 1, 1.0 / (panel.M + 1))
        return AllocationResult(combine(w, terminal_allocations(panel, cfg)), w)
    if kind is StrategyKind.NON_TRANSFER:
        return AllocationResult(_non_transfer(panel, cfg))
    if kind is StrategyKind.POOL:
        return AllocationResult(max_sharpe(pool_moments(panel), cfg))
    if kind is StrategyKind.TLC:
        if panel.M == 0:
            raise InputError("TLc needs a source dataset")
        src = spec.tlc_source_index
        if src is None:
            if panel.M > 1:
                raise InputError("TLc with several sources needs tlc_source_index")
            src = 1
        if not 1 <= src <= panel.M:
            raise InputError(f"tlc_source_index {src} outside 1..{panel.M}")
        source = panel.sources[src - 1]
        anchor = max_sharpe(expanding_moments(source, source.n_rows, source.n_rows + 1), cfg)
        nt = panel.n_tilde
        target = expanding_moments(panel.target, nt, nt + 1)
        return AllocationResult(max_sharpe_penalized(target, anchor, spec.lam, cfg))
    raise InputError(f"unsupported strategy {kind}")  # pragma: no cover


def allocate(spec: StrategySpec, panel: AlignedPanel) -> np.ndarray:
    """Allocation for the period right after the panel's last row."""
    return allocate_detailed(spec, panel).allocation
