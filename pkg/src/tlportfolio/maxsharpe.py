"""
Long-only maximum-Sharpe allocations.

An allocation is a plain ``numpy`` vector on the simplex
``{phi : phi_i in [0, 1], sum(phi) = 1}``.

When some expected excess return is positive the problem has an exact convex
form. Along a ray ``y = c * u`` the quadratic ``y'(S + mu mu')y - 2 mu'y`` is
minimised at value ``-s^2 / (1 + s^2)`` where ``s`` is the Sharpe ratio of
``u``. So minimising it over ``y >= 0`` finds the best long-only direction, and
the problem is a non-negative least-squares fit ``||L'y - L^{-1} mu||`` with
``L L' = S + mu mu'``. Otherwise every allocation has a non-positive ratio
and a multi-start projected ascent searches directly on the simplex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .errors import InputError, NumericalError
from .estimators import GaussianMoments, repaired
from .simplex import composition_count, project_simplex, projected_ascent, simplex_lattice

GRID_LIMIT = 10_000_000


@dataclass(frozen=True)
class SolverConfig:
    restarts: int = 1
    max_iters: int = 5000
    tol: float = 1e-8
    pd_floor: float = 1e-8  # relative to trace / d

    def __post_init__(self):
        if self.tol <= 0:
            raise InputError("solver tol must be positive")
        if self.restarts < 1 or self.max_iters < 1:
            raise InputError("restarts and max_iters must be >= 1")


DEFAULT_SOLVER = SolverConfig()


def sharpe_value(phi: np.ndarray, m: GaussianMoments) -> float:
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (m.d,):
        raise InputError(f"allocation has shape {phi.shape}, moments have d={m.d}")
    var = float(phi @ m.cov @ phi)
    if var <= 0:
        raise NumericalError("portfolio variance is zero")
    return float(m.mean @ phi) / np.sqrt(var)


def _sharpe_grad(phi, mu, cov):
    sig_phi = cov @ phi
    var = phi @ sig_phi
    sd = np.sqrt(var)
    return mu / sd - (mu @ phi) * sig_phi / (var * sd)


def _starts(d: int) -> list[np.ndarray]:
    return [np.eye(d)[i] for i in range(d)] + [np.full(d, 1.0 / d)]


def _best_of(f, grad, starts, cfg: SolverConfig) -> np.ndarray:
    best_x, best_f = None, -np.inf
    for x0 in starts:
        x, fx = projected_ascent(f, grad, x0, cfg.max_iters, cfg.tol)
        if fx > best_f + cfg.tol:
            best_x, best_f = x, fx
    return best_x


def _clean(phi: np.ndarray) -> np.ndarray:
    phi = np.clip(phi, 0.0, None)
    return phi / phi.sum()


def max_sharpe(m: GaussianMoments, cfg: SolverConfig = DEFAULT_SOLVER) -> np.ndarray:
    """Long-only allocation maximising ``mu'phi / sqrt(phi' Sigma phi)``."""
    if m.d == 0:
        raise InputError("no assets")
    if m.d == 1:
        return np.ones(1)
    m = repaired(m, cfg.pd_floor)
    mu, cov = m.mean, m.cov
    if np.max(mu) > 0:
        try:
            chol = np.linalg.cholesky(cov + np.outer(mu, mu))
        except np.linalg.LinAlgError as exc:
            raise NumericalError("covariance not positive definite after repair") from exc
        rhs = np.linalg.solve(chol, mu)
        y, _ = nnls(chol.T, rhs)
        if y.sum() > 0:
            return _clean(y)
    f = lambda x: float(mu @ x) / np.sqrt(x @ cov @ x)
    return _clean(_best_of(f, lambda x: _sharpe_grad(x, mu, cov), _starts(m.d), cfg))


def max_sharpe_penalized(
    m: GaussianMoments,
    anchor: np.ndarray,
    lam: float,
    cfg: SolverConfig = DEFAULT_SOLVER,
) -> np.ndarray:
    """Maximise ``sharpe(phi) - lam * ||anchor - phi||^2`` over the simplex."""
    if lam < 0:
        raise InputError("penalty weight must be non-negative")
    anchor = np.asarray(anchor, dtype=float)
    if anchor.shape != (m.d,) or abs(anchor.sum() - 1) > 1e-9 or anchor.min() < -1e-9:
        raise InputError("anchor must be an allocation on the simplex")
    unpenalized = max_sharpe(m, cfg)
    if lam == 0 or m.d == 1:
        return unpenalized
    m = repaired(m, cfg.pd_floor)
    mu, cov = m.mean, m.cov

    def f(x):
        diff = anchor - x
        return float(mu @ x) / np.sqrt(x @ cov @ x) - lam * float(diff @ diff)

    def grad(x):
        return _sharpe_grad(x, mu, cov) + 2.0 * lam * (anchor - x)

    starts = _starts(m.d) + [anchor, unpenalized]
    return _clean(_best_of(f, grad, starts, cfg))


def grid_search_sharpe(m: GaussianMoments, step: float) -> tuple[np.ndarray, float]:
    """
    Exhaustive search over the simplex lattice with spacing ``step``.

    Lattice points are visited in descending lexicographic order and the first
    maximiser wins ties. Raises when the lattice exceeds ``GRID_LIMIT`` points.
    """
    n = int(round(1.0 / step))
    if n < 1 or abs(n * step - 1.0) > 1e-9:
        raise InputError(f"grid step {step} does not divide 1")
    if composition_count(n, m.d) > GRID_LIMIT:
        raise InputError(f"grid with step {step} in d={m.d} exceeds {GRID_LIMIT} points")
    points = simplex_lattice(n, m.d)
    best_val, best_idx = -np.inf, 0
    for lo in range(0, points.shape[0], 500_000):
        chunk = points[lo:lo + 500_000]
        var = np.einsum("ij,jk,ik->i", chunk, m.cov, chunk)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = (chunk @ m.mean) / np.sqrt(var)
        vals = np.where(var > 0, vals, -np.inf)
        i = int(np.argmax(vals))
        if vals[i] > best_val:
            best_val, best_idx = float(vals[i]), lo + i
    return points[best_idx].copy(), best_val


def oracle_sharpe(m: GaussianMoments, step: float = 0.02) -> float:
    """Best Sharpe ratio found by the lattice search or the solver, whichever is larger."""
    _, grid_val = grid_search_sharpe(m, step)
    return max(grid_val, sharpe_value(max_sharpe(m), m))


__all__ = [
    "SolverConfig",
    "DEFAULT_SOLVER",
    "sharpe_value",
    "max_sharpe",
    "max_sharpe_penalized",
    "grid_search_sharpe",
    "oracle_sharpe",
    "project_simplex",
]
