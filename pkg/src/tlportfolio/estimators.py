"""Sample moments over expanding and trailing windows, plus covariance repair."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, NumericalError
from .panel import ReturnMatrix

PD_FLOOR_REL = 1e-8


@dataclass(frozen=True)
class GaussianMoments:
    """Mean vector and covariance matrix, estimated from ``n_obs`` rows or supplied analytically."""

    mean: np.ndarray
    cov: np.ndarray
    n_obs: int = 0

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        d = mean.shape[0]
        if mean.ndim != 1 or cov.shape != (d, d):
            raise InputError(f"moment shapes disagree: mean {mean.shape}, cov {cov.shape}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def d(self) -> int:
        return self.mean.shape[0]


def sample_moments(rows: np.ndarray) -> GaussianMoments:
    """Mean and (n - 1)-divisor covariance of the given rows."""
    rows = np.asarray(rows, dtype=float)
    n = rows.shape[0]
    if n < 2:
        raise InputError(f"need at least 2 observations, got {n}")
    mean = rows.mean(axis=0)
    centred = rows - mean
    cov = centred.T @ centred / (n - 1)
    return GaussianMoments(mean, (cov + cov.T) / 2, n)


def expanding_moments(data: ReturnMatrix, n_tilde: int, t: int) -> GaussianMoments:
    """
    Moments of every row strictly before aligned time ``t``.

    For a dataset with ``N`` rows the window holds ``N - n_tilde + t - 1``
    observations, counted from the first row of the dataset.
    """
    if t > n_tilde + 1:
        raise InputError(f"t={t} beyond n_tilde + 1 = {n_tilde + 1}")
    count = data.n_rows - n_tilde + t - 1
    if count < 2:
        raise InputError(f"{data.label}: only {count} observations before t={t}")
    return sample_moments(data.values[:count])


def block_moments(data: ReturnMatrix, n_tilde: int, t: int, h: int) -> GaussianMoments:
    """Moments of the ``h`` rows at aligned times ``t - h .. t - 1``."""
    if h < 2:
        raise InputError(f"block length must be >= 2, got {h}")
    if t > n_tilde + 1:
        raise InputError(f"t={t} beyond n_tilde + 1 = {n_tilde + 1}")
    end = data.n_rows - n_tilde + t - 1
    if end < h:
        raise InputError(f"{data.label}: {end} rows before t={t}, block needs {h}")
    return sample_moments(data.values[end - h:end])


def default_pd_floor(cov: np.ndarray, rel: float = PD_FLOOR_REL) -> float:
    """``rel * trace / d``, or ``rel`` itself for an all-zero covariance."""
    scale = np.trace(cov) / cov.shape[0]
    return rel * scale if scale > 0 else rel


def ensure_positive_definite(m: GaussianMoments, pd_floor: float) -> GaussianMoments:
    """Load the diagonal so the smallest eigenvalue is at least ``pd_floor``."""
    cov = m.cov
    scale = max(1.0, float(np.max(np.abs(cov))))
    if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12 * scale):
        raise InputError("covariance matrix is not symmetric")
    lam_min = float(np.linalg.eigvalsh(cov)[0])
    if lam_min >= pd_floor:
        return m
    repaired = cov + (pd_floor - lam_min) * np.eye(m.d)
    return GaussianMoments(m.mean, repaired, m.n_obs)


def repaired(m: GaussianMoments, rel_floor: float = PD_FLOOR_REL) -> GaussianMoments:
    """Apply the default relative floor; what every solver call does first."""
    if not np.all(np.isfinite(m.cov)) or not np.all(np.isfinite(m.mean)):
        raise NumericalError("moments contain non-finite entries")
    return ensure_positive_definite(m, default_pd_floor(m.cov, rel_floor))
