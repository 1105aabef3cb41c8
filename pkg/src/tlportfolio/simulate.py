"""
Synthetic panels for the three experiment families.

* ``gen_example1``: every dataset i.i.d. multivariate normal with identical moments.
* ``gen_var_factor``: returns ``r = alpha + X_t Pi_{m,t} + e`` driven by a shared,
  stationary matrix VAR(1) factor path ``X_{t+1} = B X_t + gamma_{t+1}``.
* ``gen_ff3``: the same loading structure with ``X`` fixed to fitted three-factor
  betas and ``Pi`` following observed (or synthetic) factor returns.

In the last two, sources listed in ``decaying`` get ``Pi_0 + eps / t`` (informative
in the limit) and sources in ``shifted`` get ``Pi_0 + rho * eps`` (a fixed
displacement). ``t`` is each dataset's own 1-based row counter.

Randomness comes from ``SeededRng``. Replication ``j`` of an experiment always
uses stream ``j``, so sweeping a parameter such as ``rho`` reuses the same
``B``, ``delta`` and noise draws (common random numbers).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .errors import InputError, NumericalError
from .estimators import GaussianMoments
from .maxsharpe import oracle_sharpe
from .panel import AlignedPanel, ReturnMatrix

EXAMPLE1_MU = (1.5, 1.9, 2.8, 1.7, -0.9)


@dataclass(frozen=True)
class SeededRng:
    master_seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(seq))


RngLike = Union[SeededRng, np.random.Generator]


def _gen(rng: RngLike) -> np.random.Generator:
    return rng.generator() if isinstance(rng, SeededRng) else rng


def toeplitz_cov(d: int, rho: float) -> np.ndarray:
    """``C[i, j] = rho ** |i - j|``."""
    idx = np.arange(d)
    return rho ** np.abs(np.subtract.outer(idx, idx)).astype(float)


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    vals, vecs = np.linalg.eigh(cov)
    if vals[0] < -1e-10 * max(1.0, abs(vals[-1])):
        raise NumericalError("covariance is not positive semi-definite")
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def sample_mvn(rng: RngLike, m: GaussianMoments, n: int, label: str = "mvn") -> ReturnMatrix:
    """``n`` independent draws: mean plus a covariance square root times standard normals."""
    if n < 2:
        raise InputError("a return matrix needs n >= 2 draws")
    g = _gen(rng)
    z = g.standard_normal((n, m.d))
    return ReturnMatrix(label, m.mean + z @ _psd_factor(m.cov).T)


# ---------------------------------------------------------------- Example 1


@dataclass(frozen=True)
class Example1Config:
    n_tilde: int = 500
    M: int = 5
    mu: tuple[float, ...] = EXAMPLE1_MU
    cov_rho: float = 0.5

    def __post_init__(self):
        if self.n_tilde < 4 or self.M < 0:
            raise InputError("Example 1 needs n_tilde >= 4 and M >= 0")

    def moments(self) -> GaussianMoments:
        return GaussianMoments(np.array(self.mu), toeplitz_cov(len(self.mu), self.cov_rho))


def gen_example1(rng: RngLike, cfg: Example1Config) -> AlignedPanel:
    g = _gen(rng)
    m = cfg.moments()
    data = [sample_mvn(g, m, cfg.n_tilde, label=f"S{i}" if i else "T") for i in range(cfg.M + 1)]
    return AlignedPanel(data[0], tuple(data[1:]))


# ---------------------------------------------------------- VAR factor DGP


def gen_stationary_B(rng: RngLike, dim: int, max_attempts: int = 10_000) -> np.ndarray:
    """Uniform(-1, 1) matrix redrawn until its spectral radius is below one."""
    if dim < 1:
        raise InputError("dim must be >= 1")
    g = _gen(rng)
    for _ in range(max_attempts):
        B = g.uniform(-1.0, 1.0, size=(dim, dim))
        if np.max(np.abs(np.linalg.eigvals(B))) < 1.0:
            return B
    raise NumericalError(f"no stationary B after {max_attempts} draws")


@dataclass(frozen=True)
class VarFactorConfig:
    """
    Simulation with a shared VAR(1) factor path.

    ``sizes`` overrides the default ``N_m = (m + 1) * n0``. ``sources`` picks
    which of the ``M`` generated sources enter the panel (all by default);
    every source is still drawn so the selection never changes the others.
    """

    n0: int = 500
    M: int = 5
    sizes: Optional[tuple[int, ...]] = None
    alpha: tuple[float, ...] = (0.5,) * 5
    pi_base: tuple[float, ...] = (0.9, 0.6, 0.7)
    rho: float = 1.0
    delta_scale: float = 0.1
    omega_rho: float = 0.5
    decaying: tuple[int, ...] = (1, 5)
    shifted: tuple[int, ...] = (2, 3, 4)
    burn_in: int = 200
    sources: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if self.n0 < 4:
            raise InputError("n0 must be >= 4")
        if self.rho < 0:
            raise InputError("rho must be >= 0")
        if self.sizes is not None and len(self.sizes) != self.M + 1:
            raise InputError(f"sizes needs {self.M + 1} entries")
        for m in self.decaying + self.shifted + (self.sources or ()):
            if not 1 <= m <= self.M:
                raise InputError(f"source index {m} outside 1..{self.M}")

    def dataset_sizes(self) -> tuple[int, ...]:
        if self.sizes is not None:
            return tuple(self.sizes)
        return tuple((m + 1) * self.n0 for m in range(self.M + 1))

    def included_sources(self) -> tuple[int, ...]:
        return tuple(range(1, self.M + 1)) if self.sources is None else tuple(self.sources)

    def informative_set(self) -> tuple[int, ...]:
        """Panel indices of the target and every source that is not shifted."""
        return (0,) + tuple(
            pos for pos, m in enumerate(self.included_sources(), start=1) if m not in self.shifted
        )


def _loading_paths(base: np.ndarray, n: int, m: int, rho: float, decaying, shifted, shock) -> np.ndarray:
    """``(n, k)`` array of Pi_{m,t} for t = 1..n; ``shock`` is (k,) or (n, k)."""
    pi = np.broadcast_to(base, (n, base.shape[-1])).astype(float).copy()
    if m in decaying:
        pi += shock / np.arange(1, n + 1)[:, None]
    elif m in shifted:
        pi += rho * shock
    return pi


def gen_var_factor(rng: RngLike, cfg: VarFactorConfig) -> AlignedPanel:
    g = _gen(rng)
    alpha = np.asarray(cfg.alpha, dtype=float)
    pi_base = np.asarray(cfg.pi_base, dtype=float)
    d, k = alpha.shape[0], pi_base.shape[0]
    sizes = cfg.dataset_sizes()
    omega_chol = np.linalg.cholesky(toeplitz_cov(d, cfg.omega_rho))

    B = gen_stationary_B(g, d)
    deltas = g.normal(0.0, np.sqrt(cfg.delta_scale), size=(cfg.M + 1, k))
    deltas[0] = 0.0

    # one factor path for everybody, aligned at the tail
    length = max(sizes)
    shocks = omega_chol @ g.standard_normal((cfg.burn_in + length, d, k))
    X = np.zeros((d, k))
    path = np.empty((length, d, k))
    for step in range(cfg.burn_in + length):
        X = B @ X + shocks[step]
        if step >= cfg.burn_in:
            path[step - cfg.burn_in] = X

    datasets = []
    for m, n in enumerate(sizes):
        Xm = path[length - n:]
        pi = _loading_paths(pi_base, n, m, cfg.rho, cfg.decaying, cfg.shifted, deltas[m])
        noise = g.standard_normal((n, d)) @ omega_chol.T
        values = alpha + np.einsum("tij,tj->ti", Xm, pi) + noise
        datasets.append(ReturnMatrix("T" if m == 0 else f"S{m}", values))
    chosen = tuple(datasets[m] for m in cfg.included_sources())
    return AlignedPanel(datasets[0], chosen)


# ---------------------------------------------------------------- FF3 DGP


FACTOR_COLUMNS = ("smb", "hml", "mkt")


def load_factors_csv(path) -> np.ndarray:
    """Read a ``date,smb,hml,mkt`` file into a ``(T, 3)`` array in that column order."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            fields = [f.strip().lower() for f in (reader.fieldnames or [])]
            missing = [c for c in FACTOR_COLUMNS if c not in fields]
            if missing:
                raise InputError(f"{path}: missing factor columns {missing}")
            rows = []
            for lineno, raw in enumerate(reader, start=2):
                row = {k.strip().lower(): v for k, v in raw.items() if k is not None}
                try:
                    rows.append([float(row[c]) for c in FACTOR_COLUMNS])
                except (TypeError, ValueError):
                    raise InputError(f"{path}:{lineno}: bad factor value") from None
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise InputError(f"{path}: no factor rows")
    return np.array(rows)


def synthetic_factors(
    rng: RngLike,
    n: int,
    mean: Sequence[float] = (0.02, 0.01, 0.05),
    cov: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Gaussian stand-in for (SMB, HML, MKT) when no factor file is available."""
    cov = np.diag([0.25, 0.25, 1.0]) if cov is None else np.asarray(cov, dtype=float)
    m = GaussianMoments(np.asarray(mean, dtype=float), cov)
    g = _gen(rng)
    return m.mean + g.standard_normal((n, m.d)) @ _psd_factor(m.cov).T


def fit_ff3_ols(returns, factors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Per-asset OLS of returns on an intercept and the factor columns.

    Solved through the normal equations with a Cholesky factor. Factor columns
    that are identically zero are dropped and get a zero slope.

    Returns
    -------
    alpha : (d,) intercepts
    beta : (d, 3) slopes, one row per asset
    """
    R = returns.values if isinstance(returns, ReturnMatrix) else np.asarray(returns, dtype=float)
    if R.ndim == 1:
        R = R[:, None]
    F = np.asarray(factors, dtype=float)
    if F.ndim != 2 or F.shape[0] != R.shape[0]:
        raise InputError(f"factor rows {F.shape} do not match return rows {R.shape[0]}")
    active = np.any(F != 0.0, axis=0)
    Z = np.hstack([np.ones((F.shape[0], 1)), F[:, active]])
    if Z.shape[0] < Z.shape[1]:
        raise InputError(f"{Z.shape[0]} rows cannot identify {Z.shape[1]} coefficients")
    gram = Z.T @ Z
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        raise NumericalError("factor design is rank deficient") from None
    if np.min(np.diag(chol)) < 1e-10 * np.max(np.diag(chol)):
        raise NumericalError("factor design is rank deficient")
    coef = np.linalg.solve(chol.T, np.linalg.solve(chol, Z.T @ R))
    beta = np.zeros((R.shape[1], F.shape[1]))
    beta[:, active] = coef[1:].T
    return coef[0].copy(), beta


# illustrative loadings for self-contained runs; replace by fit_ff3_ols output
DEFAULT_FF3_ALPHA = (0.05, 0.03, 0.04, 0.02, 0.06)
DEFAULT_FF3_BETA = (
    (0.8, 0.3, 1.1),
    (0.2, 0.6, 0.9),
    (1.0, -0.2, 1.2),
    (0.4, 0.5, 0.8),
    (0.6, 0.1, 1.3),
)


@dataclass(frozen=True)
class FF3Config:
    """
    Factor-model simulation calibrated by OLS.

    ``factors`` is a ``(T, 3)`` array of (SMB, HML, MKT) with ``T >= max(sizes)``;
    when ``None`` a synthetic Gaussian path is drawn from the replication stream.
    """

    alpha: tuple[float, ...] = DEFAULT_FF3_ALPHA
    beta: tuple[tuple[float, ...], ...] = DEFAULT_FF3_BETA
    factors: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    sizes: tuple[int, ...] = (500,) * 6
    rho: float = 1.0
    delta_scale: float = 0.1
    omega_rho: float = 0.5
    decaying: tuple[int, ...] = (1, 5)
    shifted: tuple[int, ...] = (2, 3, 4)
    sources: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim != 2 or beta.shape != (len(self.alpha), 3) or len(self.alpha) < 1:
            raise InputError("beta must be (d, 3) with d = len(alpha) >= 1")
        if self.rho < 0:
            raise InputError("rho must be >= 0")
        if self.factors is not None:
            F = np.asarray(self.factors, dtype=float)
            if F.ndim != 2 or F.shape[1] != 3:
                raise InputError("factors must be a (T, 3) array")
            if F.shape[0] < max(self.sizes):
                raise InputError(f"factor series has {F.shape[0]} rows, need {max(self.sizes)}")

    @property
    def M(self) -> int:
        return len(self.sizes) - 1

    def included_sources(self) -> tuple[int, ...]:
        return tuple(range(1, self.M + 1)) if self.sources is None else tuple(self.sources)

    def informative_set(self) -> tuple[int, ...]:
        return (0,) + tuple(
            pos for pos, m in enumerate(self.included_sources(), start=1) if m not in self.shifted
        )


def gen_ff3(rng: RngLike, cfg: FF3Config) -> AlignedPanel:
    g = _gen(rng)
    alpha = np.asarray(cfg.alpha, dtype=float)
    beta = np.asarray(cfg.beta, dtype=float)
    d = alpha.shape[0]
    length = max(cfg.sizes)
    F = synthetic_factors(g, length) if cfg.factors is None else np.asarray(cfg.factors, float)[:length]
    omega_chol = np.linalg.cholesky(toeplitz_cov(d, cfg.omega_rho))

    datasets = []
    for m, n in enumerate(cfg.sizes):
        eps = g.normal(0.0, np.sqrt(cfg.delta_scale), size=(n, 3)) if m else 0.0
        pi = _loading_paths(F[length - n:], n, m, cfg.rho, cfg.decaying, cfg.shifted, eps)
        noise = g.standard_normal((n, d)) @ omega_chol.T
        datasets.append(ReturnMatrix("T" if m == 0 else f"S{m}", alpha + pi @ beta.T + noise))
    chosen = tuple(datasets[m] for m in cfg.included_sources())
    return AlignedPanel(datasets[0], chosen)


__all__ = [
    "SeededRng",
    "Example1Config",
    "VarFactorConfig",
    "FF3Config",
    "sample_mvn",
    "gen_example1",
    "gen_stationary_B",
    "gen_var_factor",
    "fit_ff3_ols",
    "gen_ff3",
    "oracle_sharpe",
    "load_factors_csv",
    "synthetic_factors",
    "toeplitz_cov",
]
