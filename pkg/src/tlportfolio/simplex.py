"""Euclidean projection onto the probability simplex and projected-gradient ascent."""

from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Closest point (in l2) of the probability simplex to ``v``; sort-based."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def on_simplex(x: np.ndarray, atol: float = 1e-9) -> bool:
    x = np.asarray(x, dtype=float)
    return bool(np.all(x >= -atol) and np.all(x <= 1 + atol) and abs(x.sum() - 1.0) <= atol)


def projected_ascent(
    f: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    max_iters: int = 5000,
    tol: float = 1e-8,
) -> tuple[np.ndarray, float]:
    """
    Maximise ``f`` over the simplex by projected gradient with Armijo backtracking.

    The step grows after every accepted move and halves on rejection. Stops
    when a step improves ``f`` by less than ``tol * 1e-3`` or the iterate
    stops moving.
    """
    x = project_simplex(x0)
    fx = f(x)
    step = 1.0
    for _ in range(max_iters):
        g = grad(x)
        while True:
            x_new = project_simplex(x + step * g)
            moved = x_new - x
            if np.max(np.abs(moved)) < 1e-15:
                return x, fx
            f_new = f(x_new)
            if f_new >= fx + 1e-4 * float(g @ moved):
                break
            step *= 0.5
            if step < 1e-20:
                return x, fx
        gain = f_new - fx
        x, fx = x_new, f_new
        step *= 2.0
        if gain < tol * 1e-3:
            break
    return x, fx


@lru_cache(maxsize=None)
def _compositions(n: int, parts: int) -> np.ndarray:
    # rows in descending lexicographic order, e.g. (n,0), (n-1,1), ..., (0,n)
    if parts == 1:
        return np.array([[n]], dtype=np.int32)
    blocks = []
    for first in range(n, -1, -1):
        rest = _compositions(n - first, parts - 1)
        head = np.full((rest.shape[0], 1), first, dtype=np.int32)
        blocks.append(np.hstack([head, rest]))
    return np.vstack(blocks)


def composition_count(n: int, parts: int) -> int:
    from math import comb

    return comb(n + parts - 1, parts - 1)


def simplex_lattice(n: int, parts: int) -> np.ndarray:
    """All points of the simplex with coordinates in multiples of ``1/n``."""
    return _compositions(n, parts) / n
