"""Fine quantization of the unit interval.

The middle band ``[c, 1-c]`` is cut into cells of width ``lam``; each tail
is cut dyadically down to ``c / 2**m`` with ``m = ceil(log2 c + tau log2 N)``.
Two Bhattacharyya values may be combined only when both lie in the core
``[c/2**m, 1 - c/2**m]`` and share a cell.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["QuantGrid", "build_grid", "subinterval_index", "in_core", "same_subinterval"]

DEFAULT_C = 0.1
DEFAULT_LAMBDA = 0.1


def log2_exact(N: int) -> int:
    """Return ``n`` with ``N == 2**n``; raise for anything else."""
    if isinstance(N, (bool, np.bool_)) or int(N) != N or N < 1 or (int(N) & (int(N) - 1)):
        raise ValueError(f"length must be a power of two, got {N}")
    return int(N).bit_length() - 1


@dataclass(frozen=True)
class QuantGrid:
    c: float
    lam: float
    tau: float
    n: int
    m: int
    m_formula: int
    boundaries: np.ndarray = field(repr=False, compare=False)

    @property
    def n_cells(self) -> int:
        return len(self.boundaries) - 1

    @property
    def core_lo(self) -> float:
        return self.c / 2.0**self.m

    @property
    def core_hi(self) -> float:
        return 1.0 - self.c / 2.0**self.m

    @property
    def clipped(self) -> bool:
        return self.m != self.m_formula

    def count_bound(self) -> float:
        """Cell-count bound ``2 tau log2 N + 12 + 2 log2 c``."""
        return 2 * self.tau * self.n + 12 + 2 * math.log2(self.c)

    def provenance(self) -> dict:
        return {
            "c": self.c,
            "lambda": self.lam,
            "tau": self.tau,
            "n": self.n,
            "m": self.m,
            "m_formula": self.m_formula,
            "m_clipped": self.clipped,
            "n_cells": self.n_cells,
            "count_bound": self.count_bound(),
        }


def build_grid(N: int, tau: float, c: float = DEFAULT_C, lam: float = DEFAULT_LAMBDA) -> QuantGrid:
    """Build the quantization grid for block length ``N``.

    ``m`` is clipped below at 1 when the formula goes nonpositive (small N).
    """
    n = log2_exact(N)
    if n < 1:
        raise ValueError("grid needs N >= 2")
    if not tau > 0:
        raise ValueError("tau must be positive")
    if not (0 < c < 0.5 and 0 < lam <= 1 - 2 * c):
        raise ValueError("need 0 < c < 1/2 and 0 < lam <= 1 - 2c")
    m_formula = math.ceil(math.log2(c) + tau * n)
    m = max(1, m_formula)

    lower = [c / 2.0**k for k in range(m, 0, -1)]
    k_mid = math.ceil(round((1 - 2 * c) / lam, 9))
    middle = [round(c + k * lam, 12) for k in range(k_mid)] + [round(1 - c, 12)]
    upper = [1 - c / 2.0**k for k in range(1, m + 1)]
    bounds = np.array([0.0, *lower, *middle, *upper, 1.0])
    if np.any(np.diff(bounds) <= 0):
        raise ValueError("grid boundaries are not strictly increasing")
    return QuantGrid(c=c, lam=lam, tau=float(tau), n=n, m=m, m_formula=m_formula, boundaries=bounds)


def subinterval_index(g: QuantGrid, z):
    """Index of the half-open cell ``[b_k, b_{k+1})`` holding ``z``; 1 maps to the last cell."""
    z_arr = np.asarray(z, dtype=float)
    if np.any((z_arr < 0) | (z_arr > 1)) or np.any(np.isnan(z_arr)):
        raise ValueError("z must lie in [0, 1]")
    idx = np.searchsorted(g.boundaries, z_arr, side="right") - 1
    idx = np.minimum(idx, g.n_cells - 1)
    return int(idx) if idx.ndim == 0 else idx


def in_core(g: QuantGrid, z):
    z_arr = np.asarray(z, dtype=float)
    res = (z_arr >= g.core_lo) & (z_arr <= g.core_hi)
    return bool(res) if res.ndim == 0 else res


def same_subinterval(g: QuantGrid, z1, z2):
    res = np.asarray(subinterval_index(g, z1)) == np.asarray(subinterval_index(g, z2))
    return bool(res) if res.ndim == 0 else res
