"""Extremal deterministic process and the finite-length constants.

The extremal process replaces the degraded Bhattacharyya value of a pair
``(u, v)`` by ``u + v`` and the upgraded one by ``u v``; a pair with
``u > 1 > v`` is left alone.  Values overflow and underflow doubles after
a handful of levels, so the process runs on ``log2`` values throughout.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .polarize import Layer, level_positions, sort_permutation
from .quantize import DEFAULT_C, log2_exact
from .speed import DEFAULT_B, mu_threshold

__all__ = [
    "LOG3",
    "GAMMA",
    "LOG_TOL",
    "q_potential",
    "s_weight",
    "s_levels",
    "extremal_step",
    "ExtremalTrace",
    "run_extremal",
    "run_coupled",
    "p_count_bound",
    "c_rho",
    "d2_sup",
    "ConstantsReport",
    "compute_constants",
]

LOG3 = math.log2(3.0)
GAMMA = 1.0 + LOG3
# absolute slack for comparisons between log2 values built by different float paths
LOG_TOL = 1e-9


def q_potential(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("potential is defined for x >= 0")
    out = np.where(x <= 1.0, x * (2.0 - np.minimum(x, 1.0)), 1.0)
    return float(out) if out.ndim == 0 else out


def _q_from_log(lx):
    x = np.exp2(np.minimum(lx, 0.0))
    return np.where(lx > 0, 1.0, x * (2.0 - x))


def s_weight(i: int, n: int, j: int | None = None) -> int:
    """Ones among the leftmost ``j`` of the ``n`` bits of ``i - 1``."""
    if j is None:
        j = n
    if not 1 <= i <= 1 << n or not 0 <= j <= n:
        raise ValueError("index or level out of range")
    return bin((i - 1) >> (n - j)).count("1")


def s_levels(n: int, j: int) -> np.ndarray:
    """``s_j`` for every 0-based position of a length ``2**n`` level."""
    top = np.arange(1 << n) >> (n - j)
    return np.array([bin(int(t)).count("1") for t in range(1 << j)], dtype=np.int64)[top]


def _pair_rule(lu, lv):
    return ((lu <= 0) & (lv <= 0)) | ((lu >= 0) & (lv >= 0))


def _step_log(lx, j, n, perm=None, active=None):
    if perm is None:
        perm = sort_permutation(lx, j - 1, n)
    ls = lx[perm]
    lu, lv = ls[0::2], ls[1::2]
    if active is None:
        active = _pair_rule(lu, lv)
    elif len(active) != len(lu):
        raise ValueError("mask length mismatch")
    mpos, ppos = level_positions(n, j)
    with np.errstate(invalid="ignore"):
        minus = np.logaddexp2(lu, lv)
    minus = np.where(np.isneginf(lu) & np.isneginf(lv), -np.inf, minus)
    out = np.empty_like(lx)
    out[mpos] = np.where(active, minus, lu)
    out[ppos] = np.where(active, lu + lv, lv)
    return out, perm, np.asarray(active, dtype=bool)


def extremal_step(xs, j: int, mask=None):
    """One level of the extremal process on linear values.

    Returns ``(next_xs, perm, active)``; ``mask`` (active flags) overrides
    the self skip rule.
    """
    xs = np.asarray(xs, dtype=float)
    n = log2_exact(len(xs))
    with np.errstate(divide="ignore"):
        lx = np.log2(xs)
    out, perm, active = _step_log(lx, j, n, active=None if mask is None else np.asarray(mask, bool))
    return np.exp2(out), perm, active


@dataclass
class ExtremalTrace:
    """Per-level state of an extremal process, stored as ``log2`` values.

    ``a`` and ``ly`` are only populated by :func:`run_coupled`.
    """

    n: int
    lx: list
    layers: list
    ly: list = field(default_factory=list)
    a: list = field(default_factory=list)

    @property
    def levels(self) -> int:
        return len(self.lx) - 1

    def x(self, j: int) -> np.ndarray:
        return np.exp2(self.lx[j])

    def potential(self, j: int) -> float:
        return math.fsum(_q_from_log(self.lx[j]))

    def skips(self, j: int) -> int:
        return int((~self.layers[j - 1].active).sum())

    def coupling_slack(self, j: int) -> np.ndarray:
        """``log2 y - (2**s - a + log2 x)``; nonnegative when the coupling holds."""
        s = s_levels(self.n, j).astype(float)
        rhs = np.exp2(s) - self.a[j] + self.lx[j]
        with np.errstate(invalid="ignore"):
            slack = self.ly[j] - rhs
        return np.where(np.isneginf(self.lx[j]), np.inf, slack)

    def good_count(self, j: int) -> int:
        """``#{i : x_{j,i} <= 2**(-2**s_j(i) + a_{j,i})}``."""
        s = s_levels(self.n, j).astype(float)
        return int(np.sum(self.lx[j] <= -np.exp2(s) + self.a[j] + LOG_TOL))


def _as_log(x0, lo_open):
    x0 = np.asarray(x0, dtype=float)
    if np.any(np.isnan(x0)) or np.any(x0 < 0):
        raise ValueError("initial values must be nonnegative")
    with np.errstate(divide="ignore"):
        return np.log2(x0)


def run_extremal(x0, levels: int | None = None) -> ExtremalTrace:
    """The extremal process with its own sorting and skip rule."""
    lx = _as_log(x0, False)
    n = log2_exact(len(lx))
    levels = n if levels is None else levels
    trace = ExtremalTrace(n=n, lx=[lx], layers=[])
    for j in range(1, levels + 1):
        lx, perm, active = _step_log(lx, j, n)
        trace.lx.append(lx)
        trace.layers.append(Layer(perm, active))
    return trace


def run_coupled(x0, levels: int | None = None, check: bool = True) -> ExtremalTrace:
    """Run ``y = 2x`` with the self rule and replay its moves on ``x``.

    Tracks the correction exponents ``a`` so that
    ``y_{j,i} >= 2**(2**s_j(i) - a_{j,i}) x_{j,i}`` at every level; with
    ``check`` a violation raises ``AssertionError``.
    """
    x0 = np.asarray(x0, dtype=float)
    if np.any((x0 < 0) | (x0 >= 0.5)):
        raise ValueError("coupled process needs 0 <= x0 < 1/2")
    lx = _as_log(x0, True)
    n = log2_exact(len(lx))
    levels = n if levels is None else levels
    if not 0 <= levels <= n:
        raise ValueError("levels out of range")
    if levels > 39:
        raise ValueError("correction exponents exceed int64 beyond 39 levels")
    ly = lx + 1.0
    a = np.zeros(len(lx), dtype=np.int64)
    trace = ExtremalTrace(n=n, lx=[lx], layers=[], ly=[ly], a=[a])
    for j in range(1, levels + 1):
        ly_next, perm, active = _step_log(ly, j, n)
        lx_next, _, _ = _step_log(lx, j, n, perm=perm, active=active)
        ap = a[perm]
        a1, a2 = ap[0::2], ap[1::2]
        # s_{j-1} is shared by both members of a pair: popcount of the sub-block id
        half = 1 << (n - j)
        block = np.arange(len(a1)) // half
        s_prev = np.array([bin(int(t)).count("1") for t in range(1 << (j - 1))], dtype=np.int64)[block]
        mpos, ppos = level_positions(n, j)
        a = np.empty_like(a)
        a[mpos] = np.where(active, np.maximum(a1, a2), a1)
        a[ppos] = np.where(active, a1 + a2, a2 + (np.int64(1) << s_prev))
        lx, ly = lx_next, ly_next
        trace.lx.append(lx)
        trace.ly.append(ly)
        trace.a.append(a)
        trace.layers.append(Layer(perm, active))
        if check:
            slack = trace.coupling_slack(j)
            if np.any(slack < -LOG_TOL):
                raise AssertionError(f"coupling inequality violated at level {j}")
    return trace


def p_count_bound(n, alpha: float, beta: float):
    """Exponent slack ``p(n, alpha, beta)`` of the sub-block counting bound."""
    n = np.asarray(n, dtype=float)
    lg = math.log2(GAMMA)
    ln = np.log2(n)
    lab = np.log2(alpha * n + beta)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (2 - lg + ln + lab) * (ln - lg) + np.log2(3 - lg + ln + lab)
    return float(out) if out.ndim == 0 else out


def c_rho(rho: float, eta: float, b: float = DEFAULT_B, c: float = DEFAULT_C) -> tuple[float, int, int]:
    """``log2(2 + max_n (c1 n + c2) 2**(rho n + ceil(n/(eta+1)) - n))``.

    Returns ``(c_rho, argmax, scan_end)``.  The scan stops once the
    envelope ``(c1 n + c2) 2**(1 + (rho + 1/(eta+1) - 1) n)`` is decreasing
    and below the running maximum, which bounds every later term.
    """
    kappa = rho + 1.0 / (eta + 1.0) - 1.0
    if not kappa < 0:
        raise ValueError("need rho < eta / (eta + 1)")
    c1 = 2.0 * rho / b
    c2 = 12.0 + 2.0 * math.log2(c)
    n_turn = max(1.0, 1.0 / (-kappa * math.log(2.0)) - c2 / c1)
    best, arg = -math.inf, 0
    start, chunk = 1, 1 << 16
    while True:
        n = np.arange(start, start + chunk, dtype=np.int64)
        expo = rho * n + np.ceil(n / (eta + 1.0)) - n
        terms = (c1 * n + c2) * np.exp2(expo)
        k = int(np.argmax(terms))
        if terms[k] > best:
            best, arg = float(terms[k]), int(n[k])
        end = int(n[-1])
        envelope = (c1 * end + c2) * 2.0 ** (1.0 + kappa * end)
        if end >= n_turn and envelope < best:
            return math.log2(2.0 + best), arg, end
        start += chunk


def _q_of_n(n, mu, rho, alpha, beta):
    slope = 1.0 / mu - rho / (1.0 + GAMMA * rho)
    return n * slope + 1.0 + 1.0 / GAMMA + p_count_bound(rho * GAMMA / (1.0 + rho * GAMMA) * n, alpha, beta)


def d2_sup(mu: float, rho: float, alpha: float, beta: float) -> tuple[float, int, int]:
    """Sup over positive integers of the ``q(n)`` slack; returns ``(d2, argmax, scan_end)``.

    Integers are scanned exhaustively in chunks until ``q`` is past its
    peak and has fallen 64 below the running max; ``q`` is a negative
    linear term plus a polylog term that is concave there, so it cannot
    recover.
    """
    slope = 1.0 / mu - rho / (1.0 + GAMMA * rho)
    if not slope < 0:
        raise ValueError("q(n) has nonnegative slope; mu too small for rho")
    best, arg = -math.inf, 0
    start, chunk = 1, 1 << 20
    while True:
        n = np.arange(start, start + chunk, dtype=float)
        q = _q_of_n(n, mu, rho, alpha, beta)
        q = np.where(np.isnan(q), -np.inf, q)
        k = int(np.argmax(q))
        if q[k] > best:
            best, arg = float(q[k]), int(n[k])
        end = int(n[-1])
        if end > 2 * arg and q[-1] < best - 64 and q[-1] < q[-2]:
            return best, arg, end
        start += chunk
        if start > 1 << 40:
            raise RuntimeError("q(n) scan did not terminate")


@dataclass
class ConstantsReport:
    b: float
    eta: float
    mu: float
    mu_threshold: float
    Pe: float
    n: int
    rho: float
    tau: float
    c_rho: float
    t: float
    d1: float
    n1: int
    n2: int
    l: int
    alpha: float
    beta: float
    d2: float
    log2_d3: float
    log2_kappa: float
    c_rho_scan: tuple = (0, 0)
    d2_scan: tuple = (0, 0)

    @property
    def d3(self) -> float:
        return 2.0**self.log2_d3 if self.log2_d3 < 1023 else math.inf

    @property
    def kappa(self) -> float:
        return 2.0**self.log2_kappa if self.log2_kappa < 1023 else math.inf

    def rate_guarantee(self, avg_capacity: float, n: int | None = None) -> float:
        """``I - d3 N**(-1/mu)``; ``-inf`` when the gap term overflows."""
        n = self.n if n is None else n
        e = self.log2_d3 - n / self.mu
        return avg_capacity - 2.0**e if e < 1023 else -math.inf

    def M_floor(self, avg_capacity: float) -> float:
        e = math.log2(self.d1) - self.n / self.mu
        if e >= 1023:
            return -math.inf
        return math.floor(2**self.n1 * (avg_capacity - 2.0**e))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["d3"] = self.d3
        d["kappa"] = self.kappa
        d["c_rho_scan"] = list(self.c_rho_scan)
        d["d2_scan"] = list(self.d2_scan)
        return d


def compute_constants(mu: float, Pe: float, b: float = DEFAULT_B, eta: float = 0.139,
                      n: int = 10, t: float = 0.49, c: float = DEFAULT_C) -> ConstantsReport:
    """All constants of the two-stage construction for block length ``2**n``.

    ``eta`` should already be a certified (guarded) lower estimate.
    """
    if not 0 < Pe < 1:
        raise ValueError("target block error probability must lie in (0, 1)")
    if not 0 < t < 0.5:
        raise ValueError("t must lie in (0, 1/2)")
    if not 0 < eta:
        raise ValueError("eta must be positive")
    thr = mu_threshold(eta)
    if not mu > thr:
        raise ValueError(f"mu = {mu} does not exceed the threshold {thr:.6f}")
    if n < 1:
        raise ValueError("n must be at least 1")
    rho = 2.0 / (mu + 1.0 / eta - LOG3)
    tau = rho / b
    cr, cr_arg, cr_end = c_rho(rho, eta, b, c)
    d1 = (1.0 / t) * 2.0 ** (cr + 1.0) + 1.0
    n1 = math.ceil(n / (1.0 + rho * GAMMA))
    n2 = n - n1
    l = math.floor(n2 / GAMMA)
    alpha = 1.0 + 1.0 / (rho * GAMMA)
    beta = -math.log2(Pe) + alpha
    d2, d2_arg, d2_end = d2_sup(mu, rho, alpha, beta)
    # d3 = d1 + 2**(c_rho+2) + 2**d2 + 1, summed in the log domain
    terms = np.array([math.log2(d1), cr + 2.0, d2, 0.0])
    top = terms.max()
    log2_d3 = float(top + math.log2(math.fsum(np.exp2(terms - top))))
    return ConstantsReport(
        b=b, eta=eta, mu=mu, mu_threshold=thr, Pe=Pe, n=n, rho=rho, tau=tau, c_rho=cr, t=t,
        d1=d1, n1=n1, n2=n2, l=l, alpha=alpha, beta=beta, d2=d2, log2_d3=log2_d3,
        log2_kappa=mu * log2_d3, c_rho_scan=(cr_arg, cr_end), d2_scan=(d2_arg, d2_end),
    )
