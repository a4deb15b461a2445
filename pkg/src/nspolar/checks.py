"""Randomized property suites.

Each ``check_*`` function draws its own instances from a seeded generator,
verifies one structural property and returns a :class:`CheckResult`.  The
CLI ``selftest`` runs them at reduced sizes; the acceptance tests run them
at full size.
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelArray
from .codec import channel_llr, encode, sc_decode
from .construct import cached_eta, construct_code, partition_channels, single_stage_spec, stage2
from .extremal import GAMMA, LOG_TOL, c_rho, compute_constants, p_count_bound, run_coupled, run_extremal, s_levels
from .polarize import run_det_polar1, run_det_polar2
from .quantize import build_grid, subinterval_index
from .sim import run_monte_carlo, trial_rng
from .speed import DEFAULT_B, delta_f, estimate_eta, mu_threshold, speed_trace

__all__ = ["CheckResult", "ALL_CHECKS", "run_all"] + [f"check_{k}" for k in (
    "eta", "mu_threshold", "local_speed", "energy_monotone", "average_speed", "potential",
    "coupling", "counting", "partition", "dominance", "end_to_end", "classical")]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    metrics: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail} ({self.seconds:.1f}s)"


class _Timer:
    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.t0


def _bec_runs(rng, N):
    """Random erasure profiles of a few shapes: iid, sorted ramps and blocks."""
    kind = rng.integers(3)
    if kind == 0:
        return rng.uniform(0, 1, N)
    if kind == 1:
        return np.sort(rng.uniform(0, 1, N))[::rng.choice([1, -1])].copy()
    levels = rng.uniform(0, 1, 1 << int(rng.integers(1, 5)))
    return np.repeat(levels, N // len(levels))


def check_eta(b: float = DEFAULT_B, resolution: float = 1e-5, lo: float = 0.138, hi: float = 0.140,
              budget: float = 60.0) -> CheckResult:
    """Eta estimate in range, in time, and an h profile that is one band below 1 with a single peak."""
    with _Timer() as tm:
        est = estimate_eta(b, resolution)
    h = est.h
    mid = 0.5 * (h.max() + h.min())
    up = np.flatnonzero(np.diff((h > mid).astype(int)) == 1)
    peaks = len(up) + int(h[0] > mid)
    ok_range = lo <= est.eta <= hi
    ok_shape = bool(np.all(h < 1)) and peaks == 1 and 0 < est.sup_z < 1
    ok = ok_range and ok_shape and tm.seconds < budget
    return CheckResult("eta estimate", ok,
                       f"eta={est.eta:.6f} sup_z={float(est.sup_z):.4f} max h={h.max():.4f} "
                       f"min h={h.min():.4f} peaks above mid-band={peaks}", tm.seconds,
                       {"eta": est.eta, "sup_h": est.sup_h, "peaks": peaks})


def check_mu_threshold(eta: float | None = None, lo: float = 10.70, hi: float = 10.86) -> CheckResult:
    with _Timer() as tm:
        eta = cached_eta() if eta is None else eta
        thr = mu_threshold(eta)
        try:
            compute_constants(10.5, 0.01, eta=eta, n=14)
            rejects = False
        except ValueError:
            rejects = True
        try:
            compute_constants(10.79, 0.01, eta=eta, n=14)
            accepts = True
        except ValueError:
            accepts = False
    ok = lo <= thr <= hi and rejects and accepts
    return CheckResult("mu threshold", ok, f"threshold={thr:.4f} rejects 10.5={rejects} accepts 10.79={accepts}",
                       tm.seconds, {"threshold": thr})


def check_local_speed(n_pairs: int = 100_000, seed: int = 0, budget: float = 10.0,
                      eta: float | None = None) -> CheckResult:
    """Exact BEC pairs drawn inside one core cell never lose less than ``2**-eta`` of their energy."""
    eta = cached_eta() if eta is None else eta
    rng = np.random.default_rng(seed)
    bound = 2.0 ** -eta
    worst = 0.0
    bad = 0
    with _Timer() as tm:
        grids = [build_grid(1 << n, tau) for n in (10, 14, 20, 30) for tau in (0.1667, 0.3)]
        per = -(-n_pairs // len(grids))
        drawn = 0
        for g in grids:
            cells = np.arange(g.n_cells)
            left, right = g.boundaries[:-1], g.boundaries[1:]
            core = (left >= g.core_lo) & (right <= g.core_hi)
            cells = cells[core]
            k = rng.choice(cells, per)
            z1 = rng.uniform(left[k], right[k])
            z2 = rng.uniform(left[k], right[k])
            same = subinterval_index(g, z1) == subinterval_index(g, z2)
            z1, z2 = z1[same], z2[same]
            d = delta_f(z1, z2, z1 + z2 - z1 * z2, z1 * z2, DEFAULT_B)
            bad += int(np.sum(d > bound))
            worst = max(worst, float(d.max()))
            drawn += len(z1)
    ok = bad == 0 and drawn >= n_pairs and tm.seconds < budget
    return CheckResult("local polarization speed", ok,
                       f"{drawn} pairs, max ratio={worst:.6f} vs 2^-eta={bound:.6f}, violations={bad}",
                       tm.seconds, {"violations": bad, "worst": worst})


def check_energy_monotone(runs: int = 100, n: int = 10, seed: int = 1, tau: float = 0.12 / DEFAULT_B) -> CheckResult:
    rng = np.random.default_rng(seed)
    grid = build_grid(1 << n, tau)
    bad = 0
    with _Timer() as tm:
        for _ in range(runs):
            r = run_det_polar2(ChannelArray.bec(_bec_runs(rng, 1 << n)), grid)
            bad += int(np.sum(np.diff(r.energy) > 0))
    return CheckResult("energy non-increasing", bad == 0, f"{runs} runs at N=2^{n}, violations={bad}",
                       tm.seconds, {"violations": bad})


def check_average_speed(rho: float = 0.12, ns=(10, 12, 14), runs: int = 20, seed: int = 2,
                        eta: float | None = None) -> CheckResult:
    """Average speed above ``rho - c_rho / n`` with the grid built at ``tau = rho / b``."""
    eta = cached_eta() if eta is None else eta
    crho = c_rho(rho, eta)[0]
    rng = np.random.default_rng(seed)
    bad, margin = 0, math.inf
    with _Timer() as tm:
        for n in ns:
            grid = build_grid(1 << n, rho / DEFAULT_B)
            for _ in range(runs):
                r = run_det_polar2(ChannelArray.bec(_bec_runs(rng, 1 << n)), grid)
                if r.energy[-1] <= 0:
                    continue  # fully polarized: infinite speed
                _, bar = speed_trace(r.energy)
                margin = min(margin, bar - (rho - crho / n))
                bad += int(bar <= rho - crho / n)
    return CheckResult("average speed bound", bad == 0,
                       f"c_rho={crho:.4f}, n in {list(ns)} x {runs} runs, min margin={margin:.4f}, violations={bad}",
                       tm.seconds, {"violations": bad, "c_rho": crho})


def _random_x0(rng, N):
    kind = rng.integers(3)
    if kind == 0:
        return rng.uniform(0, 1, N)
    if kind == 1:
        return rng.uniform(0, 3, N)
    return np.exp2(-rng.exponential(4.0, N))


POTENTIAL_RTOL = 1e-12


def check_potential(instances: int = 1000, max_n: int = 12, seed: int = 3) -> CheckResult:
    """Potential non-increasing and few values at or above 1 along the extremal process.

    Values are propagated as floating-point logarithms, so an increase is
    only counted when it exceeds ``POTENTIAL_RTOL`` relative to the previous
    level; the largest raw relative increase is reported.
    """
    rng = np.random.default_rng(seed)
    bad_q = bad_c = 0
    raw = 0.0
    with _Timer() as tm:
        for _ in range(instances):
            n = int(rng.integers(1, max_n + 1))
            tr = run_extremal(_random_x0(rng, 1 << n))
            q0 = tr.potential(0)
            qs = [tr.potential(j) for j in range(n + 1)]
            for a, b in zip(qs, qs[1:]):
                if b > a:
                    raw = max(raw, (b - a) / a)
                bad_q += int(b > a * (1 + POTENTIAL_RTOL))
            bad_c += sum(int(np.sum(tr.lx[j] >= 0)) > q0 for j in range(n + 1))
    ok = bad_q == 0 and bad_c == 0
    return CheckResult("potential and large-value count", ok,
                       f"{instances} processes, potential increases={bad_q}, largest raw relative increase="
                       f"{raw:.2e}, count violations={bad_c}", tm.seconds,
                       {"potential_violations": bad_q, "count_violations": bad_c, "raw_increase": raw})


def check_coupling(runs: int = 100, n: int = 10, seed: int = 4) -> CheckResult:
    rng = np.random.default_rng(seed)
    bad_cpl = bad_a = bad_cnt = 0
    with _Timer() as tm:
        for _ in range(runs):
            x0 = rng.uniform(0, 0.5, 1 << n) * rng.uniform(0.02, 1)
            tr = run_coupled(x0, check=False)
            need = (1 << n) - 4 * math.fsum(x0 * (1 - x0))
            for j in range(n + 1):
                bad_cpl += int(np.sum(tr.coupling_slack(j) < -LOG_TOL))
                bad_a += int(tr.a[j].sum() > 3 ** j)
                bad_cnt += int(tr.good_count(j) < need)
    ok = bad_cpl == bad_a == bad_cnt == 0
    return CheckResult("coupled process", ok,
                       f"{runs} runs at N=2^{n}: coupling violations={bad_cpl}, sum a > 3^j: {bad_a}, "
                       f"count violations={bad_cnt}", tm.seconds,
                       {"coupling": bad_cpl, "a_sum": bad_a, "count": bad_cnt})


def check_counting(max_n: int = 20, per: int = 5, seed: int = 5) -> CheckResult:
    """Exhaustive count of indices with ``2**s_j(i) - a_i <= alpha n + beta`` against the bound."""
    rng = np.random.default_rng(seed)
    bad = cases = 0
    worst = -math.inf
    with _Timer() as tm:
        for n in range(2, max_n + 1):
            for j in range(1, int(n / GAMMA) + 1):
                s = s_levels(n, j).astype(float)
                for _ in range(per):
                    alpha = rng.uniform(0.1, 5)
                    beta = rng.uniform(0.1, 20)
                    total = int(rng.integers(0, 3 ** j + 1))
                    if rng.random() < 0.5:
                        a = rng.multinomial(total, np.full(1 << n, 1.0 / (1 << n)))
                    else:
                        a = np.zeros(1 << n, dtype=np.int64)
                        a[rng.choice(1 << n, min(1 << n, 4), replace=False)] = total // 4
                    count = int(np.sum(np.exp2(s) - a <= alpha * n + beta))
                    lhs = math.log2(count) if count else -math.inf
                    slack = lhs - (n - j + p_count_bound(n, alpha, beta))
                    worst = max(worst, slack)
                    bad += int(slack > 0)
                    cases += 1
    return CheckResult("counting bound", bad == 0,
                       f"{cases} cases over n<= {max_n}, worst log2 slack={worst:.3f}, violations={bad}",
                       tm.seconds, {"violations": bad})


def _best_partition(values, K, M):
    """Exhaustive search for the partition maximizing the minimum group mean."""
    idx = list(range(len(values)))
    best = -math.inf

    def rec(rest, acc):
        nonlocal best
        if not rest:
            best = max(best, min(acc))
            return
        first = rest[0]
        for combo in itertools.combinations(rest[1:], M - 1):
            grp = (first,) + combo
            left = [i for i in rest if i not in grp]
            rec(left, acc + [float(np.mean(values[list(grp)]))])

    rec(idx, [])
    return best


def check_partition(instances: int = 1000, seed: int = 6) -> CheckResult:
    rng = np.random.default_rng(seed)
    bad = mismatch = 0
    with _Timer() as tm:
        for t in range(instances):
            if t % 10 == 0:
                K, M = [(2, 2), (2, 4), (4, 2), (2, 3), (3, 2), (1, 8), (8, 1)][t // 10 % 7]
            else:
                K, M = int(rng.integers(1, 65)), int(rng.integers(1, 65))
            vals = rng.beta(0.5, 0.5, K * M) if rng.random() < 0.5 else rng.uniform(0, 1, K * M)
            groups = partition_channels(vals, K, M)
            flat = np.sort(np.concatenate(groups))
            low = min(float(vals[g].mean()) for g in groups)
            target = vals.mean() - 1.0 / M
            bad += int(low < target - 1e-12 or not np.array_equal(flat, np.arange(K * M)))
            if K * M <= 8:
                opt = _best_partition(vals, K, M)
                mismatch += int(opt < target - 1e-12 or low > opt + 1e-12)
    ok = bad == 0 and mismatch == 0
    return CheckResult("balanced partition", ok,
                       f"{instances} instances, guarantee violations={bad}, oracle disagreements={mismatch}",
                       tm.seconds, {"violations": bad, "oracle": mismatch})


def check_dominance(rows: int = 200, seed: int = 7, constructions=(14, 16)) -> CheckResult:
    """Bit-channel Z never exceeds the extremal value tracking it."""
    rng = np.random.default_rng(seed)
    bad = levels = 0
    with _Timer() as tm:
        batch = []
        for _ in range(rows):
            n2 = int(rng.integers(1, 11))
            z = rng.uniform(0, 0.5, 1 << n2) * rng.uniform(0.05, 1)
            batch.append((ChannelArray.bec(z), n2, int(rng.integers(0, n2 + 1))))
        for chs, n2, l in batch:
            for row in stage2([chs], n2, l):
                bad += row.dominance_violations()
                levels += n2 + 1
        for n in constructions:
            eps = np.sort(rng.uniform(0.05, 0.6, 1 << n))
            con = construct_code(ChannelArray.bec(eps), Pe=0.1)
            for row in con.stage2_rows:
                bad += row.dominance_violations()
                levels += con.spec.n2 + 1
    return CheckResult("stage-2 dominance", bad == 0, f"{levels} row-levels checked, violations={bad}",
                       tm.seconds, {"violations": bad})


def _ramp(n, lo=0.3, hi=0.7):
    return ChannelArray.bec(np.linspace(lo, hi, 1 << n))


def check_end_to_end(n: int = 10, Pe: float = 0.1, mu: float = 10.79, trials: int = 4000, seed: int = 7,
                     trend_ns=(8, 10, 12, 14), threads: int = 1, budget: float = 300.0) -> CheckResult:
    """Construct on a BEC ramp, simulate, and compare realized rate with the guarantee."""
    with _Timer() as tm:
        con = construct_code(_ramp(n), Pe=Pe, mu=mu)
        spec = con.spec
        mc = run_monte_carlo(spec, _ramp(n).to_models(), trials, seed=seed, threads=threads)
        ub = float(spec.z_hi[~spec.frozen].sum())
        ci_hi = mc.ci95[1]
        guarantee = con.rate_guarantee
        rate_ok = spec.rate >= guarantee if guarantee > 0 else True
        gaps = []
        for m in trend_ns:
            c = construct_code(_ramp(m), Pe=Pe, mu=mu)
            gaps.append(c.avg_capacity - c.spec.rate)
        trend = all(b < a for a, b in zip(gaps, gaps[1:]))
    parts = {
        "union bound <= Pe": ub <= Pe,
        "FER <= Pe + Wilson margin": mc.ci95[0] <= Pe,
        "rate >= guarantee when positive": rate_ok,
        "gap shrinks with n": trend,
        "runtime": tm.seconds < budget,
    }
    if len(trend_ns) < 2:
        del parts["gap shrinks with n"]
    ok = all(parts.values())
    failed = [k for k, v in parts.items() if not v]
    detail = (f"rate={spec.rate:.4f} K={spec.K} M={spec.M} union bound={ub:.3g} FER={mc.fer:.4f} "
              f"(CI {mc.ci95[0]:.4f}-{ci_hi:.4f}) guarantee={guarantee:.3g} "
              + (f"gaps over n={list(trend_ns)}: {[round(g, 4) for g in gaps]}" if len(trend_ns) > 1
                 else "trend not evaluated"))
    if failed:
        detail += f"; failed: {', '.join(failed)}"
    return CheckResult("end-to-end ramp BEC", ok, detail, tm.seconds,
                       dict(parts, rate=spec.rate, gaps=gaps, union_bound=ub, fer=mc.fer))


def _bec_oracle(n, eps):
    z = np.array([eps])
    for _ in range(n):
        z = np.concatenate([2 * z - z * z, z * z])
    return z


def _reference_sc(llr, frozen):
    """Textbook recursive SC for ``x = u F^{(x)n}`` with halves split."""
    N = llr.shape[1]
    if N == 1:
        u = np.zeros(llr.shape[0], dtype=np.uint8) if frozen[0] else (llr[:, 0] < 0).astype(np.uint8)
        return u[:, None], u[:, None]
    h = N // 2
    a, b = llr[:, :h], llr[:, h:]
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        ta, tb = np.tanh(a / 2), np.tanh(b / 2)
        lm = 2 * np.arctanh(np.clip(ta * tb, -1, 1))
    u1, x1 = _reference_sc(lm, frozen[:h])
    with np.errstate(invalid="ignore"):
        lp = b + (1 - 2.0 * x1) * a
    lp = np.where(np.isnan(lp), 0.0, lp)
    u2, x2 = _reference_sc(lp, frozen[h:])
    return np.concatenate([u1, u2], axis=1), np.concatenate([x1 ^ x2, x2], axis=1)


def _bit_reverse(n):
    idx = np.arange(1 << n)
    out = np.zeros_like(idx)
    for k in range(n):
        out |= ((idx >> k) & 1) << (n - 1 - k)
    return out


def check_classical(n: int = 10, eps: float = 0.5, trials: int = 200, seed: int = 11, K: int | None = None) -> CheckResult:
    """Stationary BEC: Z multiset and SC decisions match the classical construction."""
    with _Timer() as tm:
        chans = ChannelArray.bec(np.full(1 << n, eps))
        run = run_det_polar1(chans)
        oracle = _bec_oracle(n, eps)
        same_z = bool(np.array_equal(np.sort(run.channels.hi), np.sort(oracle)))
        K = (1 << n) // 2 if K is None else K
        info = np.sort(np.argsort(run.channels.hi, kind="stable")[:K])
        spec = single_stage_spec(run, info)
        models = chans.to_models()
        rev = _bit_reverse(n)
        bits = np.empty((trials, K), dtype=np.uint8)
        erased = np.empty((trials, 1 << n), dtype=bool)
        for t in range(trials):
            rng = trial_rng(seed, t)
            bits[t] = rng.integers(0, 2, K, dtype=np.uint8)
            erased[t] = rng.random(1 << n) < eps
        llr = channel_llr(models, encode(spec, bits), erased)
        ours = sc_decode(spec, llr, return_u=True)[1]
        # the trellis is the bit-reversed Arikan transform: x[rev] = u F^{(x)n}
        u_ref, _ = _reference_sc(llr[:, rev], spec.frozen)
        agree = bool(np.array_equal(ours, u_ref))
        dp2 = run_det_polar2(chans, build_grid(1 << n, 0.12 / DEFAULT_B))
        dp2_same = bool(np.allclose(np.sort(dp2.channels.hi), np.sort(oracle), rtol=0, atol=0))
    ok = same_z and agree
    return CheckResult("classical regression", ok,
                       f"Z multiset equal={same_z}, SC agreement over {trials} trials={agree}, "
                       f"(with grid skips the multiset is {'equal' if dp2_same else 'different'})",
                       tm.seconds, {"z_equal": same_z, "sc_agree": agree, "dp2_equal": dp2_same})


ALL_CHECKS = {
    "eta": check_eta,
    "mu": check_mu_threshold,
    "local-speed": check_local_speed,
    "energy": check_energy_monotone,
    "average-speed": check_average_speed,
    "potential": check_potential,
    "coupling": check_coupling,
    "counting": check_counting,
    "partition": check_partition,
    "dominance": check_dominance,
    "end-to-end": check_end_to_end,
    "classical": check_classical,
}

QUICK = {
    "eta": dict(resolution=1e-4),
    "local-speed": dict(n_pairs=10_000),
    "energy": dict(runs=10),
    "average-speed": dict(runs=3, ns=(10,)),
    "potential": dict(instances=100, max_n=8),
    "coupling": dict(runs=10),
    "counting": dict(max_n=12, per=2),
    "partition": dict(instances=100),
    "dominance": dict(rows=30, constructions=()),
    "end-to-end": dict(trials=500, trend_ns=()),
    "classical": dict(n=6, trials=50),
}


def run_all(names=None, quick: bool = True):
    names = list(ALL_CHECKS) if not names else names
    for name in names:
        kwargs = QUICK.get(name, {}) if quick else {}
        yield ALL_CHECKS[name](**kwargs)
