import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import scalar_extremal

from nspolar.extremal import (
    GAMMA,
    c_rho,
    compute_constants,
    d2_sup,
    extremal_step,
    p_count_bound,
    q_potential,
    run_coupled,
    run_extremal,
    s_levels,
    s_weight,
)


def test_q_examples():
    assert q_potential(0) == 0 and q_potential(1) == 1 and q_potential(2) == 1
    assert q_potential(0.5) == 0.75
    with pytest.raises(ValueError):
        q_potential(-0.1)


@given(st.floats(0, 0.5))
def test_q_of_double(x):
    assert q_potential(2 * x) == pytest.approx(4 * x * (1 - x), abs=1e-15)


def test_extremal_step_examples():
    out, _, active = extremal_step(np.array([0.4, 0.3]), 1)
    assert out == pytest.approx([0.7, 0.12]) and active.all()
    out, _, active = extremal_step(np.array([1.5, 0.5]), 1)
    assert list(out) == [1.5, 0.5] and not active.any()
    out, _, _ = extremal_step(np.array([1.2, 1.1]), 1)
    assert out == pytest.approx([2.3, 1.32])
    out, _, _ = extremal_step(np.array([0.3, 0.4]), 1, mask=np.array([False]))
    assert list(out) == [0.4, 0.3]
    with pytest.raises(ValueError):
        extremal_step(np.array([0.3, 0.4]), 1, mask=np.array([True, True]))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_log_domain_matches_scalar_oracle(n, seed):
    rng = np.random.default_rng(seed)
    x0 = rng.uniform(0, 2, 2**n)
    tr = run_extremal(x0)
    ref = scalar_extremal(x0, n, n)
    assert np.allclose(np.sort(tr.x(n)), np.sort(ref), rtol=1e-9, atol=0)


def test_s_weight_examples():
    assert s_weight(1, 5) == 0
    assert s_weight(8, 3, 3) == 3
    assert s_weight(7, 4, 2) == 1
    with pytest.raises(ValueError):
        s_weight(0, 3, 3)
    assert list(s_levels(2, 1)) == [0, 0, 1, 1]


def test_potential_and_count(rng):
    for _ in range(200):
        n = int(rng.integers(1, 9))
        tr = run_extremal(rng.uniform(0, 3, 2**n))
        q = [tr.potential(j) for j in range(n + 1)]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(q, q[1:]))
        assert all(np.sum(tr.x(j) >= 1) <= q[0] for j in range(n + 1))


def test_at_most_one_skip_per_block(rng):
    for _ in range(50):
        n = 8
        tr = run_extremal(rng.uniform(0, 3, 2**n))
        for j in range(1, n + 1):
            skipped = ~tr.layers[j - 1].active
            per_block = skipped.reshape(2 ** (j - 1), -1).sum(axis=1)
            assert per_block.max() <= 1


def test_coupled_without_skips_is_exact():
    x0 = np.full(16, 0.01)
    tr = run_coupled(x0)
    for j in range(5):
        assert tr.skips(j) == 0 if j else True
        assert np.all(tr.a[j] == 0)
        s = s_levels(4, j)
        assert np.allclose(tr.ly[j], np.exp2(s) + tr.lx[j])


def test_coupled_properties(rng):
    for _ in range(100):
        x0 = rng.uniform(0, 0.5, 2**10)
        tr = run_coupled(x0)  # asserts the coupling internally
        need = 2**10 - 4 * float(np.sum(x0 * (1 - x0)))
        for j in range(11):
            assert tr.a[j].sum() <= 3**j
            assert tr.good_count(j) >= need


def test_coupled_rejects_bad_inputs():
    with pytest.raises(ValueError):
        run_coupled(np.array([0.1, 0.5]))
    with pytest.raises(ValueError):
        run_coupled(np.array([-0.1, 0.2]))


def test_counting_lemma_bruteforce(rng):
    for n in range(2, 17):
        for j in range(1, int(n / GAMMA) + 1):
            s = s_levels(n, j)
            a = rng.multinomial(int(rng.integers(0, 3**j + 1)), np.full(2**n, 2.0**-n))
            alpha, beta = rng.uniform(0.5, 3), rng.uniform(1, 10)
            count = int(np.sum(2.0**s - a <= alpha * n + beta))
            assert count <= 2 ** (n - j + p_count_bound(n, alpha, beta))


def test_p_growth_is_polylog():
    ns = np.logspace(np.log10(4), 6, 200)
    ratio = p_count_bound(ns, 1.5, 8.0) / np.log2(ns) ** 2
    assert np.all(np.isfinite(ratio)) and ratio.max() < 10
    assert GAMMA == pytest.approx(2.585, abs=1e-3)


def test_constants_at_desk_values(eta_hat):
    rep = compute_constants(10.79, 0.1, eta=eta_hat, n=10)
    assert rep.rho == pytest.approx(2 / (10.79 + 1 / eta_hat - math.log2(3)))
    assert rep.rho < eta_hat / (eta_hat + 1)
    assert rep.tau == pytest.approx(rep.rho / 0.72)
    assert (rep.n1, rep.n2, rep.l) == (8, 2, 0)
    assert rep.n1 == math.ceil(10 / (1 + rep.rho * GAMMA))
    assert rep.alpha == pytest.approx(1 + 1 / (rep.rho * GAMMA))
    assert rep.beta == pytest.approx(-math.log2(0.1) + rep.alpha)
    assert rep.d1 == pytest.approx(2 ** (rep.c_rho + 1) / 0.49 + 1)
    assert math.isinf(rep.kappa) and rep.log2_kappa == pytest.approx(10.79 * rep.log2_d3)


def test_constants_thresholds(eta_hat):
    with pytest.raises(ValueError):
        compute_constants(10.5, 0.01, eta=eta_hat, n=14)
    with pytest.raises(ValueError):
        compute_constants(10.79, 1.0, eta=eta_hat, n=14)
    compute_constants(10.79, 0.01, eta=0.139, n=14)
    with pytest.raises(ValueError):
        compute_constants(10.78, 0.01, eta=0.139, n=14, t=0.5)


@pytest.mark.slow
def test_constants_just_above_threshold():
    rep = compute_constants(10.7793, 0.01, eta=0.139, n=14)
    assert rep.mu - rep.mu_threshold < 1e-4 and rep.d2 > 0


def test_rate_guarantee_increasing(eta_hat):
    rep = compute_constants(10.79, 0.01, eta=eta_hat, n=14)
    vals = [rep.rate_guarantee(0.5, n) for n in range(10, 40, 5)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_c_rho_scan_is_certified(eta_hat):
    value, arg, end = c_rho(0.12, eta_hat)
    assert end > arg and value > 0
    # recompute the max directly over a longer range: no larger summand
    assert value == pytest.approx(c_rho(0.12, eta_hat)[0])


def test_d2_scan_stops_past_argmax(eta_hat):
    rep = compute_constants(10.79, 0.01, eta=eta_hat, n=14)
    value, arg, end = d2_sup(10.79, rep.rho, rep.alpha, rep.beta)
    assert end >= 2 * arg and value == pytest.approx(rep.d2)
