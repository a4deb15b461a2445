import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nspolar.quantize import build_grid, in_core, log2_exact, same_subinterval, subinterval_index


def test_log2_exact():
    assert log2_exact(1) == 0 and log2_exact(1024) == 10
    for bad in (0, 3, 12, 1.5, -4):
        with pytest.raises(ValueError):
            log2_exact(bad)


def test_small_n_clips_m():
    g = build_grid(2**10, 1 / 6)
    assert g.m_formula == math.ceil(math.log2(0.1) + 10 / 6) == -1
    assert g.m == 1 and g.clipped


def test_large_n_m_formula():
    g = build_grid(2**20, 0.5)
    assert g.m == 7 and not g.clipped


@pytest.mark.parametrize("N,tau", [(2**10, 1 / 6), (2**20, 0.5), (2**30, 0.3), (2, 0.1)])
def test_grid_structure(N, tau):
    g = build_grid(N, tau)
    b = g.boundaries
    assert b[0] == 0 and b[-1] == 1 and np.all(np.diff(b) > 0)
    assert g.n_cells == 2 * (g.m + 1) + 8
    mid = b[(b >= 0.1 - 1e-12) & (b <= 0.9 + 1e-12)]
    assert len(mid) == 9 and np.allclose(np.diff(mid), 0.1)
    assert g.core_lo == pytest.approx(0.1 / 2**g.m)
    if not g.clipped:
        assert g.n_cells <= 2 * tau * math.log2(N) + 6


def test_grid_rejects_bad_input():
    with pytest.raises(ValueError):
        build_grid(1000, 0.2)
    with pytest.raises(ValueError):
        build_grid(1024, 0.0)


def test_subinterval_conventions():
    g = build_grid(2**20, 0.5)
    assert subinterval_index(g, 0.0) == 0
    assert subinterval_index(g, 1.0) == g.n_cells - 1
    for k, edge in enumerate(g.boundaries[1:-1], start=1):
        assert subinterval_index(g, edge) == k
    with pytest.raises(ValueError):
        subinterval_index(g, 1.5)


def test_in_core_examples():
    g = build_grid(2**20, 0.5)
    assert in_core(g, 0.5) and not in_core(g, 0.0)
    assert in_core(g, g.core_lo) and in_core(g, g.core_hi)
    assert not in_core(g, np.nextafter(g.core_lo, 0))


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_same_subinterval_is_an_equivalence(a, b, c):
    g = build_grid(2**16, 0.4)
    assert same_subinterval(g, a, b) == same_subinterval(g, b, a)
    if same_subinterval(g, a, b) and same_subinterval(g, b, c):
        assert same_subinterval(g, a, c)
    k = subinterval_index(g, a)
    assert g.boundaries[k] <= a and (a < g.boundaries[k + 1] or a == 1.0)


def test_straddling_pair_same_cell():
    g = build_grid(2**10, 1 / 6)
    assert same_subinterval(g, 0.449, 0.451)
    assert not same_subinterval(g, 0.399, 0.401)
