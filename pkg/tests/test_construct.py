import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import scalar_coupled_count

from nspolar.channels import ChannelArray, ChannelModel
from nspolar.construct import (
    CodeSpec,
    construct_code,
    partition_channels,
    reselect,
    select_M,
    stage1,
    stage2,
)
from nspolar.extremal import GAMMA
from nspolar.quantize import build_grid


def _min_mean(values, groups):
    return min(float(np.mean(values[g])) for g in groups)


def _exhaustive_best(values, K, M):
    best = -math.inf
    N = len(values)

    def rec(rest, acc):
        nonlocal best
        if not rest:
            best = max(best, min(acc))
            return
        for combo in itertools.combinations(rest[1:], M - 1):
            grp = (rest[0],) + combo
            rec([i for i in rest if i not in grp], acc + [float(np.mean(values[list(grp)]))])

    rec(list(range(N)), [])
    return best


def test_partition_examples():
    vals = np.array([1.0, 0.0, 1.0, 0.0])
    groups = partition_channels(vals, 2, 2)
    assert [float(np.mean(vals[g])) for g in groups] == [0.5, 0.5]
    vals = np.full(12, 0.3)
    assert _min_mean(vals, partition_channels(vals, 3, 4)) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        partition_channels(np.ones(5), 2, 2)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 64), st.integers(1, 64), st.integers(0, 2**32 - 1))
def test_partition_guarantee(K, M, seed):
    vals = np.random.default_rng(seed).beta(0.4, 0.4, K * M)
    groups = partition_channels(vals, K, M)
    assert sorted(np.concatenate(groups).tolist()) == list(range(K * M))
    assert _min_mean(vals, groups) >= vals.mean() - 1 / M - 1e-12


@pytest.mark.parametrize("K,M", [(2, 2), (2, 3), (3, 2), (2, 4), (4, 2)])
def test_partition_against_exhaustive(K, M, rng):
    for _ in range(20):
        vals = rng.uniform(0, 1, K * M)
        ours = _min_mean(vals, partition_channels(vals, K, M))
        best = _exhaustive_best(vals, K, M)
        assert best >= vals.mean() - 1 / M
        assert vals.mean() - 1 / M - 1e-12 <= ours <= best + 1e-12


def test_stage1_degenerate_and_symmetric():
    grid = build_grid(64, 0.2)
    chs = ChannelArray.bec(np.full(256, 0.4))
    groups = partition_channels(1 - chs.hi, 4, 64)
    runs = stage1(chs, groups, grid)
    ref = np.sort(runs[0].channels.hi)
    assert all(np.array_equal(np.sort(r.channels.hi), ref) for r in runs)


def test_select_M_extremes():
    grid = build_grid(16, 0.2)
    perfect = stage1(ChannelArray.bec(np.zeros(32)), [np.arange(16), np.arange(16, 32)], grid)
    assert select_M(perfect)[0] == 16
    useless = stage1(ChannelArray.bec(np.ones(32)), [np.arange(16), np.arange(16, 32)], grid)
    M, sel = select_M(useless)
    assert M == 0 and sel.shape == (2, 0)


def test_stage2_l_zero_is_identity(rng):
    z = rng.uniform(0, 0.45, 4)
    (row,) = stage2([ChannelArray.bec(z)], 2, 0)
    assert row.circuit.butterfly_count() == 0
    assert np.allclose(np.sort(row.channels.hi), np.sort(z))


def test_stage2_count_matches_scalar_oracle():
    n2 = 10
    l = int(n2 / GAMMA)
    (row,) = stage2([ChannelArray.bec(np.full(2**n2, 0.25))], n2, l)
    N, Pe = 2**n2, 0.1
    ours = int(np.sum(np.exp2(row.trace.lx[l]) <= Pe / N))
    assert ours == scalar_coupled_count([0.25] * N, n2, l, Pe / N)
    assert row.dominance_violations() == 0


def test_stage2_rejects_bad_rows():
    with pytest.raises(ValueError):
        stage2([ChannelArray.bec([0.2, 0.5])], 1, 0)


def test_noiseless_code_has_rate_one():
    con = construct_code(ChannelArray.bec(np.zeros(256)), Pe=0.01)
    assert con.spec.rate == 1.0


def test_useless_channels_give_empty_code():
    con = construct_code(ChannelArray.bec(np.ones(256)), Pe=0.01)
    assert con.spec.M == 0 and con.spec.K == 0


@pytest.fixture(scope="module")
def ramp_construction():
    return construct_code(ChannelArray.bec(np.linspace(0.02, 0.5, 2**14)), Pe=0.1)


def test_construction_invariants(ramp_construction):
    con = ramp_construction
    spec = con.spec
    spec.validate()
    assert spec.n == spec.n1 + spec.n2 and spec.l == int(spec.n2 / GAMMA)
    unfrozen = ~spec.frozen
    assert np.all(spec.z_hi[unfrozen] <= spec.Pe_target / spec.N)
    assert spec.z_hi[unfrozen].sum() <= spec.Pe_target
    assert not unfrozen[spec.M * spec.N2:].any()
    assert spec.rate == spec.K / spec.N
    caps = 1 - np.linspace(0.02, 0.5, 2**14)
    assert _min_mean(caps, con.groups) >= caps.mean() - 1 / spec.N1 - 1e-12
    for row in con.stage2_rows:
        assert row.dominance_violations() == 0


def test_construction_floors_reported(ramp_construction):
    con = ramp_construction
    floor = con.M_floor
    assert floor <= con.spec.M
    assert con.spec.rate >= con.rate_guarantee or con.rate_guarantee <= 0
    for run in con.stage1_runs:
        assert np.sum(run.channels.hi < 0.5) >= floor


def test_construction_is_deterministic_and_serializable(tmp_path):
    chs = ChannelArray.bec(np.linspace(0.1, 0.6, 1024))
    a = construct_code(chs, Pe=0.1).spec
    b = construct_code(chs, Pe=0.1).spec
    assert a.to_dict() == b.to_dict()
    path = tmp_path / "code.json"
    a.save(path)
    c = CodeSpec.load(path)
    assert c.to_dict() == a.to_dict()
    assert c.to_dict()["version"] == "nspolar-codespec-1"
    assert len(c.to_dict()["z_certificates"][0]) == 2


def test_spec_version_checked(tmp_path):
    d = construct_code(ChannelArray.bec(np.full(64, 0.3)), Pe=0.1).spec.to_dict()
    d["version"] = "something-else"
    with pytest.raises(ValueError):
        CodeSpec.from_dict(d)


def test_reselect_picks_best_certificates():
    spec = construct_code(ChannelArray.bec(np.linspace(0.3, 0.7, 1024)), Pe=0.1).spec
    r = reselect(spec, 50)
    assert r.K == 50
    worst_in = r.z_hi[~r.frozen].max()
    eligible = r.z_hi[: r.M * r.N2]
    assert np.sum(eligible < worst_in) < 50
    assert r.Pe_target == pytest.approx(r.z_hi[~r.frozen].sum())
    with pytest.raises(ValueError):
        reselect(spec, spec.M * spec.N2 + 1)


def test_non_bec_sequence_is_flagged():
    chans = [ChannelModel.bsc(p) for p in np.linspace(0.01, 0.1, 256)]
    con = construct_code(chans, Pe=0.1)
    assert con.spec.provenance["capacity_heuristic"] is False
    zonly = [ChannelModel.zonly(0.1, 0.2)] * 256
    assert construct_code(zonly, Pe=0.1).spec.provenance["capacity_heuristic"] is True
