from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import binom

from oracles import arikan_matrix

from nspolar.channels import ChannelArray, ChannelModel
from nspolar.codec import DecodeStats, boxplus, channel_llr, encode, sc_decode, union_bound
from nspolar.construct import construct_code, reselect, single_stage_spec
from nspolar.polarize import run_det_polar1


def test_boxplus_reference(rng):
    a, b = rng.normal(0, 4, 1000), rng.normal(0, 4, 1000)
    ref = 2 * np.arctanh(np.tanh(a / 2) * np.tanh(b / 2))
    assert np.allclose(boxplus(a, b), ref, atol=1e-9)
    assert np.allclose(boxplus(a, b, min_sum=True), np.sign(a * b) * np.minimum(abs(a), abs(b)))


def test_boxplus_infinities():
    assert boxplus(np.inf, np.inf) == np.inf
    assert boxplus(np.inf, -np.inf) == -np.inf
    assert boxplus(np.inf, 0.0) == 0.0
    assert boxplus(-np.inf, 2.0) == pytest.approx(-2.0)


def test_channel_llr():
    chans = [ChannelModel.bec(0.5), ChannelModel.bsc(0.1), ChannelModel.bsc(0.0)]
    llr = channel_llr(chans, np.array([1, 0, 1]), np.array([True, False, False]))
    assert llr[0] == 0 and llr[1] == pytest.approx(np.log(9)) and llr[2] == -np.inf
    with pytest.raises(ValueError):
        channel_llr([ChannelModel.zonly(0.1, 0.2)], np.array([0]))


@pytest.mark.parametrize("n", [3, 5, 7])
def test_single_stage_generator_is_arikan(n):
    run = run_det_polar1(ChannelArray.bec(np.full(2**n, 0.5)))
    spec = single_stage_spec(run, np.arange(2**n))
    G = encode(spec, np.eye(2**n, dtype=np.uint8))
    assert np.array_equal(G, arikan_matrix(n))


@pytest.fixture(scope="module", params=[10, 12, 14])
def two_stage(request):
    n = request.param
    chs = ChannelArray.bec(np.linspace(0.05, 0.6, 2**n))
    return chs, construct_code(chs, Pe=0.1).spec


def test_encoder_is_linear(two_stage, rng):
    _, spec = two_stage
    spec = reselect(spec, min(64, spec.M * spec.N2))
    u = rng.integers(0, 2, (6, spec.K), dtype=np.uint8)
    G = encode(spec, np.eye(spec.K, dtype=np.uint8))
    assert np.array_equal(encode(spec, u), (u.astype(int) @ G) % 2)


def test_noiseless_roundtrip(two_stage, rng):
    chs, spec = two_stage
    spec = reselect(spec, spec.M * spec.N2 // 2)
    info = rng.integers(0, 2, (8, spec.K), dtype=np.uint8)
    x = encode(spec, info)
    llr = channel_llr(chs.to_models(), x)
    assert np.array_equal(sc_decode(spec, llr), info)
    assert np.array_equal(sc_decode(spec, llr, min_sum=True), info)
    assert np.array_equal(sc_decode(spec, llr[0]), info[0])


def test_genie_erasure_rates_match_certificates(two_stage):
    """With every position frozen and the zero word sent, position i is erased w.p. Z_i."""
    chs, spec = two_stage
    spec = replace(spec, frozen=np.ones(spec.N, dtype=bool))
    T = 3000
    erased = np.random.default_rng(spec.n).random((T, spec.N)) < chs.hi
    _, leaf = sc_decode(spec, np.where(erased, 0.0, np.inf), return_llr=True)
    count = (leaf == 0).sum(axis=0)
    z = spec.z_hi
    p = 2 * np.minimum(binom.cdf(count, T, z), binom.sf(count - 1, T, z))
    assert p.min() * spec.N > 1e-3


def test_decode_stats_counts_butterflies(two_stage):
    chs, spec = two_stage
    stats = DecodeStats()
    sc_decode(spec, np.full((1, spec.N), np.inf), stats=stats)
    assert stats.butterflies == spec.butterfly_count()
    total_pairs = spec.N2 * spec.n1 * spec.N1 // 2 + spec.M * spec.n2 * spec.N2 // 2
    assert stats.butterflies + stats.passthrough == total_pairs


def test_union_bound_and_shapes(two_stage):
    _, spec = two_stage
    assert union_bound(spec) == pytest.approx(spec.z_hi[~spec.frozen].sum())
    with pytest.raises(ValueError):
        encode(spec, np.zeros(spec.K + 1, dtype=np.uint8))
    with pytest.raises(ValueError):
        sc_decode(spec, np.zeros(spec.N - 1))
    with pytest.raises(ValueError):
        sc_decode(spec, np.full(spec.N, np.nan))


def test_bsc_decoding_beats_union_bound(rng):
    p = np.linspace(0.001, 0.05, 1024)
    chans = [ChannelModel.bsc(v) for v in p]
    spec = reselect(construct_code(chans, Pe=0.1).spec, 100)
    T = 400
    info = rng.integers(0, 2, (T, spec.K), dtype=np.uint8)
    flips = rng.random((T, spec.N)) < p
    llr = channel_llr(chans, encode(spec, info) ^ flips)
    fer = np.mean(np.any(sc_decode(spec, llr) != info, axis=1))
    assert fer <= min(1.0, union_bound(spec)) + 3 * np.sqrt(0.25 / T)
