import numpy as np
import pytest
from hypothesis import given, strategies as st

from nspolar.channels import ChannelArray, ChannelModel
from nspolar.construct import construct_code, reselect
from nspolar.sim import SequenceSpec, generate_sequence, resolve_threads, run_monte_carlo, wilson_interval


def test_ramp_sequence():
    chans = generate_sequence(SequenceSpec("ramp-bec", (0.3, 0.7)), 4)
    assert np.allclose([c.param for c in chans], [0.3, 0.3 + 0.4 / 3, 0.3 + 0.8 / 3, 0.7])
    assert all(c.kind == "BEC" for c in chans)


def test_iid_sequence_is_seeded():
    a = generate_sequence(SequenceSpec("iid-uniform-bec", (0.0, 1.0), seed=5), 4096)
    b = generate_sequence(SequenceSpec("iid-uniform-bec", (0.0, 1.0), seed=5), 4096)
    c = generate_sequence(SequenceSpec("iid-uniform-bec", (0.0, 1.0), seed=6), 4096)
    pa = np.array([x.param for x in a])
    assert np.array_equal(pa, [x.param for x in b])
    assert not np.array_equal(pa, [x.param for x in c])
    assert abs(pa.mean() - 0.5) < 4 * np.sqrt(1 / 12 / 4096)


def test_blockwise_and_file(tmp_path):
    chans = generate_sequence(SequenceSpec("blockwise", (0.1, 0.5)), 8)
    assert [c.param for c in chans] == [0.1] * 4 + [0.5] * 4
    with pytest.raises(ValueError):
        generate_sequence(SequenceSpec("blockwise", (0.1, 0.2, 0.3)), 8)
    with pytest.raises(ValueError):
        generate_sequence(SequenceSpec("ramp-bec", (0.1, 0.2)), 6)
    with pytest.raises(ValueError):
        SequenceSpec("gaussian")
    from nspolar.channels import write_channel_csv

    path = tmp_path / "ch.csv"
    write_channel_csv(path, chans)
    back = generate_sequence(SequenceSpec("file", path=str(path)), 8)
    assert [c.param for c in back] == [c.param for c in chans]
    with pytest.raises(ValueError):
        generate_sequence(SequenceSpec("file", path=str(path)), 16)


@given(st.integers(0, 200), st.integers(1, 200))
def test_wilson_interval_contains_estimate(errors, trials):
    errors = min(errors, trials)
    lo, hi = wilson_interval(errors, trials)
    assert 0 <= lo <= errors / trials <= hi <= 1
    assert (lo == 0) == (errors == 0) and (hi == 1) == (errors == trials)


def test_wilson_known_value():
    lo, hi = wilson_interval(10, 100)
    assert lo == pytest.approx(0.05523, abs=1e-4) and hi == pytest.approx(0.17437, abs=1e-4)
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


@pytest.fixture(scope="module")
def code_1024():
    chans = generate_sequence(SequenceSpec("ramp-bec", (0.3, 0.7)), 1024)
    spec = construct_code(chans, Pe=0.1).spec
    return chans, spec


def test_monte_carlo_within_union_bound(code_1024):
    chans, spec = code_1024
    res = run_monte_carlo(spec, chans, trials=2000, seed=1)
    assert res.trials == 2000 and res.rate == spec.rate
    assert res.ci95[0] <= max(res.union_bound, 0.0) + 1e-12
    best = reselect(spec, 20)
    res = run_monte_carlo(best, chans, trials=2000, seed=1)
    assert res.ci95[0] <= res.union_bound


def test_noiseless_and_all_frozen_fer_zero():
    chans = [ChannelModel.bec(0.0)] * 256
    spec = construct_code(chans, Pe=0.01).spec
    res = run_monte_carlo(spec, chans, trials=100)
    assert res.errors == 0 and res.K == 256
    chans = [ChannelModel.bec(1.0)] * 256
    spec = construct_code(chans, Pe=0.01).spec
    assert run_monte_carlo(spec, chans, trials=50).fer == 0.0


def test_threads_and_chunks_do_not_change_result(code_1024):
    chans, spec = code_1024
    spec = reselect(spec, 60)
    a = run_monte_carlo(spec, chans, trials=600, seed=9, threads=1, chunk=600)
    b = run_monte_carlo(spec, chans, trials=600, seed=9, threads=4, chunk=37)
    assert np.array_equal(a.per_trial, b.per_trial) and a.bit_errors == b.bit_errors
    assert a.errors > 0


def test_bsc_simulation_runs():
    chans = [ChannelModel.bsc(p) for p in np.linspace(0.0, 0.05, 512)]
    spec = reselect(construct_code(chans, Pe=0.1).spec, 40)
    res = run_monte_carlo(spec, chans, trials=300, seed=2)
    assert 0 <= res.fer <= 1 and res.ber <= res.fer


def test_rejections(code_1024):
    chans, spec = code_1024
    with pytest.raises(ValueError):
        run_monte_carlo(spec, chans[:512], trials=10)
    with pytest.raises(ValueError):
        run_monte_carlo(spec, [ChannelModel.zonly(0.1, 0.2)] * 1024, trials=10)
    with pytest.raises(ValueError):
        run_monte_carlo(spec, chans, trials=0)


def test_thread_env_override(monkeypatch):
    monkeypatch.setenv("NSPOLAR_THREADS", "3")
    assert resolve_threads(0) == 3
    monkeypatch.delenv("NSPOLAR_THREADS")
    assert resolve_threads(2) == 2 and resolve_threads(0) >= 1
