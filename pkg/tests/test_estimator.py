import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from nspolar import NonStationaryPolarCode
from nspolar.channels import ChannelModel, write_channel_csv

EPS = np.linspace(0.05, 0.5, 1024)


def test_params_roundtrip():
    est = NonStationaryPolarCode(Pe=0.05, n_info=30)
    assert est.get_params()["Pe"] == 0.05
    twin = clone(est)
    assert twin.get_params() == est.get_params()
    twin.set_params(min_sum=True)
    assert twin.min_sum and not est.min_sum


def test_fit_transform_predict(rng):
    est = NonStationaryPolarCode(Pe=0.1, n_info=40).fit(EPS)
    assert est.n_features_in_ == 1024 and est.n_info_ == 40
    assert est.union_bound_ == pytest.approx(est.spec_.z_hi[~est.spec_.frozen].sum())
    info = rng.integers(0, 2, (5, 40))
    x = est.transform(info)
    assert x.shape == (5, 1024)
    llr = est.llr(x)
    assert np.array_equal(est.predict(llr), info)
    assert est.decode_stats_.butterflies > 0
    assert est.score(llr, info) == 1.0


def test_score_under_erasures(rng):
    est = NonStationaryPolarCode(Pe=0.1, n_info=20).fit(EPS)
    info = rng.integers(0, 2, (300, 20))
    erased = rng.random((300, 1024)) < EPS
    s = est.score(est.llr(est.transform(info), erased), info)
    assert s >= 1 - est.union_bound_ - 3 * np.sqrt(0.25 / 300)


def test_fit_accepts_models_and_paths(tmp_path):
    chans = [ChannelModel.bec(e) for e in EPS]
    a = NonStationaryPolarCode(Pe=0.1).fit(chans)
    path = tmp_path / "c.csv"
    write_channel_csv(path, chans)
    b = NonStationaryPolarCode(Pe=0.1).fit(str(path))
    assert a.spec_.to_dict() == b.spec_.to_dict()


def test_not_fitted_and_validation():
    est = NonStationaryPolarCode()
    with pytest.raises(NotFittedError):
        est.transform(np.zeros((1, 4)))
    with pytest.raises(ValueError):
        est.fit(np.full(100, 0.2))
    with pytest.raises(ValueError):
        est.fit(np.full((4, 4), 0.2))
    est = NonStationaryPolarCode(Pe=0.1, n_info=8).fit(EPS)
    with pytest.raises(ValueError):
        est.transform(np.full((1, 8), 2))
    with pytest.raises(ValueError):
        est.transform(np.zeros((1, 9)))
    with pytest.raises(ValueError):
        est.predict(np.full((1, 1024), np.nan))
