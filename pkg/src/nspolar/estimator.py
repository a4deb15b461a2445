"""scikit-learn style front end.

``fit`` constructs a code for a channel sequence, ``transform`` encodes
information words and ``predict`` decodes channel LLRs back to them.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .codec import DecodeStats, channel_llr, encode, sc_decode, union_bound
from .construct import construct_code, reselect
from .speed import DEFAULT_B
from .validation import check_bits, check_channels, check_llr

__all__ = ["NonStationaryPolarCode"]


class NonStationaryPolarCode(BaseEstimator):
    """Polar code for a known sequence of non-identical binary channels.

    Parameters
    ----------
    Pe : float
        Target block error probability; positions whose certified
        Bhattacharyya bound is at most ``Pe / N`` carry information.
    mu : float
        Scaling exponent fed to the construction constants.
    b : float
        Exponent of the polarization energy.
    eta : float or None
        Polarization speed; estimated (and guarded) when None.
    t : float
        Split parameter of the two-stage construction, in ``(0, 1/2)``.
    n_info : int or None
        If given, ignore the ``Pe / N`` rule and use the ``n_info`` best
        certified positions instead.
    min_sum : bool
        Use the min-sum approximation in the decoder.

    Attributes
    ----------
    spec_ : CodeSpec
    construction_ : Construction
    n_features_in_ : int
        Block length ``N``.
    n_info_ : int
        Number of information bits ``K``.
    union_bound_ : float
    """

    def __init__(self, Pe=0.01, mu=10.79, b=DEFAULT_B, eta=None, t=0.49, n_info=None, min_sum=False):
        self.Pe = Pe
        self.mu = mu
        self.b = b
        self.eta = eta
        self.t = t
        self.n_info = n_info
        self.min_sum = min_sum

    def fit(self, X, y=None):
        """Construct the code for channel sequence ``X``.

        ``X`` may be a list of ``ChannelModel``, a 1-D array of BEC erasure
        probabilities, or a path to a channel CSV.
        """
        chans = check_channels(X)
        self.construction_ = construct_code(chans, Pe=self.Pe, mu=self.mu, b=self.b, eta=self.eta, t=self.t)
        spec = self.construction_.spec
        if self.n_info is not None:
            spec = reselect(spec, int(self.n_info))
        self.spec_ = spec
        self.channels_ = chans
        self.n_features_in_ = spec.N
        self.n_info_ = spec.K
        self.union_bound_ = union_bound(spec)
        return self

    def transform(self, X):
        """Encode information words, shape ``(n_samples, K)``, to codewords ``(n_samples, N)``."""
        check_is_fitted(self, "spec_")
        return encode(self.spec_, check_bits(X, self.n_info_))

    def predict(self, X):
        """Decode channel LLRs, shape ``(n_samples, N)``, to information words."""
        check_is_fitted(self, "spec_")
        stats = DecodeStats()
        out = sc_decode(self.spec_, check_llr(X, self.n_features_in_), min_sum=self.min_sum, stats=stats)
        self.decode_stats_ = stats
        return out

    def llr(self, received, erased=None):
        """Channel LLRs for received bits (and BEC erasure flags)."""
        check_is_fitted(self, "spec_")
        return channel_llr(self.channels_, received, erased)

    def score(self, X, y):
        """Fraction of words in ``y`` decoded without error from LLRs ``X``."""
        y = check_bits(y, self.n_info_)
        return float(np.mean(np.all(self.predict(X) == y, axis=1)))
