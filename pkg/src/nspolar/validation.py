"""Input checks shared by the estimator and the CLI."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .channels import ChannelArray, ChannelModel, read_channel_csv
from .quantize import log2_exact

__all__ = ["check_channels", "check_bits", "check_llr"]


def check_channels(X) -> list[ChannelModel]:
    """Coerce a channel sequence.

    Accepts a list of :class:`ChannelModel`, a :class:`ChannelArray` of
    exact BECs, a 1-D array of erasure probabilities, or a CSV path.  The
    length must be a power of two.
    """
    if isinstance(X, (str, Path)):
        chans = read_channel_csv(X)
    elif isinstance(X, ChannelArray):
        chans = X.to_models()
    elif len(X) and all(isinstance(c, ChannelModel) for c in X):
        chans = list(X)
    else:
        eps = np.asarray(X, dtype=float)
        if eps.ndim != 1:
            raise ValueError(f"expected a 1-D sequence of erasure probabilities, got shape {eps.shape}")
        chans = [ChannelModel.bec(e) for e in eps]
    log2_exact(len(chans))
    return chans


def check_bits(X, width: int) -> np.ndarray:
    bits = np.asarray(X)
    if bits.ndim == 1:
        bits = bits[None, :]
    if bits.ndim != 2 or bits.shape[1] != width:
        raise ValueError(f"expected bit arrays of width {width}, got shape {np.shape(X)}")
    if not np.isin(bits, (0, 1)).all():
        raise ValueError("bits must be 0 or 1")
    return bits.astype(np.uint8)


def check_llr(X, width: int) -> np.ndarray:
    llr = np.asarray(X, dtype=float)
    if llr.ndim == 1:
        llr = llr[None, :]
    if llr.ndim != 2 or llr.shape[1] != width:
        raise ValueError(f"expected LLR arrays of width {width}, got shape {np.shape(X)}")
    if np.isnan(llr).any():
        raise ValueError("NaN in LLRs")
    return llr
