"""Binary-input memoryless symmetric channel models.

Channels are tracked through their Bhattacharyya parameter.  Erasure
channels stay exact under both combining operations; everything else
degrades to a certified interval ``[lo, hi]`` around the true value.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ZInterval",
    "ChannelModel",
    "ChannelArray",
    "bhattacharyya",
    "symmetric_capacity",
    "combine_minus",
    "combine_plus",
    "binary_entropy",
    "read_channel_csv",
    "write_channel_csv",
]

BEC = "BEC"
BSC = "BSC"
ZONLY = "ZOnly"


def _clip01(x):
    return min(1.0, max(0.0, float(x)))


@dataclass(frozen=True)
class ZInterval:
    """Closed interval bracketing a Bhattacharyya parameter."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (0.0 <= self.lo <= self.hi <= 1.0):
            raise ValueError(f"invalid Z interval [{self.lo}, {self.hi}]")

    @classmethod
    def point(cls, z: float) -> "ZInterval":
        z = _clip01(z)
        return cls(z, z)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __contains__(self, z: float) -> bool:
        return self.lo <= z <= self.hi


@dataclass(frozen=True)
class ChannelModel:
    """A BMS channel: exact BEC, exact BSC, or a Z-interval abstraction.

    Use the :meth:`bec`, :meth:`bsc` and :meth:`zonly` constructors rather
    than building instances by hand.
    """

    kind: str
    param: float
    z: ZInterval

    def __post_init__(self):
        if self.kind == BEC:
            if not 0.0 <= self.param <= 1.0:
                raise ValueError(f"BEC erasure probability out of range: {self.param}")
        elif self.kind == BSC:
            if not 0.0 <= self.param <= 0.5:
                raise ValueError(f"BSC crossover must lie in [0, 1/2]: {self.param}")
        elif self.kind != ZONLY:
            raise ValueError(f"unknown channel kind {self.kind!r}")

    @classmethod
    def bec(cls, eps: float) -> "ChannelModel":
        eps = float(eps)
        if not 0.0 <= eps <= 1.0:
            raise ValueError(f"BEC erasure probability out of range: {eps}")
        return cls(BEC, eps, ZInterval(eps, eps))

    @classmethod
    def bsc(cls, p: float) -> "ChannelModel":
        p = float(p)
        if not 0.0 <= p <= 0.5:
            raise ValueError(f"BSC crossover must lie in [0, 1/2]: {p}")
        return cls(BSC, p, ZInterval.point(2.0 * math.sqrt(p * (1.0 - p))))

    @classmethod
    def zonly(cls, lo: float, hi: float) -> "ChannelModel":
        return cls(ZONLY, float("nan"), ZInterval(_clip01(lo), _clip01(hi)))

    @property
    def is_exact(self) -> bool:
        return self.kind != ZONLY

    def __repr__(self):
        if self.kind == ZONLY:
            return f"ZOnly[{self.z.lo:.6g}, {self.z.hi:.6g}]"
        return f"{self.kind}({self.param:.6g})"


def binary_entropy(p):
    """Binary entropy in bits, vectorised, with ``h(0) = h(1) = 0``."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -p * np.log2(p) - (1 - p) * np.log2(1 - p)
    return np.where((p <= 0) | (p >= 1), 0.0, h)


def bhattacharyya(ch: ChannelModel) -> ZInterval:
    return ch.z


def symmetric_capacity(ch: ChannelModel) -> ZInterval:
    """Symmetric capacity in bits, as an interval.

    For ZOnly channels the upper edge is ``1 - z.lo**2`` and the lower edge
    is ``1 - z.hi``; the latter is never consumed by the construction.
    """
    if ch.kind == BEC:
        return ZInterval.point(1.0 - ch.param)
    if ch.kind == BSC:
        return ZInterval.point(1.0 - float(binary_entropy(ch.param)))
    hi = _clip01(1.0 - ch.z.lo**2)
    lo = min(hi, _clip01(1.0 - ch.z.hi))
    return ZInterval(lo, hi)


def _minus_bounds(lo1, hi1, lo2, hi2):
    lo = np.sqrt(np.clip(lo1 * lo1 + lo2 * lo2 - lo1 * lo1 * lo2 * lo2, 0.0, 1.0))
    hi = np.clip(hi1 + hi2 - hi1 * hi2, 0.0, 1.0)
    return np.minimum(lo, hi), hi


def combine_minus(a: ChannelModel, b: ChannelModel) -> ChannelModel:
    """The degrading combination ``a ⊞ b``."""
    if a.kind == BEC and b.kind == BEC:
        return ChannelModel.bec(_clip01(a.param + b.param - a.param * b.param))
    lo, hi = _minus_bounds(a.z.lo, a.z.hi, b.z.lo, b.z.hi)
    return ChannelModel.zonly(float(lo), float(hi))


def combine_plus(a: ChannelModel, b: ChannelModel) -> ChannelModel:
    """The upgrading combination ``a ⊛ b``; Z multiplies exactly."""
    if a.kind == BEC and b.kind == BEC:
        return ChannelModel.bec(a.param * b.param)
    return ChannelModel.zonly(a.z.lo * b.z.lo, a.z.hi * b.z.hi)


class ChannelArray:
    """Structure-of-arrays view of a channel sequence.

    Holds ``lo``/``hi`` Bhattacharyya bounds and an ``exact`` flag marking
    positions that are still exact erasure channels.  This is what the
    polarization engine works on; :class:`ChannelModel` is the scalar API.
    """

    __slots__ = ("lo", "hi", "exact")

    def __init__(self, lo, hi, exact):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.exact = np.asarray(exact, dtype=bool)
        if not (self.lo.shape == self.hi.shape == self.exact.shape):
            raise ValueError("lo, hi and exact must share a shape")

    @classmethod
    def from_models(cls, chans: Iterable[ChannelModel]) -> "ChannelArray":
        chans = list(chans)
        lo = np.array([c.z.lo for c in chans], dtype=float)
        hi = np.array([c.z.hi for c in chans], dtype=float)
        exact = np.array([c.kind == BEC for c in chans], dtype=bool)
        return cls(lo, hi, exact)

    @classmethod
    def bec(cls, eps) -> "ChannelArray":
        eps = np.asarray(eps, dtype=float)
        if np.any((eps < 0) | (eps > 1)):
            raise ValueError("erasure probabilities must lie in [0, 1]")
        return cls(eps.copy(), eps.copy(), np.ones(eps.shape, dtype=bool))

    def to_models(self) -> list[ChannelModel]:
        out = []
        for lo, hi, ex in zip(self.lo, self.hi, self.exact):
            out.append(ChannelModel.bec(hi) if ex else ChannelModel.zonly(lo, hi))
        return out

    def __len__(self):
        return self.lo.shape[-1]

    def __getitem__(self, idx) -> "ChannelArray":
        return ChannelArray(self.lo[idx], self.hi[idx], self.exact[idx])

    def copy(self) -> "ChannelArray":
        return ChannelArray(self.lo.copy(), self.hi.copy(), self.exact.copy())

    @property
    def all_exact(self) -> bool:
        return bool(self.exact.all())

    def combine(self, first, second):
        """Return ``(minus, plus)`` arrays for pairs ``(first[k], second[k])``."""
        lo1, hi1, ex1 = self.lo[first], self.hi[first], self.exact[first]
        lo2, hi2, ex2 = self.lo[second], self.hi[second], self.exact[second]
        ex = ex1 & ex2
        mlo, mhi = _minus_bounds(lo1, hi1, lo2, hi2)
        bec_minus = np.clip(hi1 + hi2 - hi1 * hi2, 0.0, 1.0)
        mlo = np.where(ex, bec_minus, mlo)
        mhi = np.where(ex, bec_minus, mhi)
        minus = ChannelArray(mlo, mhi, ex)
        plus = ChannelArray(lo1 * lo2, hi1 * hi2, ex)
        return minus, plus


def read_channel_csv(path: str | Path) -> list[ChannelModel]:
    """Read a ``kind,param`` channel sequence; line *i* is channel *i*."""
    chans = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            if len(row) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'kind,param'")
            kind, param = row[0].strip().lower(), row[1].strip()
            if kind == "kind":
                continue
            try:
                value = float(param)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: bad parameter {param!r}") from None
            if kind == "bec":
                chans.append(ChannelModel.bec(value))
            elif kind == "bsc":
                chans.append(ChannelModel.bsc(value))
            else:
                raise ValueError(f"{path}:{lineno}: unknown channel kind {kind!r}")
    return chans


def write_channel_csv(path: str | Path, chans: Sequence[ChannelModel]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for ch in chans:
            if ch.kind == ZONLY:
                raise ValueError("ZOnly channels have no CSV representation")
            w.writerow([ch.kind.lower(), repr(ch.param)])
