"""Layered polarization engine.

A level of the transform takes ``2**j`` sub-blocks of length
``L = 2**(n-j)``, permutes each sub-block, and combines consecutive pairs
``(2p, 2p+1)``.  The degraded output of pair ``r`` of sub-block ``l`` goes
to ``l*L + r`` and the upgraded one to ``l*L + L/2 + r``, so the two halves
of every sub-block become the sub-blocks of the next level.  A pair can be
skipped, in which case both channels pass through to those same slots.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelArray
from .quantize import QuantGrid, in_core, log2_exact, subinterval_index
from .speed import DEFAULT_B, polarization_energy

__all__ = [
    "Layer",
    "LayeredCircuit",
    "PolarizationRun",
    "index_map",
    "level_positions",
    "sort_permutation",
    "build_T_row",
    "polarize_level",
    "run_det_polar1",
    "run_det_polar2",
    "replay",
]


def level_positions(n: int, j: int):
    """Output slots ``(minus, plus)`` of every pair at combining step ``j`` (1-based).

    Pair ``p`` always reads input slots ``2p`` and ``2p+1``.
    """
    if not 1 <= j <= n:
        raise ValueError(f"level {j} outside 1..{n}")
    half = 1 << (n - j)
    p = np.arange(1 << (n - 1))
    l, r = np.divmod(p, half)
    base = l * 2 * half + r
    return base, base + half


def index_map(j: int, i: int, n: int) -> tuple[int, int]:
    """1-based output positions of pair ``i`` at level ``j`` (``i = l 2^(n-j) + r``)."""
    if not 1 <= j <= n:
        raise ValueError(f"level {j} outside 1..{n}")
    if not 1 <= i <= 1 << (n - 1):
        raise ValueError(f"pair index {i} outside 1..{1 << (n - 1)}")
    half = 1 << (n - j)
    l, r = divmod(i - 1, half)
    r += 1
    return 2 * l * half + r, (2 * l + 1) * half + r


@dataclass(frozen=True)
class Layer:
    """One combining step: a block-diagonal gather permutation and a pair mask.

    ``perm`` is applied as ``x[perm]`` before pairing; ``active[p]`` is False
    where pair ``p`` is skipped.
    """

    perm: np.ndarray
    active: np.ndarray

    def __post_init__(self):
        if len(self.active) * 2 != len(self.perm):
            raise ValueError("active mask must have N/2 entries")

    @classmethod
    def identity(cls, N: int, active: bool = True) -> "Layer":
        return cls(np.arange(N), np.full(N // 2, active, dtype=bool))

    def is_block_diagonal(self, block: int) -> bool:
        idx = np.arange(len(self.perm))
        return bool(np.all(self.perm // block == idx // block)) and bool(
            np.array_equal(np.sort(self.perm), idx))

    def to_dict(self) -> dict:
        return {"perm": self.perm.tolist(), "active": self.active.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Layer":
        return cls(np.asarray(d["perm"], dtype=np.int64), np.asarray(d["active"], dtype=bool))


@dataclass(frozen=True)
class LayeredCircuit:
    n: int
    layers: tuple = ()

    def __post_init__(self):
        if len(self.layers) > self.n:
            raise ValueError("more layers than levels")
        for j, layer in enumerate(self.layers, start=1):
            if len(layer.perm) != self.N:
                raise ValueError(f"layer {j} has wrong length")
            if not layer.is_block_diagonal(1 << (self.n - j + 1)):
                raise ValueError(f"layer {j} permutation is not block-diagonal")

    @property
    def N(self) -> int:
        return 1 << self.n

    def full_layers(self) -> list[Layer]:
        """Layers for all ``n`` levels; missing trailing levels are identity + all-skip."""
        out = list(self.layers)
        if len(out) < self.n:
            out += [Layer.identity(self.N, active=False)] * (self.n - len(out))
        return out

    def butterfly_count(self) -> int:
        return int(sum(int(layer.active.sum()) for layer in self.layers))

    @property
    def T(self) -> np.ndarray:
        """Skip matrix, ``n x N/2``; True marks a skipped pair."""
        return np.array([~layer.active for layer in self.full_layers()], dtype=bool).reshape(self.n, -1)

    def encode(self, u) -> np.ndarray:
        """Map level-``n`` values back to level-0 (channel-input) values over GF(2).

        ``u`` may carry leading batch dimensions.
        """
        v = np.asarray(u, dtype=np.uint8)
        if v.shape[-1] != self.N:
            raise ValueError("input length does not match circuit")
        v = v.copy()
        layers = self.full_layers()
        for j in range(self.n, 0, -1):
            layer = layers[j - 1]
            mpos, ppos = level_positions(self.n, j)
            plus = v[..., ppos]
            first = v[..., mpos] ^ (plus & layer.active.astype(np.uint8))
            permuted = np.empty_like(v)
            permuted[..., 0::2] = first
            permuted[..., 1::2] = plus
            v = np.empty_like(v)
            v[..., layer.perm] = permuted
        return v

    def to_dict(self) -> dict:
        return {"n": self.n, "layers": [layer.to_dict() for layer in self.layers]}

    @classmethod
    def from_dict(cls, d: dict) -> "LayeredCircuit":
        return cls(int(d["n"]), tuple(Layer.from_dict(x) for x in d["layers"]))


def sort_permutation(hi, level: int, n: int, lo=None) -> np.ndarray:
    """Gather permutation sorting each length-``2**(n-level)`` sub-block by decreasing Z.

    Ties break on ``lo`` (decreasing) and then original order.
    """
    hi = np.asarray(hi, dtype=float)
    lo = hi if lo is None else np.asarray(lo, dtype=float)
    N = 1 << n
    if hi.shape != (N,):
        raise ValueError("key length must be 2**n")
    idx = np.arange(N)
    block = idx >> (n - level)
    return np.lexsort((idx, -lo, -hi, block))


def build_T_row(hi_sorted, grid: QuantGrid) -> np.ndarray:
    """Skip flags for consecutive pairs of an already permuted level.

    A pair is combined only if both upper bounds are in the core and in the
    same cell of ``grid``.
    """
    z = np.asarray(hi_sorted, dtype=float)
    z1, z2 = z[0::2], z[1::2]
    ok = in_core(grid, z1) & in_core(grid, z2)
    ok &= subinterval_index(grid, z1) == subinterval_index(grid, z2)
    return ~np.asarray(ok, dtype=bool)


def polarize_level(chs: ChannelArray, layer: Layer, j: int, n: int) -> ChannelArray:
    """Apply combining step ``j`` described by ``layer``."""
    permuted = chs[layer.perm]
    minus, plus = permuted.combine(slice(0, None, 2), slice(1, None, 2))
    first, second = permuted[0::2], permuted[1::2]
    act = layer.active
    mpos, ppos = level_positions(n, j)
    lo = np.empty(len(chs))
    hi = np.empty(len(chs))
    ex = np.empty(len(chs), dtype=bool)
    lo[mpos] = np.where(act, minus.lo, first.lo)
    hi[mpos] = np.where(act, minus.hi, first.hi)
    ex[mpos] = np.where(act, minus.exact, first.exact)
    lo[ppos] = np.where(act, plus.lo, second.lo)
    hi[ppos] = np.where(act, plus.hi, second.hi)
    ex[ppos] = np.where(act, plus.exact, second.exact)
    return ChannelArray(lo, hi, ex)


@dataclass
class PolarizationRun:
    """Everything needed to replay or audit one polarization run."""

    channels: ChannelArray
    circuit: LayeredCircuit
    energy: np.ndarray
    energy_lo: np.ndarray
    history: list = field(default_factory=list, repr=False)

    @property
    def T(self) -> np.ndarray:
        return self.circuit.T

    @property
    def exact(self) -> bool:
        return self.channels.all_exact


def _energy(z, b):
    return polarization_energy(np.clip(z, 0.0, 1.0), b)


def _run(chs, n, b, row_fn, record):
    chs = ChannelArray.from_models(chs) if not isinstance(chs, ChannelArray) else chs
    if len(chs) != 1 << n:
        raise ValueError("channel count must be 2**n")
    layers = []
    e_hi = [_energy(chs.hi, b)]
    e_lo = [_energy(chs.lo, b)]
    history = [chs] if record else []
    for j in range(1, n + 1):
        perm = sort_permutation(chs.hi, j - 1, n, chs.lo)
        active = ~row_fn(chs.hi[perm])
        layer = Layer(perm, active)
        chs = polarize_level(chs, layer, j, n)
        layers.append(layer)
        e_hi.append(_energy(chs.hi, b))
        e_lo.append(_energy(chs.lo, b))
        if record:
            history.append(chs)
    return PolarizationRun(chs, LayeredCircuit(n, tuple(layers)), np.array(e_hi), np.array(e_lo), history)


def run_det_polar2(chs, grid: QuantGrid, b: float = DEFAULT_B, record: bool = False) -> PolarizationRun:
    """Sorting permutations plus grid-driven skips, evolved level by level."""
    n = log2_exact(len(chs))
    if n >= 1 and grid.n != n:
        raise ValueError(f"grid built for 2**{grid.n}, channels have 2**{n}")
    return _run(chs, n, b, lambda z: build_T_row(z, grid), record)


def run_det_polar1(chs, b: float = DEFAULT_B, record: bool = False) -> PolarizationRun:
    """Sorting permutations only; every pair is combined."""
    n = log2_exact(len(chs))
    return _run(chs, n, b, lambda z: np.zeros(len(z) // 2, dtype=bool), record)


def replay(chs, circuit: LayeredCircuit, record: bool = False):
    """Push channels through a fixed circuit; returns final channels (and history)."""
    chs = ChannelArray.from_models(chs) if not isinstance(chs, ChannelArray) else chs
    if len(chs) != circuit.N:
        raise ValueError("channel count does not match circuit")
    history = [chs]
    for j, layer in enumerate(circuit.full_layers(), start=1):
        chs = polarize_level(chs, layer, j, circuit.n)
        history.append(chs)
    return (chs, history) if record else chs
