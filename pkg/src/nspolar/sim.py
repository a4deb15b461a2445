"""Channel-sequence generation and Monte Carlo transmission."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channels import ChannelModel, read_channel_csv
from .codec import channel_llr, encode, sc_decode, union_bound
from .construct import CodeSpec
from .quantize import log2_exact

__all__ = ["SequenceSpec", "generate_sequence", "wilson_interval", "trial_rng", "MonteCarloResult",
           "run_monte_carlo", "resolve_threads"]

KINDS = ("iid-uniform-bec", "ramp-bec", "blockwise", "file")


@dataclass(frozen=True)
class SequenceSpec:
    """Recipe for a channel sequence.

    ``iid-uniform-bec``: ``params = (lo, hi)``; ``ramp-bec``: ``(start, stop)``
    inclusive; ``blockwise``: erasure probabilities repeated in equal-length
    blocks; ``file``: ``path`` to a ``kind,param`` CSV.
    """

    kind: str
    params: tuple = ()
    seed: int = 0
    path: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown sequence kind {self.kind!r}; expected one of {KINDS}")


def generate_sequence(spec: SequenceSpec, N: int) -> list[ChannelModel]:
    log2_exact(N)
    if spec.kind == "file":
        chans = read_channel_csv(spec.path)
        if len(chans) != N:
            raise ValueError(f"{spec.path} holds {len(chans)} channels, expected {N}")
        return chans
    p = tuple(float(x) for x in spec.params)
    if any(not 0 <= x <= 1 for x in p):
        raise ValueError("erasure probabilities must lie in [0, 1]")
    if spec.kind == "ramp-bec":
        start, stop = p
        eps = np.linspace(start, stop, N)
    elif spec.kind == "iid-uniform-bec":
        lo, hi = p
        eps = np.random.default_rng(spec.seed).uniform(lo, hi, N)
    else:
        if not p or N % len(p):
            raise ValueError("blockwise needs a number of levels dividing N")
        eps = np.repeat(np.asarray(p), N // len(p))
    return [ChannelModel.bec(e) for e in eps]


def wilson_interval(errors: int, trials: int, z: float = 1.959963984540054) -> tuple[float, float]:
    if trials <= 0:
        raise ValueError("need at least one trial")
    phat = errors / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if errors == 0 else max(0.0, centre - half)
    hi = 1.0 if errors == trials else min(1.0, centre + half)
    return lo, hi


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Counter-based stream keyed by ``(seed, trial)``."""
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, trial], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def resolve_threads(threads: int = 0) -> int:
    env = os.environ.get("NSPOLAR_THREADS")
    if env:
        threads = int(env)
    if threads <= 0:
        threads = os.cpu_count() or 1
    return threads


@dataclass
class MonteCarloResult:
    trials: int
    errors: int
    bit_errors: int
    K: int
    rate: float
    union_bound: float
    min_sum: bool = False
    per_trial: np.ndarray = field(default=None, repr=False)

    @property
    def fer(self) -> float:
        return self.errors / self.trials

    @property
    def ber(self) -> float:
        return self.bit_errors / (self.trials * self.K) if self.K else 0.0

    @property
    def ci95(self) -> tuple[float, float]:
        return wilson_interval(self.errors, self.trials)

    def row(self) -> dict:
        lo, hi = self.ci95
        return {"trials": self.trials, "errors": self.errors, "fer": self.fer, "ci_lo": lo,
                "ci_hi": hi, "rate": self.rate, "union_bound": self.union_bound}


def _chunk(spec, chans, kinds, params, seed, trials, min_sum):
    K = spec.K
    infos, draws = [], []
    for t in trials:
        rng = trial_rng(seed, t)
        infos.append(rng.integers(0, 2, K, dtype=np.uint8))
        draws.append(rng.random(len(chans)))
    infos = np.array(infos, dtype=np.uint8).reshape(len(trials), K)
    draws = np.array(draws)
    x = encode(spec, infos)
    is_bec = kinds == 0
    hit = draws < params
    erased = hit & is_bec
    flipped = hit & ~is_bec
    rx = x ^ flipped.astype(np.uint8)
    llr = channel_llr(chans, rx, erased)
    dec = sc_decode(spec, llr, min_sum=min_sum)
    wrong = dec != infos
    return wrong.any(axis=1), wrong.sum(axis=1)


def run_monte_carlo(spec: CodeSpec, chans, trials: int, seed: int = 0, threads: int = 1,
                    chunk: int = 256, min_sum: bool = False) -> MonteCarloResult:
    """Send random information words through the channel sequence and decode.

    Bit ``i`` of the codeword goes through channel ``i``.  Each trial draws
    from its own ``(seed, trial)`` stream, so chunking and threading do not
    change the outcome.
    """
    chans = list(chans)
    if len(chans) != spec.N:
        raise ValueError(f"{len(chans)} channels for a length-{spec.N} code")
    if trials < 1:
        raise ValueError("need at least one trial")
    if any(c.kind not in ("BEC", "BSC") for c in chans):
        raise ValueError("only BEC and BSC channels can be simulated")
    kinds = np.array([0 if c.kind == "BEC" else 1 for c in chans])
    params = np.array([c.param for c in chans])
    batches = [range(s, min(s + chunk, trials)) for s in range(0, trials, chunk)]
    if threads > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda r: _chunk(spec, chans, kinds, params, seed, r, min_sum), batches))
    else:
        parts = [_chunk(spec, chans, kinds, params, seed, r, min_sum) for r in batches]
    block = np.concatenate([p[0] for p in parts])
    bits = np.concatenate([p[1] for p in parts])
    return MonteCarloResult(trials=trials, errors=int(block.sum()), bit_errors=int(bits.sum()),
                            K=spec.K, rate=spec.rate, union_bound=union_bound(spec),
                            min_sum=min_sum, per_trial=block)
