"""Two-stage code construction for a non-stationary channel sequence.

Stage 1 splits the ``N = N1 * N2`` channels into ``N2`` capacity-balanced
groups and polarizes each group with sorting and grid-driven skips.  The
``M`` best bit-channels of every group (all with ``Z < 1/2``) are then
lined up across groups and polarized again for ``l`` levels, with the
moves dictated by the extremal process on their doubled Z values.
Positions whose certified Z is at most ``Pe / N`` carry information.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .channels import ChannelArray, ChannelModel, symmetric_capacity
from .extremal import LOG_TOL, ConstantsReport, ExtremalTrace, _step_log, compute_constants, run_coupled
from .polarize import LayeredCircuit, PolarizationRun, replay, run_det_polar2
from .quantize import build_grid, log2_exact
from .speed import DEFAULT_B, estimate_eta

__all__ = [
    "SPEC_VERSION",
    "CodeSpec",
    "partition_channels",
    "stage1",
    "select_M",
    "stage2",
    "Stage2Row",
    "assemble",
    "construct_code",
    "single_stage_spec",
    "reselect",
    "cached_eta",
]

SPEC_VERSION = "nspolar-codespec-1"


@lru_cache(maxsize=16)
def cached_eta(b: float = DEFAULT_B, resolution: float = 1e-5) -> float:
    """Guarded eta estimate, memoised per ``(b, resolution)``."""
    return estimate_eta(b, resolution).eta_certified


def partition_channels(values, K: int, M: int, max_iter: int | None = None) -> list[np.ndarray]:
    """Split ``K*M`` values in ``[0, 1]`` into ``K`` groups of ``M`` whose means
    are all at least the global mean minus ``1/M``.

    Starts from a snake deal of the sorted values, then repeatedly swaps the
    smallest member of the worst group with the largest member of the best
    group until the guarantee holds.  Each swap strictly raises the worst
    mean, so the loop terminates.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 1 or K < 1 or M < 1 or len(values) != K * M:
        raise ValueError("need exactly K*M values")
    if np.any((values < 0) | (values > 1)):
        raise ValueError("values must lie in [0, 1]")
    order = np.argsort(-values, kind="stable")
    rnd, pos = np.divmod(np.arange(K * M), K)
    group = np.where(rnd % 2 == 0, pos, K - 1 - pos)
    groups = np.empty((K, M), dtype=np.int64)
    for g in range(K):
        groups[g] = order[group == g]
    target = values.mean() - 1.0 / M
    sums = values[groups].sum(axis=1)
    max_iter = max_iter if max_iter is not None else 10 * K * M + 100
    for _ in range(max_iter):
        j0 = int(np.argmin(sums))
        if sums[j0] / M >= target - 1e-12:
            break
        j1 = int(np.argmax(sums))
        i0 = int(np.argmin(values[groups[j0]]))
        i1 = int(np.argmax(values[groups[j1]]))
        a, b = groups[j0, i0], groups[j1, i1]
        if values[b] <= values[a]:
            break
        groups[j0, i0], groups[j1, i1] = b, a
        sums[j0] += values[b] - values[a]
        sums[j1] += values[a] - values[b]
    return [np.sort(g) for g in groups]


def stage1(chs: ChannelArray, groups, grid, b: float = DEFAULT_B) -> list[PolarizationRun]:
    return [run_det_polar2(chs[g], grid, b) for g in groups]


def select_M(runs: list[PolarizationRun]):
    """Common number ``M`` of good (``Z < 1/2``) bit-channels and their positions.

    Each group contributes its ``M`` smallest-Z positions, listed in
    increasing position order so that successive cancellation can visit
    them in step across groups.
    """
    counts = [int(np.sum(r.channels.hi < 0.5)) for r in runs]
    M = max(0, min(counts)) if counts else 0
    sel = np.empty((len(runs), M), dtype=np.int64)
    for k, r in enumerate(runs):
        best = np.argsort(r.channels.hi, kind="stable")[:M]
        sel[k] = np.sort(best)
    return M, sel


@dataclass
class Stage2Row:
    circuit: LayeredCircuit
    channels: ChannelArray
    trace: ExtremalTrace
    log2_x: np.ndarray
    history: list = field(repr=False, default_factory=list)

    def dominance_violations(self) -> int:
        """Count of (level, position) with tracked ``Z.hi > x`` beyond float slack."""
        bad = 0
        for j in range(self.trace.levels + 1):
            with np.errstate(divide="ignore"):
                lz = np.log2(self.history[j].hi)
            bad += int(np.sum(lz > self.trace.lx[j] + LOG_TOL))
        return bad


def stage2(rows: list[ChannelArray], n2: int, l: int) -> list[Stage2Row]:
    """Polarize each row of good channels along the extremal process on ``2 Z.hi``."""
    out = []
    for chs in rows:
        if np.any(chs.hi >= 0.5):
            raise ValueError("stage 2 needs every input with Z.hi < 1/2")
        trace = run_coupled(chs.hi, levels=l)
        circuit = LayeredCircuit(n2, tuple(trace.layers))
        final, history = replay(chs, circuit, record=True)
        lx = trace.lx[-1]
        ident = np.arange(len(lx))
        off = np.zeros(len(lx) // 2, dtype=bool)
        for j in range(l + 1, n2 + 1):
            lx, _, _ = _step_log(lx, j, n2, perm=ident, active=off)
        out.append(Stage2Row(circuit, final, trace, lx, history))
    return out


@dataclass
class CodeSpec:
    """Complete description of a constructed code.

    Positions of the level-``n`` input vector ``u`` are numbered row by row:
    ``i0 * N2 + k`` for output ``k`` of stage-2 row ``i0``, followed by the
    unselected stage-1 positions of group 0, group 1, ... in increasing
    order.  ``physical_perm[s]`` is the physical channel feeding trellis
    slot ``s``; slot ``k * N1 + p`` is input ``p`` of group ``k``.
    """

    n: int
    n1: int
    n2: int
    l: int
    physical_perm: np.ndarray
    stage1_circuits: list
    selected: np.ndarray
    stage2_circuits: list
    frozen: np.ndarray
    z_lo: np.ndarray
    z_hi: np.ndarray
    Pe_target: float
    constants: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return 1 << self.n

    @property
    def N1(self) -> int:
        return 1 << self.n1

    @property
    def N2(self) -> int:
        return 1 << self.n2

    @property
    def M(self) -> int:
        return self.selected.shape[1]

    @property
    def K(self) -> int:
        return int((~self.frozen).sum())

    @property
    def rate(self) -> float:
        return self.K / self.N

    @property
    def info_positions(self) -> np.ndarray:
        return np.flatnonzero(~self.frozen)

    def unselected(self) -> list[np.ndarray]:
        out = []
        for k in range(self.N2):
            mask = np.ones(self.N1, dtype=bool)
            mask[self.selected[k]] = False
            out.append(np.flatnonzero(mask))
        return out

    def butterfly_count(self) -> int:
        return sum(c.butterfly_count() for c in self.stage1_circuits) + sum(
            c.butterfly_count() for c in self.stage2_circuits)

    def validate(self) -> None:
        N = self.N
        if self.n != self.n1 + self.n2:
            raise ValueError("n must equal n1 + n2")
        if sorted(self.physical_perm.tolist()) != list(range(N)):
            raise ValueError("physical_perm is not a permutation")
        if len(self.stage1_circuits) != self.N2 or any(c.n != self.n1 for c in self.stage1_circuits):
            raise ValueError("stage-1 circuits do not match n1/N2")
        if len(self.stage2_circuits) != self.M or any(c.n != self.n2 for c in self.stage2_circuits):
            raise ValueError("stage-2 circuits do not match M/n2")
        if self.selected.shape[0] != self.N2 or np.any(np.diff(self.selected, axis=1) <= 0):
            raise ValueError("selected positions must increase along each group")
        for arr in (self.frozen, self.z_lo, self.z_hi):
            if len(arr) != N:
                raise ValueError("per-position arrays must have length N")

    def to_dict(self) -> dict:
        return {
            "version": SPEC_VERSION,
            "N": self.N, "n": self.n, "n1": self.n1, "n2": self.n2, "l": self.l, "M": self.M,
            "rate": self.rate, "Pe_target": self.Pe_target,
            "physical_perm": self.physical_perm.tolist(),
            "stage1_circuits": [c.to_dict() for c in self.stage1_circuits],
            "selected": self.selected.tolist(),
            "stage2_circuits": [c.to_dict() for c in self.stage2_circuits],
            "frozen": self.frozen.tolist(),
            "z_certificates": [[float(a), float(b)] for a, b in zip(self.z_lo, self.z_hi)],
            "constants": self.constants,
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CodeSpec":
        if d.get("version") != SPEC_VERSION:
            raise ValueError(f"unsupported code spec version {d.get('version')!r}")
        z = np.asarray(d["z_certificates"], dtype=float).reshape(-1, 2)
        n2 = int(d["n2"])
        sel = np.asarray(d["selected"], dtype=np.int64).reshape(1 << n2, int(d["M"]))
        spec = cls(
            n=int(d["n"]), n1=int(d["n1"]), n2=n2, l=int(d["l"]),
            physical_perm=np.asarray(d["physical_perm"], dtype=np.int64),
            stage1_circuits=[LayeredCircuit.from_dict(c) for c in d["stage1_circuits"]],
            selected=sel,
            stage2_circuits=[LayeredCircuit.from_dict(c) for c in d["stage2_circuits"]],
            frozen=np.asarray(d["frozen"], dtype=bool), z_lo=z[:, 0], z_hi=z[:, 1],
            Pe_target=float(d["Pe_target"]), constants=d.get("constants", {}),
            provenance=d.get("provenance", {}),
        )
        spec.validate()
        return spec

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "CodeSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def assemble(n1: int, n2: int, l: int, groups, runs, sel, rows: list[Stage2Row], Pe: float,
             constants: dict | None = None, provenance: dict | None = None) -> CodeSpec:
    """Certificates, frozen mask and layout from the finished stages."""
    N1, N2 = 1 << n1, 1 << n2
    N = N1 * N2
    M = sel.shape[1]
    z_lo = np.empty(N)
    z_hi = np.empty(N)
    for i0, row in enumerate(rows):
        hi = np.minimum(row.channels.hi, np.exp2(row.log2_x))
        z_lo[i0 * N2:(i0 + 1) * N2] = np.minimum(row.channels.lo, hi)
        z_hi[i0 * N2:(i0 + 1) * N2] = hi
    frozen = np.ones(N, dtype=bool)
    frozen[:M * N2] = z_hi[:M * N2] > Pe / N
    pos = M * N2
    for k, r in enumerate(runs):
        mask = np.ones(N1, dtype=bool)
        mask[sel[k]] = False
        rest = np.flatnonzero(mask)
        z_lo[pos:pos + len(rest)] = r.channels.lo[rest]
        z_hi[pos:pos + len(rest)] = r.channels.hi[rest]
        pos += len(rest)
    spec = CodeSpec(
        n=n1 + n2, n1=n1, n2=n2, l=l,
        physical_perm=np.concatenate([np.asarray(g, dtype=np.int64) for g in groups]),
        stage1_circuits=[r.circuit for r in runs], selected=sel,
        stage2_circuits=[row.circuit for row in rows], frozen=frozen, z_lo=z_lo, z_hi=z_hi,
        Pe_target=float(Pe), constants=constants or {}, provenance=provenance or {},
    )
    spec.validate()
    return spec


@dataclass
class Construction:
    """A code together with the intermediate objects that justify it."""

    spec: CodeSpec
    constants: ConstantsReport
    avg_capacity: float
    groups: list
    stage1_runs: list
    stage2_rows: list
    grid: object

    @property
    def rate_guarantee(self) -> float:
        return self.constants.rate_guarantee(self.avg_capacity)

    @property
    def M_floor(self) -> float:
        return self.constants.M_floor(self.avg_capacity)

    def report(self) -> dict:
        return {
            "N": self.spec.N, "rate": self.spec.rate, "K": self.spec.K, "M": self.spec.M,
            "M_floor": self.M_floor, "avg_capacity": self.avg_capacity,
            "rate_guarantee": self.rate_guarantee,
            "union_bound": float(self.spec.z_hi[~self.spec.frozen].sum()),
            "Pe_target": self.spec.Pe_target,
        }


def construct_code(chans, Pe: float = 0.01, mu: float = 10.79, b: float = DEFAULT_B,
                   eta: float | None = None, t: float = 0.49) -> Construction:
    """Run the full two-stage construction on a channel sequence."""
    if not isinstance(chans, ChannelArray):
        models = list(chans)
        caps = np.array([symmetric_capacity(c).hi if c.is_exact else
                         max(0.0, 1.0 - c.z.hi**2) for c in models])
        heuristic = any(not c.is_exact for c in models)
        chs = ChannelArray.from_models(models)
    else:
        chs = chans
        if not chs.all_exact:
            raise ValueError("ChannelArray input must be exact BEC; pass ChannelModel objects instead")
        caps = 1.0 - chs.hi
        heuristic = False
    n = log2_exact(len(chs))
    eta = cached_eta(b) if eta is None else eta
    consts = compute_constants(mu, Pe, b, eta, n, t)
    n1, n2, l = consts.n1, consts.n2, consts.l
    N1, N2 = 1 << n1, 1 << n2
    groups = partition_channels(caps, N2, N1)
    grid = build_grid(N1, consts.tau)
    runs = stage1(chs, groups, grid, b)
    M, sel = select_M(runs)
    rows = []
    for i0 in range(M):
        lo = np.array([runs[k].channels.lo[sel[k, i0]] for k in range(N2)])
        hi = np.array([runs[k].channels.hi[sel[k, i0]] for k in range(N2)])
        ex = np.array([runs[k].channels.exact[sel[k, i0]] for k in range(N2)])
        rows.append(ChannelArray(lo, hi, ex))
    s2 = stage2(rows, n2, l)
    avg_cap = float(np.mean(caps))
    provenance = {
        "grid": grid.provenance(), "avg_capacity": avg_cap, "capacity_heuristic": heuristic,
        "M_realized": M, "M_floor": consts.M_floor(avg_cap),
        "rate_guarantee": consts.rate_guarantee(avg_cap), "t": t,
    }
    spec = assemble(n1, n2, l, groups, runs, sel, s2, Pe, consts.to_dict(), provenance)
    return Construction(spec, consts, avg_cap, groups, runs, s2, grid)


def single_stage_spec(run: PolarizationRun, info_positions, Pe: float = 1.0) -> CodeSpec:
    """Wrap a single polarization run as a code with the given information set.

    Every bit-channel is 'selected' and stage 2 is trivial, so ``u`` is
    simply the level-``n`` vector of the run.
    """
    n = run.circuit.n
    N = 1 << n
    frozen = np.ones(N, dtype=bool)
    frozen[np.asarray(info_positions, dtype=np.int64)] = False
    return CodeSpec(
        n=n, n1=n, n2=0, l=0, physical_perm=np.arange(N), stage1_circuits=[run.circuit],
        selected=np.arange(N)[None, :], stage2_circuits=[LayeredCircuit(0, ()) for _ in range(N)],
        frozen=frozen, z_lo=run.channels.lo.copy(), z_hi=run.channels.hi.copy(), Pe_target=Pe,
    )


def reselect(spec: CodeSpec, K: int) -> CodeSpec:
    """Copy of ``spec`` carrying information on the ``K`` best certified positions.

    Unselected stage-1 positions stay frozen.  The ``Pe / N`` rule no longer
    applies; ``Pe_target`` becomes the resulting union bound.
    """
    eligible = np.arange(spec.M * spec.N2)
    if not 0 <= K <= len(eligible):
        raise ValueError(f"K must lie in 0..{len(eligible)}")
    best = eligible[np.argsort(spec.z_hi[eligible], kind="stable")[:K]]
    frozen = np.ones(spec.N, dtype=bool)
    frozen[best] = False
    prov = dict(spec.provenance, selection="best-K", K=K)
    return replace(spec, frozen=frozen, Pe_target=float(spec.z_hi[best].sum()), provenance=prov)
