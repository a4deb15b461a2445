"""Encoding and successive-cancellation decoding over layered circuits.

Decoding is batched: every array carries a leading trial axis so one pass
of the recursion decodes many received words at once.  LLRs use natural
logarithms (positive favours bit 0) and may be ``±inf``; ``inf - inf``
is resolved to an erasure.
"""
from __future__ import annotations

import numpy as np

from .construct import CodeSpec
from .polarize import LayeredCircuit

__all__ = ["encode", "sc_decode", "union_bound", "boxplus", "channel_llr", "DecodeStats"]


def boxplus(a, b, min_sum: bool = False):
    """Check-node combination ``2 artanh(tanh(a/2) tanh(b/2))`` in Jacobian form."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    aa, ab = np.abs(a), np.abs(b)
    sign = np.sign(a) * np.sign(b)
    mag = np.minimum(aa, ab)
    if not min_sum:
        with np.errstate(invalid="ignore", over="ignore"):
            corr = np.log1p(np.exp(-(aa + ab))) - np.log1p(np.exp(-np.abs(aa - ab)))
        mag = mag + np.where(np.isnan(corr), 0.0, corr)
    return sign * mag


def _plus_rule(a, b, bit):
    with np.errstate(invalid="ignore"):
        out = b + (1.0 - 2.0 * bit) * a
    return np.where(np.isnan(out), 0.0, out)


class DecodeStats:
    """Counts of LLR butterflies actually evaluated."""

    def __init__(self):
        self.butterflies = 0
        self.passthrough = 0


def _tree(circuit: LayeredCircuit, layers, j, blk, llr, stats, min_sum):
    """SC over one sub-block; yields leaf LLRs, receives hard bits, returns partial sums."""
    if j == circuit.n:
        bit = yield llr[:, 0]
        return np.asarray(bit, dtype=np.uint8)[:, None]
    L = llr.shape[1]
    half = L // 2
    off = blk * L
    layer = layers[j]
    perm = layer.perm[off:off + L] - off
    act = layer.active[blk * half:(blk + 1) * half]
    lp = llr[:, perm]
    a, b = lp[:, 0::2], lp[:, 1::2]
    n_act = int(act.sum())
    if stats is not None:
        stats.butterflies += n_act
        stats.passthrough += half - n_act
    if n_act:
        lm = np.where(act, boxplus(a, b, min_sum), a)
    else:
        lm = a
    xm = yield from _tree(circuit, layers, j + 1, 2 * blk, lm, stats, min_sum)
    lpl = np.where(act, _plus_rule(a, b, xm), b) if n_act else b
    xp = yield from _tree(circuit, layers, j + 1, 2 * blk + 1, lpl, stats, min_sum)
    vp = np.empty((llr.shape[0], L), dtype=np.uint8)
    vp[:, 0::2] = xm ^ (xp & act.astype(np.uint8))
    vp[:, 1::2] = xp
    v = np.empty_like(vp)
    v[:, perm] = vp
    return v


def _decide(llr, frozen):
    if frozen:
        return np.zeros(llr.shape[0], dtype=np.uint8)
    return (llr < 0).astype(np.uint8)


def _run_tree(circuit, llr, frozen, stats, min_sum, leaves=None):
    """Decode a self-contained tree; returns ``(u_hat, partial_sums)``.

    If ``leaves`` is given, the leaf LLRs are written into it.
    """
    gen = _tree(circuit, circuit.full_layers(), 0, 0, llr, stats, min_sum)
    u = np.empty((llr.shape[0], circuit.N), dtype=np.uint8)
    leaf = next(gen)
    i = 0
    while True:
        if leaves is not None:
            leaves[:, i] = leaf
        u[:, i] = _decide(leaf, frozen[i])
        try:
            leaf = gen.send(u[:, i])
        except StopIteration as stop:
            return u, stop.value
        i += 1


def encode(spec: CodeSpec, info_bits) -> np.ndarray:
    """Codewords in physical transmission order; ``info_bits`` may be batched."""
    info = np.asarray(info_bits, dtype=np.uint8)
    single = info.ndim == 1
    info = np.atleast_2d(info)
    if info.shape[1] != spec.K:
        raise ValueError(f"expected {spec.K} information bits, got {info.shape[1]}")
    B = info.shape[0]
    N1, N2, M = spec.N1, spec.N2, spec.M
    u = np.zeros((B, spec.N), dtype=np.uint8)
    u[:, spec.info_positions] = info
    leaves = np.zeros((B, N2, N1), dtype=np.uint8)
    ks = np.arange(N2)
    for i0, circ in enumerate(spec.stage2_circuits):
        leaves[:, ks, spec.selected[:, i0]] = circ.encode(u[:, i0 * N2:(i0 + 1) * N2])
    pos = M * N2
    for k, rest in enumerate(spec.unselected()):
        leaves[:, k, rest] = u[:, pos:pos + len(rest)]
        pos += len(rest)
    slots = np.concatenate([spec.stage1_circuits[k].encode(leaves[:, k]) for k in range(N2)], axis=1)
    out = np.empty_like(slots)
    out[:, spec.physical_perm] = slots
    return out[0] if single else out


def sc_decode(spec: CodeSpec, llr, min_sum: bool = False, stats: DecodeStats | None = None,
              return_u: bool = False, return_llr: bool = False):
    """Successive-cancellation decoding of physical-order LLRs.

    Stage-1 trees advance in step; whenever every tree reaches its next
    selected position the matching stage-2 tree is decoded and its
    partial sums are fed back.  Ties (LLR exactly 0) decide 0.

    Returns the information bits, followed by the full ``u`` estimate if
    ``return_u`` and by the LLR seen at every ``u`` position if
    ``return_llr``.
    """
    y = np.asarray(llr, dtype=float)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    if y.shape[1] != spec.N:
        raise ValueError(f"expected {spec.N} observations, got {y.shape[1]}")
    if np.isnan(y).any():
        raise ValueError("NaN in received LLRs")
    B = y.shape[0]
    N1, N2, M = spec.N1, spec.N2, spec.M
    slot = y[:, spec.physical_perm]
    gens, leaves, cursor = [], [], []
    for k, circ in enumerate(spec.stage1_circuits):
        g = _tree(circ, circ.full_layers(), 0, 0, slot[:, k * N1:(k + 1) * N1], stats, min_sum)
        gens.append(g)
        leaves.append(next(g))
        cursor.append(0)
    is_sel = np.zeros((N2, N1), dtype=bool)
    is_sel[np.arange(N2)[:, None], spec.selected] = True
    zeros = np.zeros(B, dtype=np.uint8)

    u_llr = np.zeros((B, spec.N)) if return_llr else None
    rest_pos = np.full((N2, N1), -1, dtype=np.int64)
    pos = M * N2
    for k, rest in enumerate(spec.unselected()):
        rest_pos[k, rest] = np.arange(pos, pos + len(rest))
        pos += len(rest)

    def advance(k):
        # walk tree k to its next selected leaf, feeding frozen zeros
        while cursor[k] < N1 and not is_sel[k, cursor[k]]:
            if u_llr is not None:
                u_llr[:, rest_pos[k, cursor[k]]] = leaves[k]
            try:
                leaves[k] = gens[k].send(zeros)
            except StopIteration:
                leaves[k] = None
            cursor[k] += 1

    for k in range(N2):
        advance(k)
    u = np.zeros((B, spec.N), dtype=np.uint8)
    for i0, circ in enumerate(spec.stage2_circuits):
        row = np.stack([leaves[k] for k in range(N2)], axis=1)
        sl = slice(i0 * N2, (i0 + 1) * N2)
        u_row, v_row = _run_tree(circ, row, spec.frozen[sl], stats, min_sum,
                                 None if u_llr is None else u_llr[:, sl])
        u[:, sl] = u_row
        for k in range(N2):
            try:
                leaves[k] = gens[k].send(v_row[:, k])
            except StopIteration:
                leaves[k] = None
            cursor[k] += 1
            advance(k)
    info = u[:, spec.info_positions]
    out = [info] + ([u] if return_u else []) + ([u_llr] if return_llr else [])
    if single:
        out = [a[0] for a in out]
    return tuple(out) if len(out) > 1 else out[0]


def union_bound(spec: CodeSpec) -> float:
    """Sum of certified Z upper bounds over information positions."""
    return float(np.sum(spec.z_hi[~spec.frozen]))


def channel_llr(chans, received, erased=None) -> np.ndarray:
    """LLRs for BEC/BSC observations.

    ``received`` holds the output bits; ``erased`` flags BEC erasures.
    """
    rx = np.asarray(received, dtype=np.uint8)
    sign = 1.0 - 2.0 * rx
    mag = np.empty(len(chans))
    is_bec = np.empty(len(chans), dtype=bool)
    for i, ch in enumerate(chans):
        if ch.kind == "BEC":
            mag[i], is_bec[i] = np.inf, True
        elif ch.kind == "BSC":
            p = ch.param
            mag[i] = np.inf if p == 0 else np.log((1.0 - p) / p)
            is_bec[i] = False
        else:
            raise ValueError("ZOnly channels cannot produce observations")
    out = sign * mag
    if erased is not None:
        out = np.where(np.asarray(erased, dtype=bool) & is_bec, 0.0, out)
    return out
