"""Polarization-speed analysis.

``f(z) = (z (1-z))**b`` measures how far a Bhattacharyya value is from
being polarized.  ``g`` bounds the one-step contraction of ``f`` for a
pair of channels, ``h`` takes the worst case over pairs that the fine
quantization allows to be combined, and ``eta = -log2 sup h``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DEFAULT_B",
    "ETA_GUARD",
    "f_poly",
    "polarization_energy",
    "g_bound",
    "delta_f",
    "h_profile",
    "EtaEstimate",
    "estimate_eta",
    "speed_trace",
    "mu_threshold",
]

DEFAULT_B = 0.72
# subtracted from the estimate wherever eta feeds an inequality
ETA_GUARD = 1e-6

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def f_poly(z, b: float = DEFAULT_B):
    z = np.asarray(z, dtype=float)
    out = np.power(np.clip(z * (1.0 - z), 0.0, None), b)
    return float(out) if out.ndim == 0 else out


def polarization_energy(zs, b: float = DEFAULT_B) -> float:
    """Mean of ``f`` over a sequence of Bhattacharyya values.

    The sum is exactly rounded, so the result does not depend on order.
    """
    zs = np.asarray(zs, dtype=float)
    if zs.size == 0:
        raise ValueError("polarization energy of an empty sequence")
    if np.any((zs < 0) | (zs > 1)):
        raise ValueError("Bhattacharyya values must lie in [0, 1]")
    return math.fsum(f_poly(zs, b).ravel()) / zs.size


def g_bound(z1, z2, b: float = DEFAULT_B):
    """Worst-case ratio of ``f`` after/before combining two channels.

    The degraded output's Z is only known to lie between the lower bound
    ``sqrt(z1²+z2²-z1²z2²)`` and the upper bound ``z1+z2-z1z2``; ``f`` is
    unimodal with its peak at 1/2, so the sup is at 1/2 when the range
    contains it and at an endpoint otherwise.
    """
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    if np.any((z1 <= 0) | (z1 >= 1) | (z2 <= 0) | (z2 >= 1)):
        raise ValueError("g is defined on the open square (0, 1)^2")
    lo = np.sqrt(z1 * z1 + z2 * z2 - z1 * z1 * z2 * z2)
    hi = z1 + z2 - z1 * z2
    peak = f_poly(0.5, b)
    f_minus = np.where((lo <= 0.5) & (hi >= 0.5), peak, np.maximum(f_poly(lo, b), f_poly(hi, b)))
    out = (f_poly(z1 * z2, b) + f_minus) / (f_poly(z1, b) + f_poly(z2, b))
    return float(out) if out.ndim == 0 else out


def delta_f(z1, z2, z_minus, z_plus, b: float = DEFAULT_B):
    """Actual contraction ratio given the four Bhattacharyya values."""
    num = f_poly(z_minus, b) + f_poly(z_plus, b)
    den = f_poly(z1, b) + f_poly(z2, b)
    return num / den


def _partner_range(z, c, lam):
    upper = np.where(z < c, 2.0 * z, np.where(z <= 1.0 - c, np.minimum(z + lam, 1.0 - c), 0.5 * (1.0 + z)))
    return upper


def h_profile(z, b: float = DEFAULT_B, c: float = 0.1, lam: float = 0.1,
              n_scan: int = 64, n_golden: int = 30):
    """Sup of ``g(z, z')`` over the partners ``z'`` sharing a cell with ``z``.

    Dense scan of ``n_scan`` partners followed by a golden-section search
    in the bracket around the best scan point.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    scalar = np.ndim(z) == 1 and z.size == 1
    if np.any((z <= 0) | (z >= 1)):
        raise ValueError("h is defined on (0, 1)")
    upper = _partner_range(z, c, lam)
    width = upper - z
    out = np.empty_like(z)
    steps = np.linspace(0.0, 1.0, n_scan)
    chunk = max(1, 2_000_000 // n_scan)
    for start in range(0, z.size, chunk):
        sl = slice(start, start + chunk)
        zz, ww = z[sl][:, None], width[sl][:, None]
        partners = np.minimum(zz + ww * steps[None, :], np.nextafter(1.0, 0.0))
        vals = g_bound(np.broadcast_to(zz, partners.shape), partners, b)
        k = vals.argmax(axis=1)
        best = vals[np.arange(len(k)), k]
        # golden section on [k-1, k+1] scan cells
        a = z[sl] + width[sl] * steps[np.maximum(k - 1, 0)]
        d = z[sl] + width[sl] * steps[np.minimum(k + 1, n_scan - 1)]
        d = np.minimum(d, np.nextafter(1.0, 0.0))
        zs = z[sl]
        x1 = d - _INV_PHI * (d - a)
        x2 = a + _INV_PHI * (d - a)
        g1 = g_bound(zs, x1, b)
        g2 = g_bound(zs, x2, b)
        for _ in range(n_golden):
            left = g1 >= g2
            best = np.maximum(best, np.maximum(g1, g2))
            d = np.where(left, x2, d)
            a = np.where(left, a, x1)
            nx1 = np.where(left, d - _INV_PHI * (d - a), x2)
            nx2 = np.where(left, x1, a + _INV_PHI * (d - a))
            g_new1 = np.where(left, g_bound(zs, d - _INV_PHI * (d - a), b), g2)
            g_new2 = np.where(left, g1, g_bound(zs, a + _INV_PHI * (d - a), b))
            x1, x2, g1, g2 = nx1, nx2, g_new1, g_new2
        out[sl] = np.maximum(best, np.maximum(g1, g2))
    return float(out[0]) if scalar else out


@dataclass
class EtaEstimate:
    b: float
    resolution: float
    eta: float
    sup_h: float
    sup_z: float
    grid_sup_h: float
    z: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)

    @property
    def eta_certified(self) -> float:
        return self.eta - ETA_GUARD

    def summary(self) -> dict:
        return {"b": self.b, "eta": self.eta, "sup_z": self.sup_z, "sup_h": self.sup_h,
                "resolution": self.resolution}


def estimate_eta(b: float = DEFAULT_B, resolution: float = 1e-5, refine: bool = True,
                 c: float = 0.1, lam: float = 0.1, top: int = 10, tol: float = 1e-9) -> EtaEstimate:
    """Estimate ``eta = -log2 sup_z h(z)`` on a uniform grid.

    With ``refine`` the ``top`` best grid points are polished by a
    golden-section search on their neighbouring cells.
    """
    if not 0 < b < 1:
        raise ValueError("b must lie in (0, 1)")
    if not 0 < resolution <= 1e-1:
        raise ValueError("resolution must lie in (0, 0.1]")
    k = int(round(1.0 / resolution))
    z = np.arange(1, k) / k
    h = h_profile(z, b, c, lam)
    i_best = int(np.argmax(h))
    sup_h, sup_z = float(h[i_best]), float(z[i_best])
    grid_sup = sup_h
    if refine:
        for i in np.argsort(h)[::-1][:top]:
            lo_z = z[max(i - 1, 0)]
            hi_z = z[min(i + 1, len(z) - 1)]
            zm, hm = _golden_max(lambda t: h_profile(t, b, c, lam), lo_z, hi_z, tol)
            if hm > sup_h:
                sup_h, sup_z = hm, zm
    return EtaEstimate(b=b, resolution=resolution, eta=-math.log2(sup_h), sup_h=sup_h,
                       sup_z=sup_z, grid_sup_h=grid_sup, z=z, h=h)


def _golden_max(fn, a, d, tol):
    x1 = d - _INV_PHI * (d - a)
    x2 = a + _INV_PHI * (d - a)
    f1, f2 = fn(x1), fn(x2)
    best = (x1, f1) if f1 >= f2 else (x2, f2)
    while d - a > tol:
        if f1 >= f2:
            d, x2, f2 = x2, x1, f1
            x1 = d - _INV_PHI * (d - a)
            f1 = fn(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INV_PHI * (d - a)
            f2 = fn(x2)
        for cand in ((x1, f1), (x2, f2)):
            if cand[1] > best[1]:
                best = cand
    return best


def speed_trace(energies):
    """Per-level speeds ``-log2(E_j / E_{j-1})`` and the average ``-log2(E_n) / n``."""
    e = np.asarray(energies, dtype=float)
    if e.ndim != 1 or e.size < 2:
        raise ValueError("need energies for levels 0..n with n >= 1")
    if np.any(e <= 0) or np.any(~np.isfinite(e)):
        raise ValueError("energies must be positive and finite")
    levels = -np.diff(np.log2(e))
    n = e.size - 1
    return levels, float(-math.log2(e[-1]) / n)


def mu_threshold(eta: float) -> float:
    """Smallest admissible scaling exponent, ``2 + log2 3 + 1/eta`` (exclusive)."""
    return 2.0 + math.log2(3.0) + 1.0 / eta
