"""Constructive Lyapunov-type results on the line.

``lyapunov_transform`` builds a Lebesgue-preserving map of [0, 1] that
flattens a piecewise-constant measure.  With ``rho`` the normalized density,
cells where ``rho > 1`` (excess) are paired with cells where ``rho < 1``
(deficit) at equal cumulative excess/deficit mass ``t``; both paired points
go to ``r(t)``, the Lebesgue length consumed on the two sides so far.
Cells with ``rho == 1`` are laid out after all paired mass, in order.

``lyapunov_split`` realizes a ``[0, 1]``-valued weight function ``g`` by a
set: on every cell where all densities and ``g`` are constant, the left
sub-interval of relative length ``g`` carries exactly ``g`` times the cell
mass of every measure.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import BadRange, NotOnUnitInterval
from .density import PiecewiseConstantDensity, PiecewiseMap, common_refinement

_CLASS_TOL = 1e-12


def lyapunov_transform(nu: PiecewiseConstantDensity) -> PiecewiseMap:
    bp = nu.breakpoints
    if abs(bp[0]) > 1e-12 or abs(bp[-1] - 1.0) > 1e-12:
        raise NotOnUnitInterval(f"density lives on [{bp[0]}, {bp[-1]}], expected [0, 1]")
    if nu.mass <= 0:
        raise NotOnUnitInterval("density has zero mass")
    rho = nu.values / nu.mass
    lo, hi = bp[:-1], bp[1:]
    plus = rho > 1 + _CLASS_TOL
    minus = rho < 1 - _CLASS_TOL

    e = rho[plus] - 1.0
    f = 1.0 - rho[minus]
    p_lo, p_len = lo[plus], (hi - lo)[plus]
    m_lo, m_len = lo[minus], (hi - lo)[minus]
    Tp = np.concatenate([[0.0], np.cumsum(e * p_len)])
    Tm = np.concatenate([[0.0], np.cumsum(f * m_len)])
    if Tp[-1] < 1e-14 or Tm[-1] < 1e-14:
        plus[:] = False
        minus[:] = False
        Tp = Tm = np.zeros(1)
    else:
        # excess and deficit balance for a normalized density; absorb roundoff
        f = f * (Tp[-1] / Tm[-1])
        Tm = np.concatenate([[0.0], np.cumsum(f * m_len)])
        Tm[-1] = Tp[-1]
    Lp = np.concatenate([[0.0], np.cumsum(p_len)])
    Lm = np.concatenate([[0.0], np.cumsum(m_len)])

    x0s, x1s, y0s, y1s = [], [], [], []
    if plus.any():
        tb = np.unique(np.concatenate([Tp, Tm]))
        tb = tb[np.concatenate([[True], np.diff(tb) > 1e-15 * Tp[-1]])]
        tb[-1] = Tp[-1]
        for t0, t1 in zip(tb[:-1], tb[1:]):
            mid = 0.5 * (t0 + t1)
            cp = min(np.searchsorted(Tp, mid, side="right") - 1, len(e) - 1)
            cm = min(np.searchsorted(Tm, mid, side="right") - 1, len(f) - 1)

            def side(t, lo_c, T_c, rate, L_c):
                return lo_c + (t - T_c) / rate, L_c + (t - T_c) / rate

            xp0, lp0 = side(t0, p_lo[cp], Tp[cp], e[cp], Lp[cp])
            xp1, lp1 = side(t1, p_lo[cp], Tp[cp], e[cp], Lp[cp])
            xm0, lm0 = side(t0, m_lo[cm], Tm[cm], f[cm], Lm[cm])
            xm1, lm1 = side(t1, m_lo[cm], Tm[cm], f[cm], Lm[cm])
            r0, r1 = lp0 + lm0, lp1 + lm1
            for a, b in ((xp0, xp1), (xm0, xm1)):
                if b > a:
                    x0s.append(a)
                    x1s.append(b)
                    y0s.append(r0)
                    y1s.append(r1)

    offset = Lp[-1] + Lm[-1]
    zero = ~(plus | minus)
    z_lo, z_len = lo[zero], (hi - lo)[zero]
    z_cum = np.concatenate([[0.0], np.cumsum(z_len)])
    for c in range(len(z_lo)):
        x0s.append(z_lo[c])
        x1s.append(z_lo[c] + z_len[c])
        y0s.append(offset + z_cum[c])
        y1s.append(offset + z_cum[c + 1])
    return PiecewiseMap.from_endpoints(x0s, x1s, y0s, y1s)


def _check_weight(g: PiecewiseConstantDensity) -> None:
    if g.values.min() < 0 or g.values.max() > 1:
        raise BadRange(f"g takes values in [{g.values.min()}, {g.values.max()}], expected [0, 1]")


def _merge(intervals: list[tuple[float, float]]) -> list[tuple[float, float]]:
    out: list[list[float]] = []
    for a, b in intervals:
        if b <= a:
            continue
        if out and abs(out[-1][1] - a) <= 1e-15:
            out[-1][1] = b
        else:
            out.append([a, b])
    return [(float(a), float(b)) for a, b in out]


def _cells_within(bp: np.ndarray, within) -> list[tuple[float, float]]:
    if within is None:
        return list(zip(bp[:-1], bp[1:]))
    cells = []
    for a, b in within:
        inner = bp[(bp > a) & (bp < b)]
        cuts = np.concatenate([[a], inner, [b]])
        cells.extend(zip(cuts[:-1], cuts[1:]))
    return cells


def lyapunov_split(
    densities: Sequence[PiecewiseConstantDensity],
    g: PiecewiseConstantDensity,
    within: Sequence[tuple[float, float]] | None = None,
    merge: bool = True,
) -> list[tuple[float, float]]:
    """Set ``E`` (sorted disjoint intervals) with ``mu_i(E) = int g dmu_i`` for every ``i``.

    ``g`` is a piecewise-constant function with values in [0, 1] (stored in a
    :class:`PiecewiseConstantDensity`).  With ``within``, everything is
    restricted to that union of intervals.
    """
    _check_weight(g)
    bp = common_refinement(g, *densities)
    lo, hi = g.domain
    bp = bp[(bp >= lo) & (bp <= hi)]
    out = []
    for a, b in _cells_within(bp, within):
        gv = float(g(np.array([0.5 * (a + b)]))[0])
        if gv > 0:
            out.append((float(a), float(a + gv * (b - a))) if gv < 1 else (float(a), float(b)))
    return _merge(out) if merge else out


def _subtract(within, removed) -> list[tuple[float, float]]:
    """Remove left sub-intervals ``removed`` (each starting at a cell start) from ``within``."""
    out = []
    rem = sorted(removed)
    for a, b in within:
        cur = a
        for ra, rb in rem:
            if rb <= cur or ra >= b:
                continue
            if ra > cur:
                out.append((cur, ra))
            cur = max(cur, rb)
        if cur < b:
            out.append((cur, b))
    return out


def lyapunov_partition(
    densities: Sequence[PiecewiseConstantDensity],
    weights: Sequence[float],
    within: Sequence[tuple[float, float]],
) -> list[list[tuple[float, float]]]:
    """Split ``within`` into pieces ``X_k`` with ``mu_i(X_k) = weights[k] * mu_i(within)``.

    Applies :func:`lyapunov_split` inductively with the relative weight
    ``w_k / (1 - w_1 - ... - w_{k-1})`` on what is left.
    """
    w = np.asarray(weights, dtype=float)
    if w.min() < 0 or abs(w.sum() - 1.0) > 1e-9:
        raise BadRange("partition weights must be nonnegative and sum to 1")
    lo = min(a for a, _ in within)
    hi = max(b for _, b in within)
    remaining = list(within)
    used = 0.0
    parts = []
    for k, wk in enumerate(w):
        left = 1.0 - used
        rel = 1.0 if k == len(w) - 1 or left <= 0 else min(1.0, wk / left)
        g = PiecewiseConstantDensity([lo, hi], [rel])
        piece = lyapunov_split(densities, g, within=remaining, merge=False)
        parts.append(piece)
        remaining = _subtract(remaining, piece)
        used += wk
    return parts
