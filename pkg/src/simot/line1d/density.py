"""Piecewise-constant densities and piecewise-affine maps on an interval.

Both objects are exact: masses come from cumulative sums over cells, and
preimages of half-lines under an affine piece are intervals, so pushforward
CDFs are computed without quadrature error.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, NonProbability


@dataclass(frozen=True)
class PiecewiseConstantDensity:
    breakpoints: np.ndarray  # b_0 < ... < b_K
    values: np.ndarray  # K values, density per unit length

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float).ravel()
        v = np.asarray(self.values, dtype=float).ravel()
        if len(bp) < 2 or len(v) != len(bp) - 1:
            raise DimensionMismatch(f"{len(bp)} breakpoints need {len(bp) - 1} values, got {len(v)}")
        if np.any(np.diff(bp) <= 0):
            raise DimensionMismatch("breakpoints must be strictly increasing")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise NonProbability("density values must be finite and nonnegative")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", v)

    @classmethod
    def uniform(cls, lo: float = 0.0, hi: float = 1.0) -> "PiecewiseConstantDensity":
        return cls([lo, hi], [1.0 / (hi - lo)])

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def cell_masses(self) -> np.ndarray:
        return self.values * self.lengths

    @property
    def mass(self) -> float:
        return float(self.cell_masses.sum())

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def normalized(self) -> "PiecewiseConstantDensity":
        return PiecewiseConstantDensity(self.breakpoints, self.values / self.mass)

    def _cum(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.cell_masses)])

    def cdf(self, x) -> np.ndarray:
        """Mass of ``(-inf, x]``; exact since the CDF is piecewise linear."""
        return np.interp(x, self.breakpoints, self._cum())

    def mass_between(self, a, b) -> np.ndarray:
        return self.cdf(b) - self.cdf(a)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.breakpoints, x, side="right") - 1
        inside = (idx >= 0) & (idx < len(self.values))
        out = np.zeros_like(x)
        out[inside] = self.values[idx[inside]]
        return out

    def quantile_pieces(self, a: float, b: float) -> list[tuple[float, float, float, float]]:
        """Affine pieces ``(u0, u1, y0, y1)`` of the quantile function of the
        normalized restriction to ``[a, b]``; zero-density gaps are skipped."""
        cuts = np.concatenate([[a], self.breakpoints[(self.breakpoints > a) & (self.breakpoints < b)], [b]])
        masses = self.mass_between(cuts[:-1], cuts[1:])
        total = masses.sum()
        if total <= 0:
            return []
        u = np.concatenate([[0.0], np.cumsum(masses) / total])
        u[-1] = 1.0
        return [(u[i], u[i + 1], cuts[i], cuts[i + 1]) for i in range(len(masses)) if masses[i] > 0]


def common_refinement(*densities: PiecewiseConstantDensity, extra=()) -> np.ndarray:
    pts = np.concatenate([d.breakpoints for d in densities] + [np.asarray(extra, dtype=float).ravel()])
    pts = np.unique(pts)
    keep = np.concatenate([[True], np.diff(pts) > 1e-15])
    return pts[keep]


@dataclass(frozen=True)
class PiecewiseMap:
    """Map that is affine (``slope * x + intercept``) on each ``[lo, hi]`` piece."""

    lo: np.ndarray
    hi: np.ndarray
    slope: np.ndarray
    intercept: np.ndarray

    def __post_init__(self):
        arrs = [np.asarray(a, dtype=float).ravel() for a in (self.lo, self.hi, self.slope, self.intercept)]
        if len({len(a) for a in arrs}) != 1:
            raise DimensionMismatch("piece arrays must have equal length")
        order = np.argsort(arrs[0], kind="stable")
        for name, a in zip(("lo", "hi", "slope", "intercept"), arrs):
            object.__setattr__(self, name, a[order])

    @classmethod
    def from_endpoints(cls, x0, x1, y0, y1) -> "PiecewiseMap":
        x0, x1, y0, y1 = (np.asarray(a, dtype=float).ravel() for a in (x0, x1, y0, y1))
        slope = (y1 - y0) / (x1 - x0)
        return cls(x0, x1, slope, y0 - slope * x0)

    @classmethod
    def identity(cls, lo: float = 0.0, hi: float = 1.0) -> "PiecewiseMap":
        return cls([lo], [hi], [1.0], [0.0])

    def __len__(self) -> int:
        return len(self.lo)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.lo, x, side="right") - 1, 0, len(self.lo) - 1)
        return self.slope[idx] * x + self.intercept[idx]

    def coverage_gap(self, lo: float = 0.0, hi: float = 1.0) -> float:
        """Lebesgue measure of ``[lo, hi]`` not covered by any piece."""
        covered = np.clip(np.minimum(self.hi, hi) - np.maximum(self.lo, lo), 0.0, None).sum()
        return float((hi - lo) - covered)

    def table(self) -> np.ndarray:
        return np.column_stack([self.lo, self.hi, self.slope, self.intercept])


def pushforward_cdf(
    tmap: PiecewiseMap,
    density: PiecewiseConstantDensity,
    resolution: int = 10_000,
    t=None,
) -> tuple[np.ndarray, np.ndarray]:
    """CDF of ``density`` pushed through ``tmap``, sampled at ``resolution`` points of [0, 1].

    Each piece contributes the density mass of the interval
    ``{x in [lo, hi] : slope * x + intercept <= t}``.
    """
    if t is None:
        if resolution < 100:
            raise ValueError("resolution must be at least 100")
        t = np.linspace(0.0, 1.0, resolution)
    t = np.asarray(t, dtype=float)
    F = np.zeros_like(t)
    P = len(tmap)
    step = max(1, 2_000_000 // max(len(t), 1))
    for s in range(0, P, step):
        lo, hi = tmap.lo[s:s + step, None], tmap.hi[s:s + step, None]
        a, b = tmap.slope[s:s + step, None], tmap.intercept[s:s + step, None]
        flat = np.abs(a) < 1e-300
        with np.errstate(divide="ignore", invalid="ignore"):
            cut = np.where(flat, 0.0, (t[None, :] - b) / np.where(flat, 1.0, a))
        cut = np.clip(cut, lo, hi)
        F_lo, F_hi, F_cut = density.cdf(lo), density.cdf(hi), density.cdf(cut)
        up = np.where(a > 0, F_cut - F_lo, F_hi - F_cut)
        const = np.where(b <= t[None, :], F_hi - F_lo, 0.0)
        F += np.where(flat, const, up).sum(axis=0)
    return t, F


def kolmogorov_distance(F, G) -> float:
    return float(np.max(np.abs(np.asarray(F) - np.asarray(G))))
