"""Discrete measure families, transport plans, and the feasibility/cost primitives.

Every solver in the package works on a :class:`MeasureFamily`: ``n`` probability
vectors on one shared support, together with their mean and the density ratios
``r_i^k = mu_i^k / mu^k`` against that mean.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

from .errors import DimensionMismatch, EmptySupport, NonProbability, ZeroColumn

SQUARED_EUCLIDEAN = "sqeuclidean"
FREE = "free"

CostSpec = Union[str, np.ndarray]


@dataclass(frozen=True)
class Tolerances:
    mass: float = 1e-9
    feas: float = 1e-8
    geom: float = 1e-12
    gap: float = 1e-7
    hull: float = 1e-10
    cmp: float = 1e-6
    push: float = 1e-6
    split: float = 1e-7


DEFAULT_TOL = Tolerances()


def as_points(points) -> np.ndarray:
    """Coerce a point sequence to an ``(m, d)`` float array; scalars become 1-d points."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    elif arr.ndim != 2:
        raise DimensionMismatch(f"points must be 1-d or 2-d, got shape {arr.shape}")
    return arr


def _check_distinct(points: np.ndarray, tol: float) -> None:
    if len(points) < 2:
        return
    diff = np.abs(points[:, None, :] - points[None, :, :]).max(axis=2)
    np.fill_diagonal(diff, np.inf)
    if diff.min() <= tol:
        i, j = np.unravel_index(np.argmin(diff), diff.shape)
        raise DimensionMismatch(f"support points {i} and {j} coincide")


@dataclass(frozen=True)
class DiscreteMeasure:
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = as_points(self.points)
        w = np.asarray(self.weights, dtype=float).ravel()
        if len(pts) != len(w):
            raise DimensionMismatch(f"{len(pts)} points but {len(w)} weights")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise NonProbability("weights must be finite and nonnegative")
        _check_distinct(pts, DEFAULT_TOL.geom)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def is_probability(self, tol: float = DEFAULT_TOL.mass) -> bool:
        return abs(self.mass - 1.0) <= tol


def dirac(point, dim: int | None = None) -> DiscreteMeasure:
    pt = np.atleast_1d(np.asarray(point, dtype=float))
    return DiscreteMeasure(pt.reshape(1, -1), np.ones(1))


@dataclass(frozen=True)
class MeasureFamily:
    """``n`` probability measures on a shared finite support.

    ``raw_measures`` keeps the weights exactly as supplied (possibly
    :class:`~fractions.Fraction`) so that the exact LP path can rebuild the
    ratios without floating-point rounding.
    """

    support: np.ndarray
    measures: np.ndarray
    mean_weights: np.ndarray
    ratios: np.ndarray
    dropped: tuple = ()
    raw_measures: tuple = field(default=(), repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.measures.shape[0]

    @property
    def m(self) -> int:
        return self.support.shape[0]

    @property
    def dim(self) -> int:
        return self.support.shape[1]

    @property
    def mean(self) -> DiscreteMeasure:
        return DiscreteMeasure(self.support, self.mean_weights)

    def measure(self, i: int) -> DiscreteMeasure:
        return DiscreteMeasure(self.support, self.measures[i])

    def exact_measures(self) -> list[list[Fraction]]:
        """Weights as fractions: exact for Fraction/int/str input, binary-exact for floats."""
        return [[Fraction(w) for w in row] for row in self.raw_measures]

    def exact_ratios(self) -> list[list[Fraction]]:
        mus = self.exact_measures()
        n = len(mus)
        mean = [sum(col) / n for col in zip(*mus)]
        return [[mu[k] / mean[k] for k in range(len(mean))] for mu in mus]


def build_family(points, weight_vectors, tol: Tolerances = DEFAULT_TOL) -> MeasureFamily:
    """Assemble a :class:`MeasureFamily` and its density ratios.

    Support points carrying zero mass under every measure are dropped, since
    the ratios are undefined there; their indices are kept in ``dropped``.
    """
    pts = as_points(points)
    raw = [list(v) for v in weight_vectors]
    if len(raw) == 0:
        raise NonProbability("need at least one measure")
    m = len(pts)
    for i, v in enumerate(raw):
        if len(v) != m:
            raise DimensionMismatch(f"measure {i} has {len(v)} weights, support has {m} points")
    try:
        mus = np.array([[float(Fraction(w)) if isinstance(w, str) else float(w) for w in v] for v in raw])
    except (TypeError, ValueError) as exc:
        raise NonProbability(f"non-numeric weight: {exc}") from None
    if m == 0:
        raise EmptySupport("support is empty")
    for i, mu in enumerate(mus):
        if not np.all(np.isfinite(mu)) or np.any(mu < 0):
            raise NonProbability(f"measure {i} has negative or non-finite weights")
        if abs(mu.sum() - 1.0) > tol.mass:
            raise NonProbability(f"measure {i} has total mass {mu.sum():.17g}, expected 1")
    _check_distinct(pts, tol.geom)

    mean = mus.mean(axis=0)
    keep = mean > 0
    dropped = tuple(int(k) for k in np.flatnonzero(~keep))
    if not keep.any():
        raise EmptySupport("every support point has zero mean mass")
    if dropped:
        warnings.warn(f"dropping zero-mass support points {list(dropped)}", stacklevel=2)
    pts, mus, mean = pts[keep], mus[:, keep], mean[keep]
    raw = tuple(tuple(w for w, k in zip(v, keep) if k) for v in raw)
    ratios = mus / mean
    return MeasureFamily(pts, mus, mean, ratios, dropped, raw)


@dataclass(frozen=True)
class TransportPlan:
    source: np.ndarray
    target: np.ndarray
    matrix: np.ndarray
    cost: float | None = None

    def __post_init__(self):
        src, tgt = as_points(self.source), as_points(self.target)
        mat = np.asarray(self.matrix, dtype=float)
        if mat.ndim != 2 or mat.shape != (len(src), len(tgt)):
            raise DimensionMismatch(
                f"plan matrix shape {mat.shape} does not match {len(src)} sources x {len(tgt)} targets"
            )
        object.__setattr__(self, "source", src)
        object.__setattr__(self, "target", tgt)
        object.__setattr__(self, "matrix", mat)

    @property
    def column_mass(self) -> np.ndarray:
        return self.matrix.sum(axis=0)

    @property
    def row_mass(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    def target_measure(self) -> DiscreteMeasure:
        return DiscreteMeasure(self.target, np.clip(self.column_mass, 0.0, None))


def product_plan(family: MeasureFamily, target: DiscreteMeasure) -> TransportPlan:
    """The independent coupling ``mu (x) nu``; always feasible for the mixing constraints."""
    return TransportPlan(family.support, target.points, np.outer(family.mean_weights, target.weights))


@dataclass(frozen=True)
class FeasibilityReport:
    row_error: float
    column_error: float | None
    mixing_residual: float
    feasible: bool
    induced_target: np.ndarray
    negative_mass: float = 0.0


def mixing_residuals(plan: TransportPlan, family: MeasureFamily) -> np.ndarray:
    """``n x l`` array of ``sum_k pi_kj (r_i^k - 1)``; unnormalized so empty columns pass."""
    return (family.ratios - 1.0) @ plan.matrix


def check_plan(
    plan: TransportPlan,
    family: MeasureFamily,
    target: DiscreteMeasure | str = FREE,
    tol: Tolerances = DEFAULT_TOL,
) -> FeasibilityReport:
    if plan.matrix.shape[0] != family.m or plan.source.shape[1] != family.dim:
        raise DimensionMismatch(f"plan has {plan.matrix.shape[0]} rows, family support has {family.m} points")
    row_err = float(np.abs(plan.row_mass - family.mean_weights).max())
    col_err = None
    if not (isinstance(target, str) and target == FREE):
        if target.points.shape[0] != plan.matrix.shape[1]:
            raise DimensionMismatch(f"plan has {plan.matrix.shape[1]} columns, target has {len(target.weights)} atoms")
        col_err = float(np.abs(plan.column_mass - target.weights).max())
    mix = float(np.abs(mixing_residuals(plan, family)).max()) if plan.matrix.size else 0.0
    neg = float(max(0.0, -plan.matrix.min())) if plan.matrix.size else 0.0
    errs = [row_err, mix, neg] + ([col_err] if col_err is not None else [])
    return FeasibilityReport(
        row_error=row_err,
        column_error=col_err,
        mixing_residual=mix,
        feasible=all(e <= tol.feas for e in errs),
        induced_target=plan.column_mass,
        negative_mass=neg,
    )


def cost_matrix(source, target, cost: CostSpec = SQUARED_EUCLIDEAN) -> np.ndarray:
    src, tgt = as_points(source), as_points(target)
    if isinstance(cost, str):
        if cost != SQUARED_EUCLIDEAN:
            raise ValueError(f"unknown cost {cost!r}")
        diff = src[:, None, :] - tgt[None, :, :]
        return np.einsum("kjd,kjd->kj", diff, diff)
    c = np.asarray(cost, dtype=float)
    if c.shape != (len(src), len(tgt)):
        raise DimensionMismatch(f"cost matrix shape {c.shape}, expected {(len(src), len(tgt))}")
    return c


def plan_cost(plan: TransportPlan, cost: CostSpec = SQUARED_EUCLIDEAN) -> float:
    return float(np.sum(plan.matrix * cost_matrix(plan.source, plan.target, cost)))


def with_cost(plan: TransportPlan, cost: CostSpec = SQUARED_EUCLIDEAN) -> TransportPlan:
    return TransportPlan(plan.source, plan.target, plan.matrix, plan_cost(plan, cost))


def conditional_on_target(plan: TransportPlan, j: int, tol: float = 0.0) -> DiscreteMeasure:
    col = plan.matrix[:, j]
    mass = col.sum()
    if mass <= tol:
        raise ZeroColumn(f"column {j} carries no mass")
    return DiscreteMeasure(plan.source, np.clip(col, 0.0, None) / mass)


def barycentric_function(plan: TransportPlan, tol: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Mean source location ``g(y_j)`` of each nonempty column.

    Returns ``(targets, g)``, both ``(l', d)``; rows sorted by target coordinate
    when ``d == 1``.
    """
    mass = plan.column_mass
    nz = np.flatnonzero(mass > tol)
    g = (plan.matrix[:, nz].T @ plan.source) / mass[nz, None]
    targets = plan.target[nz]
    if plan.target.shape[1] == 1:
        order = np.argsort(targets[:, 0], kind="stable")
        targets, g = targets[order], g[order]
    return targets, g


def constancy_regions(family: MeasureFamily, tol: float = DEFAULT_TOL.geom) -> list[np.ndarray]:
    """Group support indices whose ratio vectors agree within ``tol``."""
    regions: list[list[int]] = []
    reps: list[np.ndarray] = []
    for k in range(family.m):
        r = family.ratios[:, k]
        for idx, rep in enumerate(reps):
            if np.abs(r - rep).max() <= tol:
                regions[idx].append(k)
                break
        else:
            reps.append(r)
            regions.append([k])
    return [np.array(g, dtype=int) for g in regions]


def merge_coincident(points: np.ndarray, matrix: np.ndarray, tol: float = DEFAULT_TOL.geom):
    """Merge target columns whose points coincide within ``tol`` by summing their mass."""
    keep_pts: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    for j in range(points.shape[0]):
        for idx, p in enumerate(keep_pts):
            if np.abs(points[j] - p).max() <= tol:
                cols[idx] = cols[idx] + matrix[:, j]
                break
        else:
            keep_pts.append(points[j])
            cols.append(matrix[:, j].copy())
    if not cols:
        return points[:0], matrix[:, :0]
    return np.array(keep_pts), np.column_stack(cols)
