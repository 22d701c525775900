"""Optimal mixing: simultaneous transport when the target measure is free.

Pipeline:

1. embed each support point into the probability simplex via its scaled
   ratio vector ``psi(x_k) = r^k / n``; the mean-weighted average of the
   images is the simplex center;
2. enumerate the inclusion-minimal subsets (at most ``n`` points) whose
   images contain the center in their convex hull.  Each one is a candidate
   conditional, and the best place to send it is its weighted barycenter;
3. solve a small LP distributing the source mass over candidates, then
   assemble the plan with one target atom per used candidate.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from . import lp as lpe
from .errors import BarycenterIdentityViolated, EnumerationCapExceeded, InternalInfeasible, NoCandidate
from .measure import (
    DEFAULT_TOL,
    DiscreteMeasure,
    MeasureFamily,
    Tolerances,
    TransportPlan,
    check_plan,
    merge_coincident,
    plan_cost,
)

log = logging.getLogger(__name__)

ENUMERATION_CAP = 40
MAX_SUBSET_SIZE = 6


@dataclass(frozen=True)
class SimplexEmbedding:
    points: np.ndarray  # (m, n)
    weights: np.ndarray  # (m,)
    center: np.ndarray  # (n,)


@dataclass(frozen=True)
class MixingCandidate:
    indices: tuple
    weights: np.ndarray
    barycenter: np.ndarray
    local_cost: float


@dataclass(frozen=True)
class FreeTargetResult:
    target: DiscreteMeasure
    plan: TransportPlan
    cost: float
    candidates: tuple = ()
    audit: dict | None = None

    def __iter__(self):
        return iter((self.target, self.plan, self.cost))


def simplex_embed(family: MeasureFamily, tol: Tolerances = DEFAULT_TOL) -> SimplexEmbedding:
    n = family.n
    pts = family.ratios.T / n
    center = np.full(n, 1.0 / n)
    bary = family.mean_weights @ pts
    err = np.abs(bary - center).max()
    if err > tol.feas or np.abs(pts.sum(axis=1) - 1.0).max() > tol.feas:
        raise BarycenterIdentityViolated(f"embedded barycenter misses the simplex center by {err:.3g}")
    return SimplexEmbedding(pts, family.mean_weights.copy(), center)


def _hull_weights(images: np.ndarray, center: np.ndarray, tol: float) -> np.ndarray | None:
    """Convex weights placing ``center`` in the hull of ``images`` rows, or None."""
    s = images.shape[0]
    A = np.vstack([images.T, np.ones((1, s))])
    b = np.concatenate([center, [1.0]])
    sol = lpe.solve(lpe.LinearProgram(np.zeros(s), A, b))
    if not sol.optimal:
        return None
    w = sol.primal
    if np.abs(A @ w - b).max() > tol * 10 + 1e-12:
        return None
    return w


def enumerate_minimal_subsets(
    embedding: SimplexEmbedding,
    support: np.ndarray,
    max_size: int | None = None,
    cap: int = ENUMERATION_CAP,
    tol: Tolerances = DEFAULT_TOL,
) -> list[MixingCandidate]:
    """All inclusion-minimal point subsets whose simplex images surround the center.

    Subsets are visited by increasing size, so a feasible subset is minimal
    exactly when it contains no previously found candidate.
    """
    m, n = embedding.points.shape
    if max_size is None:
        max_size = n
    max_size = min(max_size, m)
    if m > cap:
        raise EnumerationCapExceeded(f"{m} support points exceed the enumeration cap {cap}")
    if max_size > MAX_SUBSET_SIZE:
        raise EnumerationCapExceeded(f"subset size {max_size} exceeds {MAX_SUBSET_SIZE}")
    pts, center = embedding.points, embedding.center
    lo_ok = pts <= center + tol.hull  # point can pull each coordinate down to the center
    hi_ok = pts >= center - tol.hull
    found: list[MixingCandidate] = []
    found_sets: list[frozenset] = []
    for size in range(1, max_size + 1):
        for subset in itertools.combinations(range(m), size):
            idx = list(subset)
            # bounding-box pruning: center must lie between coordinate-wise min and max
            if not (lo_ok[idx].any(axis=0).all() and hi_ok[idx].any(axis=0).all()):
                continue
            sset = frozenset(subset)
            if any(f <= sset for f in found_sets):
                continue
            w = _hull_weights(pts[idx], center, tol.hull)
            if w is None:
                continue
            if np.any(w <= tol.hull):
                # a proper sub-face already reaches the center; it was (or will be) found on its own
                continue
            w = w / w.sum()
            x = support[idx]
            bary = w @ x
            local = float(w @ ((x - bary) ** 2).sum(axis=1))
            found.append(MixingCandidate(subset, w, bary, local))
            found_sets.append(sset)
    if not found:
        raise NoCandidate("no subset surrounds the simplex center; the ratios are inconsistent")
    return found


def _assemble(family: MeasureFamily, candidates, mass: np.ndarray, tol: Tolerances):
    used = [(c, t) for c, t in zip(candidates, mass) if t > 0]
    pts = np.array([c.barycenter for c, _ in used]).reshape(len(used), family.dim)
    mat = np.zeros((family.m, len(used)))
    for j, (c, t) in enumerate(used):
        mat[list(c.indices), j] = t * c.weights
    pts, mat = merge_coincident(pts, mat, tol.geom)
    plan = TransportPlan(family.support, pts, mat)
    return plan


def solve_free(
    family: MeasureFamily,
    max_subset_size: int | None = None,
    audit_grid: np.ndarray | None = None,
    cap: int = ENUMERATION_CAP,
    tol: Tolerances = DEFAULT_TOL,
) -> FreeTargetResult:
    """Optimal free target, plan and squared-distance cost for ``family``.

    With ``audit_grid`` the full free-marginal LP over that grid is solved as
    well and the two optima are reported side by side.
    """
    emb = simplex_embed(family, tol)
    cands = enumerate_minimal_subsets(emb, family.support, max_subset_size, cap, tol)
    A = np.zeros((family.m, len(cands)))
    for c_idx, cand in enumerate(cands):
        A[list(cand.indices), c_idx] = cand.weights
    costs = np.array([c.local_cost for c in cands])
    sol = lpe.solve(lpe.LinearProgram(costs, A, family.mean_weights))
    if not sol.optimal:
        raise InternalInfeasible(f"reduced mixing LP returned {sol.status.value}")
    plan = _assemble(family, cands, sol.primal, tol)
    cost = plan_cost(plan)
    plan = TransportPlan(plan.source, plan.target, plan.matrix, cost)
    report = check_plan(plan, family, tol=tol)
    if not report.feasible:
        raise InternalInfeasible(f"assembled free-target plan is infeasible: {report}")
    audit = None
    if audit_grid is not None:
        from .oracles import brute_force_free_target

        bf_cost, _, _ = brute_force_free_target(family, audit_grid)
        audit = {"grid_cost": bf_cost, "reduced_cost": cost, "difference": bf_cost - cost}
        log.info("free-target audit: grid %.12g vs reduced %.12g", bf_cost, cost)
    return FreeTargetResult(plan.target_measure(), plan, cost, tuple(cands), audit)


def refine_targets(plan: TransportPlan, tol: Tolerances = DEFAULT_TOL) -> TransportPlan:
    """Move each target atom to the barycenter of its conditional.

    Conditionals are untouched, so mixing feasibility is preserved, and by the
    variance decomposition the squared cost cannot increase.
    """
    mass = plan.column_mass
    nz = mass > 0
    mat = plan.matrix[:, nz]
    bary = (mat.T @ plan.source) / mass[nz, None]
    pts, mat = merge_coincident(bary, mat, tol.geom)
    out = TransportPlan(plan.source, pts, mat)
    return TransportPlan(out.source, out.target, out.matrix, plan_cost(out))
