"""Greedy optimal mixing on the line and map extraction from discrete plans."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatch, GreedyStall, GreedyStallWarning
from ..free_target import _assemble, enumerate_minimal_subsets, simplex_embed, solve_free
from ..measure import (
    DEFAULT_TOL,
    DiscreteMeasure,
    MeasureFamily,
    Tolerances,
    TransportPlan,
    check_plan,
    constancy_regions,
    plan_cost,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MonotoneMixingResult:
    target: DiscreteMeasure
    plan: TransportPlan
    cost: float
    greedy_cost: float | None  # None when the greedy pass stalled
    reference_cost: float | None  # solve_free optimum, when audited
    fallback_reason: str | None = None  # "stall" or "mismatch"

    @property
    def stalled(self) -> bool:
        return self.fallback_reason is not None

    def __iter__(self):
        return iter((self.target, self.plan, self.cost))


def _greedy_masses(candidates, mean: np.ndarray, tol: float) -> np.ndarray | None:
    """Mass per candidate, always taking the leftmost candidate that still fits."""
    remaining = mean.copy()
    scale = mean.sum()
    order = sorted(range(len(candidates)), key=lambda c: float(candidates[c].barycenter[0]))
    out = np.zeros(len(candidates))
    while remaining.max() > tol * scale:
        for c in order:
            cand = candidates[c]
            idx = list(cand.indices)
            if np.all(remaining[idx] > tol * scale):
                t = float(np.min(remaining[idx] / cand.weights))
                out[c] += t
                remaining[idx] -= t * cand.weights
                remaining[np.abs(remaining) <= tol * scale] = 0.0
                break
        else:
            return None
    return out


def monotone_mixing_1d(
    family: MeasureFamily,
    max_subset_size: int | None = None,
    audit: bool = True,
    on_stall: str = "fallback",
    tol: Tolerances = DEFAULT_TOL,
) -> MonotoneMixingResult:
    """Free-target plan on the line built by smallest-barycenter-first greedy.

    Candidate conditionals are taken in increasing barycenter order, each at
    the largest mass the remaining source mass allows.  With ``audit`` the
    result is compared against :func:`solve_free`; a stall or a cost
    mismatch above ``tol.cmp`` falls back to the LP optimum and emits a
    :class:`GreedyStallWarning` (``on_stall="raise"`` raises instead).
    """
    if family.dim != 1:
        raise DimensionMismatch(f"monotone mixing needs points on the line, got dimension {family.dim}")
    if on_stall not in ("fallback", "raise"):
        raise ValueError("on_stall must be 'fallback' or 'raise'")
    emb = simplex_embed(family, tol)
    cands = enumerate_minimal_subsets(emb, family.support, max_subset_size, tol=tol)
    masses = _greedy_masses(cands, family.mean_weights, tol.mass)

    greedy_plan = greedy_cost = None
    if masses is not None:
        greedy_plan = _assemble(family, cands, masses, tol)
        greedy_cost = plan_cost(greedy_plan)
        if not check_plan(greedy_plan, family, tol=tol).feasible:
            greedy_plan = None

    reason = None
    reference = None
    if greedy_plan is None:
        reason = "stall"
    elif audit:
        reference = solve_free(family, max_subset_size, tol=tol)
        if greedy_cost > reference.cost + tol.cmp:
            reason = "mismatch"

    if reason is None:
        plan = TransportPlan(greedy_plan.source, greedy_plan.target, greedy_plan.matrix, greedy_cost)
        return MonotoneMixingResult(plan.target_measure(), plan, greedy_cost, greedy_cost,
                                    None if reference is None else reference.cost)

    msg = (f"greedy mixing {reason}: greedy cost {greedy_cost}, "
           f"falling back to the reduced LP")
    if on_stall == "raise":
        raise GreedyStall(msg)
    warnings.warn(msg, GreedyStallWarning, stacklevel=2)
    if reference is None:
        reference = solve_free(family, max_subset_size, tol=tol)
    return MonotoneMixingResult(reference.target, reference.plan, reference.cost, greedy_cost,
                                reference.cost, reason)


@dataclass(frozen=True)
class MapExtraction:
    is_graph: bool
    assignment: np.ndarray  # target column per source point, -1 where the source is empty or split
    targets: np.ndarray  # (l, d) target points of the plan
    split_sources: dict  # region index -> tuple of split source indices
    pushforward_error: float | None  # max over i of |mu_i o T^-1 - nu|, None if not a graph
    regions: tuple

    def map_values(self) -> np.ndarray:
        """Image point of every source (NaN where no single image exists)."""
        out = np.full((len(self.assignment), self.targets.shape[1]), np.nan)
        ok = self.assignment >= 0
        out[ok] = self.targets[self.assignment[ok]]
        return out


def extract_monge_map(plan: TransportPlan, family: MeasureFamily, tol: Tolerances = DEFAULT_TOL) -> MapExtraction:
    """Read a map off ``plan`` if each source sends its mass to a single target.

    Mass below ``tol.feas`` per entry counts as leakage.  When the support is
    a graph, every ``mu_i`` is pushed through the map and compared against
    the plan's target marginal.
    """
    regions = tuple(constancy_regions(family, tol.geom))
    M = plan.matrix
    m = M.shape[0]
    assignment = np.full(m, -1, dtype=int)
    split: dict = {}
    for r_idx, region in enumerate(regions):
        bad = []
        for k in region:
            hits = np.flatnonzero(M[k] > tol.feas)
            if len(hits) == 1:
                assignment[k] = hits[0]
            elif len(hits) > 1:
                bad.append(int(k))
        if bad:
            split[r_idx] = tuple(bad)
    is_graph = not split
    err = None
    if is_graph:
        nu = plan.column_mass
        l = M.shape[1]
        ok = assignment >= 0
        err = 0.0
        for i in range(family.n):
            push = np.bincount(assignment[ok], weights=family.measures[i][ok], minlength=l)
            err = max(err, float(np.abs(push - nu).max()))
    return MapExtraction(is_graph, assignment, plan.target, split, err, regions)
