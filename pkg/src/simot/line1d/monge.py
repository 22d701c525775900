"""Approximate simultaneous Monge maps on [0, 1] from an optimal plan.

Construction, for a resolution of ``N`` cells:

* source cells ``A_i`` refine a uniform grid by every source breakpoint, so
  all ratios are constant on each cell; target cells ``B_k`` are uniform;
* the discrete problem uses the *cell-minimum* cost.  Any continuous
  feasible plan aggregates to a feasible discrete plan, so its optimum ``L``
  is a lower bound for the continuous Kantorovich value;
* ``A_i`` is split into ``X_i^k`` with ``mu_j(X_i^k) = pi_ik / mu(A_i) * mu_j(A_i)``
  (inductive Lyapunov split), and each constant-density piece of ``X_i^k`` is
  sent onto ``B_k`` through the quantile function of ``nu`` restricted to ``B_k``.

The map pushes every ``mu_j`` to ``nu`` and its cost is at most
``L + sum_ik pi_ik * osc_ik``, where ``osc`` is the cost oscillation on
``A_i x B_k``; that oscillation is required to stay below ``epsilon`` on the
plan support.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from ..errors import DimensionMismatch, NonProbability, NumericalBreakdown, ResolutionTooCoarse
from ..fixed_target import SOTInstance, solve_fixed
from ..measure import DEFAULT_TOL, DiscreteMeasure, MeasureFamily, Tolerances, TransportPlan
from .density import PiecewiseConstantDensity, PiecewiseMap, common_refinement, kolmogorov_distance, pushforward_cdf
from .lyapunov import lyapunov_partition

log = logging.getLogger(__name__)

MAX_CELLS = 1600
_GL3 = np.polynomial.legendre.leggauss(3)
_GL8 = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class MongeCell:
    source_cell: int
    target_cell: int
    source_set: tuple  # ((a, b), ...) intervals of X_i^k
    target_box: tuple  # (b0, b1)
    mass: float


@dataclass(frozen=True)
class MongePartition:
    cells: tuple
    epsilon: float
    source_edges: np.ndarray
    target_edges: np.ndarray


@dataclass(frozen=True)
class MongeApproxResult:
    map: PiecewiseMap
    map_cost: float
    plan: TransportPlan  # discrete plan over cell midpoints
    plan_cost: float  # lower bound for the continuous Kantorovich value
    gap_bound: float  # sum of plan mass times cost oscillation
    max_oscillation: float
    partition: MongePartition
    pushforward_error: tuple = ()

    @property
    def gap(self) -> float:
        return self.map_cost - self.plan_cost

    @property
    def slack(self) -> float:
        """Excess of the realized gap over the oscillation bound (numerical error only)."""
        return max(0.0, self.gap - self.gap_bound)

    def __iter__(self):
        return iter((self.map, self.map_cost))


def _box_costs(src_edges, tgt_edges, cost: Callable | None):
    a0, a1 = src_edges[:-1, None], src_edges[1:, None]
    b0, b1 = tgt_edges[None, :-1], tgt_edges[None, 1:]
    if cost is None:
        s_lo, s_hi = a0 - b1, a1 - b0
        c_hi = np.maximum(s_lo ** 2, s_hi ** 2)
        c_lo = np.where((s_lo <= 0) & (s_hi >= 0), 0.0, np.minimum(s_lo ** 2, s_hi ** 2))
        return c_lo, c_hi
    # sampled box extrema for a general continuous cost (not a rigorous bound)
    u = np.linspace(0.0, 1.0, 5)
    vals = []
    for s in u:
        for t in u:
            vals.append(cost(a0 + s * (a1 - a0), b0 + t * (b1 - b0)))
    vals = np.array(vals)
    return vals.min(axis=0), vals.max(axis=0)


def _map_cost(tmap: PiecewiseMap, density: PiecewiseConstantDensity, cost: Callable | None) -> float:
    nodes, w = _GL3 if cost is None else _GL8
    bp = density.breakpoints
    total = 0.0
    for lo, hi, a, b in zip(tmap.lo, tmap.hi, tmap.slope, tmap.intercept):
        cuts = np.concatenate([[lo], bp[(bp > lo) & (bp < hi)], [hi]])
        for x0, x1 in zip(cuts[:-1], cuts[1:]):
            rho = density(np.array([0.5 * (x0 + x1)]))[0]
            if rho == 0:
                continue
            x = 0.5 * (x1 - x0) * nodes + 0.5 * (x1 + x0)
            y = a * x + b
            c = (x - y) ** 2 if cost is None else cost(x, y)
            total += rho * 0.5 * (x1 - x0) * float(w @ c)
    return total


def _monotone_support(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Support of the north-west corner (quantile) coupling of two mass vectors."""
    ca = np.cumsum(a) / a.sum()
    cb = np.cumsum(b) / b.sum()
    edges = np.unique(np.concatenate([[0.0], ca, cb]))
    mids = 0.5 * (edges[:-1] + edges[1:])
    rows = np.minimum(np.searchsorted(ca, mids), len(a) - 1)
    cols = np.minimum(np.searchsorted(cb, mids), len(b) - 1)
    return rows, cols


def _cell_matrix(ks, js, mixing, Ns, Nt, slacks: bool):
    """Constraint matrix of the cell LP restricted to columns ``(ks, js)``.

    With ``slacks``, every mixing row also gets a +1 and a -1 slack column.
    """
    N, q = len(ks), len(mixing)
    R = Ns + Nt + q * Nt
    rows = [ks, Ns + js] + [Ns + Nt + i * Nt + js for i in range(q)]
    vals = [np.ones(N), np.ones(N)] + [mixing[i, ks] for i in range(q)]
    cols = [np.arange(N)] * (2 + q)
    n_cols = N
    if slacks:
        slack_rows = np.arange(Ns + Nt, R)
        S = len(slack_rows)
        rows += [slack_rows, slack_rows]
        vals += [np.ones(S), -np.ones(S)]
        cols += [N + np.arange(S), N + S + np.arange(S)]
        n_cols = N + 2 * S
    return sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(R, n_cols))


def _highs(c, A, b):
    return linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs",
                   options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})


def _reduced_costs(costs, mixing, y):
    Ns, Nt = costs.shape
    u, v, w = y[:Ns], y[Ns:Ns + Nt], y[Ns + Nt:].reshape(len(mixing), Nt)
    return costs - u[:, None] - v[None, :] - mixing.T @ w


def _column_generation(ratios, mean, target, costs, seed=None, max_rounds: int = 500, tol: float = 1e-11):
    """Optimal plan and duals of the cell LP by delayed column generation.

    The restricted master starts from ``seed`` (if given) and the monotone
    couplings of every measure to the target, with penalized slacks on the
    mixing rows so it is always feasible.  Columns with negative reduced cost
    are priced in from the full grid until none is left and the slacks are
    empty.
    """
    Ns, Nt = costs.shape
    mixing = ratios[:-1] - 1.0
    b_eq = np.concatenate([mean, target, np.zeros(len(mixing) * Nt)])
    active = np.zeros((Ns, Nt), dtype=bool) if seed is None else seed.copy()
    for w in [mean] + [mean * r for r in ratios]:
        if w.sum() > 0:
            r, c = _monotone_support(w, target)
            active[r, c] = True
    penalty = 10.0 * (float(costs.max()) + 1.0)

    for _ in range(max_rounds):
        ks, js = np.nonzero(active)
        N = len(ks)
        A = _cell_matrix(ks, js, mixing, Ns, Nt, slacks=True)
        c = np.concatenate([costs[ks, js], np.full(A.shape[1] - N, penalty)])
        res = _highs(c, A, b_eq)
        if res.status != 0:
            raise NumericalBreakdown(f"HiGHS failed on the cell LP: {res.message}")
        y = res.eqlin.marginals
        reduced = _reduced_costs(costs, mixing, y)
        reduced[active] = np.inf
        if reduced.min() >= -tol:
            if res.x[N:].sum() <= 1e-12:
                P = np.zeros((Ns, Nt))
                P[ks, js] = res.x[:N]
                return P, y
            penalty *= 10.0
            continue
        # a handful of the most negative columns per source row and per target column
        kr, kc = min(4, Nt), min(4, Ns)
        best_r = np.argpartition(reduced, kr - 1, axis=1)[:, :kr]
        best_c = np.argpartition(reduced, kc - 1, axis=0)[:kc, :]
        r_idx = np.concatenate([np.repeat(np.arange(Ns), kr), best_c.ravel()])
        c_idx = np.concatenate([best_r.ravel(), np.tile(np.arange(Nt), kc)])
        neg = reduced[r_idx, c_idx] < -tol
        active[r_idx[neg], c_idx[neg]] = True
    raise NumericalBreakdown(f"column generation did not converge in {max_rounds} rounds")


def _tie_break(ratios, mean, target, costs, secondary, P, y, tol: float = 1e-9):
    """Among optimal cell plans, one with the least ``secondary`` cost.

    By complementary slackness the optimal face is the set of feasible plans
    supported on zero-reduced-cost columns, so a second LP over those columns
    keeps the primary optimum.  Returns ``P`` unchanged if that LP fails.
    """
    Ns, Nt = costs.shape
    mixing = ratios[:-1] - 1.0
    face = _reduced_costs(costs, mixing, y) <= tol * (1.0 + float(np.abs(costs).max()))
    face |= P > 0
    ks, js = np.nonzero(face)
    A = _cell_matrix(ks, js, mixing, Ns, Nt, slacks=False)
    res = _highs(secondary[ks, js], A, np.concatenate([mean, target, np.zeros(len(mixing) * Nt)]))
    if res.status != 0:
        return P
    Q = np.zeros((Ns, Nt))
    Q[ks, js] = np.clip(res.x, 0.0, None)
    if (Q * costs).sum() > (P * costs).sum() + tol:
        return P
    return Q


def _validate(family, target, tol):
    for d in list(family) + [target]:
        lo, hi = d.domain
        if abs(lo) > 1e-12 or abs(hi - 1.0) > 1e-12:
            raise DimensionMismatch(f"densities must live on [0, 1], got [{lo}, {hi}]")
        if abs(d.mass - 1.0) > tol.mass:
            raise NonProbability(f"density has mass {d.mass:.17g}")


def _discretize(family, target, n_cells):
    uniform = np.linspace(0.0, 1.0, n_cells + 1)
    src_edges = common_refinement(*family, extra=uniform)
    tgt_edges = uniform
    M = np.array([d.mass_between(src_edges[:-1], src_edges[1:]) for d in family])  # (n, Ns)
    V = target.mass_between(tgt_edges[:-1], tgt_edges[1:])
    return src_edges, tgt_edges, np.clip(M, 0.0, None), np.clip(V, 0.0, None)


def monge_approx(
    family: Sequence[PiecewiseConstantDensity],
    target: PiecewiseConstantDensity,
    epsilon: float,
    plan: TransportPlan | None = None,
    cells: int | None = None,
    cost: Callable | None = None,
    method: str = "colgen",
    verify: bool = True,
    resolution: int = 10_000,
    tol: Tolerances = DEFAULT_TOL,
) -> MongeApproxResult:
    """Map ``T`` with ``mu_j o T^-1 = nu`` for all ``j`` and cost within ``epsilon`` of optimal.

    ``cost`` is a vectorized ``c(x, y)``; the default is ``(x - y)**2``, for
    which the box extrema (and hence the lower bound) are exact.  Without
    ``cells`` the resolution starts at ``ceil(2 / epsilon)`` and doubles until
    the oscillation bound holds on the plan support.  ``plan`` may supply the
    discrete plan for a fixed ``cells`` value (rows: source cells with
    positive mass, columns: target cells with positive mass).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    family = list(family)
    _validate(family, target, tol)
    n_cells = cells or max(2, math.ceil(2.0 / epsilon))
    while True:
        result = _attempt(family, target, epsilon, plan, n_cells, cost, method, tol)
        if result is not None:
            break
        if cells is not None or plan is not None:
            raise ResolutionTooCoarse(f"{n_cells} cells cannot keep the cost oscillation below {epsilon}")
        n_cells *= 2
        if n_cells > MAX_CELLS:
            raise ResolutionTooCoarse(f"oscillation bound {epsilon} needs more than {MAX_CELLS} cells")
        log.info("refining Monge grid to %d cells", n_cells)

    if verify:
        errs = []
        _, G = pushforward_cdf(PiecewiseMap.identity(), target, resolution)
        for d in family:
            _, F = pushforward_cdf(result.map, d, resolution)
            errs.append(kolmogorov_distance(F, G))
        result = MongeApproxResult(**{**result.__dict__, "pushforward_error": tuple(errs)})
    return result


@dataclass(frozen=True)
class _CellGrid:
    src_edges: np.ndarray
    tgt_edges: np.ndarray
    src_keep: np.ndarray  # cells with positive mean mass
    tgt_keep: np.ndarray  # cells with positive target mass
    c_lo: np.ndarray
    c_hi: np.ndarray
    family: MeasureFamily  # discrete family on kept source cells
    target: DiscreteMeasure


def _cell_grid(family, target, n_cells, cost) -> _CellGrid:
    src_edges, tgt_edges, M, V = _discretize(family, target, n_cells)
    src_keep = np.flatnonzero(M.mean(axis=0) > 0)
    tgt_keep = np.flatnonzero(V > 0)
    c_lo, c_hi = _box_costs(src_edges, tgt_edges, cost)
    c_lo, c_hi = c_lo[np.ix_(src_keep, tgt_keep)], c_hi[np.ix_(src_keep, tgt_keep)]
    mids_s = 0.5 * (src_edges[:-1] + src_edges[1:])[src_keep]
    mids_t = 0.5 * (tgt_edges[:-1] + tgt_edges[1:])[tgt_keep]
    Mk = M[:, src_keep]
    mus = Mk / Mk.sum(axis=1, keepdims=True)
    mu_bar = mus.mean(axis=0)
    fam = MeasureFamily(support=mids_s[:, None], measures=mus, mean_weights=mu_bar, ratios=mus / mu_bar)
    nu = DiscreteMeasure(mids_t[:, None], V[tgt_keep] / V[tgt_keep].sum())
    return _CellGrid(src_edges, tgt_edges, src_keep, tgt_keep, c_lo, c_hi, fam, nu)


_COARSEST = 48


def _seed_from_coarse(grid: _CellGrid, coarse: _CellGrid, P: np.ndarray) -> np.ndarray:
    """Support of a coarse plan, dilated by one cell and lifted to ``grid``."""
    hit = np.zeros((len(coarse.src_edges) - 1, len(coarse.tgt_edges) - 1), dtype=bool)
    rows, cols = np.nonzero(P > 0)
    hit[coarse.src_keep[rows], coarse.tgt_keep[cols]] = True
    grown = hit.copy()
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            grown |= np.roll(np.roll(hit, di, axis=0), dj, axis=1)

    def parent(edges, coarse_edges, keep):
        mids = 0.5 * (edges[:-1] + edges[1:])[keep]
        return np.clip(np.searchsorted(coarse_edges, mids) - 1, 0, len(coarse_edges) - 2)
    ps = parent(grid.src_edges, coarse.src_edges, grid.src_keep)
    pt = parent(grid.tgt_edges, coarse.tgt_edges, grid.tgt_keep)
    return grown[np.ix_(ps, pt)]


def _multiscale_plan(family, target, n_cells, cost):
    """Cell LP solved by column generation, seeded from the half-resolution solution."""
    grid = _cell_grid(family, target, n_cells, cost)
    seed = None
    if n_cells > _COARSEST:
        coarse, Pc, _ = _multiscale_plan(family, target, n_cells // 2, cost)
        seed = _seed_from_coarse(grid, coarse, Pc)
    P, y = _column_generation(grid.family.ratios, grid.family.mean_weights, grid.target.weights, grid.c_lo, seed)
    return grid, P, y


def _attempt(family, target, epsilon, plan, n_cells, cost, method, tol) -> MongeApproxResult | None:
    if plan is None and method == "colgen":
        grid, P, y = _multiscale_plan(family, target, n_cells, cost)
    else:
        grid = _cell_grid(family, target, n_cells, cost)
    src_edges, tgt_edges, src_keep, tgt_keep = grid.src_edges, grid.tgt_edges, grid.src_keep, grid.tgt_keep
    c_lo, c_hi = grid.c_lo, grid.c_hi
    mids_s, mids_t = grid.family.support[:, 0], grid.target.points[:, 0]
    if plan is not None:
        P = np.asarray(plan.matrix, dtype=float)
        if P.shape != c_lo.shape:
            raise DimensionMismatch(f"plan shape {P.shape} does not match the {c_lo.shape} cell grid")
    elif method != "colgen":
        res = solve_fixed(SOTInstance(grid.family, grid.target, cost=c_lo), method=method)
        P, y = res.plan.matrix, res.solution.dual
    if plan is None:
        # prefer, among plans optimal for the lower cost, those closest to the diagonal
        xs, ys = mids_s[:, None], mids_t[None, :]
        c_mid = (xs - ys) ** 2 if cost is None else cost(xs, ys)
        P = _tie_break(grid.family.ratios, grid.family.mean_weights, grid.target.weights, c_lo, c_mid, P, y)
    P = np.where(P > 1e-15, P, 0.0)
    lower = float((P * c_lo).sum())
    osc = c_hi - c_lo
    support = P > tol.feas * 1e-3
    max_osc = float(osc[support].max()) if support.any() else 0.0
    if max_osc > epsilon * (1 + 1e-12):
        return None
    gap_bound = float((P * osc).sum())

    x0s, x1s, y0s, y1s = [], [], [], []
    cells_out = []
    for row, i in enumerate(src_keep):
        a, b = src_edges[i], src_edges[i + 1]
        ks = np.flatnonzero(P[row] > 0)
        g = P[row, ks] / P[row, ks].sum()
        parts = lyapunov_partition(family, g, [(a, b)])
        for col, piece in zip(ks, parts):
            k = tgt_keep[col]
            b0, b1 = tgt_edges[k], tgt_edges[k + 1]
            q = target.quantile_pieces(b0, b1)
            for p0, p1 in piece:
                if p1 <= p0:
                    continue
                for u0, u1, y0, y1 in q:
                    x0s.append(p0 + u0 * (p1 - p0))
                    x1s.append(p0 + u1 * (p1 - p0))
                    y0s.append(y0)
                    y1s.append(y1)
            cells_out.append(MongeCell(int(i), int(k), tuple(piece), (float(b0), float(b1)), float(P[row, col])))
    # null cells (no source mass at all) are mapped by the identity
    for i in np.setdiff1d(np.arange(len(src_edges) - 1), src_keep):
        x0s.append(src_edges[i])
        x1s.append(src_edges[i + 1])
        y0s.append(src_edges[i])
        y1s.append(src_edges[i + 1])
    x0s, x1s = np.array(x0s), np.array(x1s)
    keep = x1s > x0s
    tmap = PiecewiseMap.from_endpoints(x0s[keep], x1s[keep], np.array(y0s)[keep], np.array(y1s)[keep])

    bp = common_refinement(*family)
    mean_density = PiecewiseConstantDensity(bp, np.mean([d(0.5 * (bp[:-1] + bp[1:])) for d in family], axis=0))
    map_cost = _map_cost(tmap, mean_density, cost)
    disc_plan = TransportPlan(mids_s, mids_t, P, lower)
    return MongeApproxResult(
        map=tmap,
        map_cost=map_cost,
        plan=disc_plan,
        plan_cost=lower,
        gap_bound=gap_bound,
        max_oscillation=max_osc,
        partition=MongePartition(tuple(cells_out), epsilon, src_edges, tgt_edges),
    )
