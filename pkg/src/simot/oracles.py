"""Independent checks on solver output.

* competitor LPs for c-monotonicity of sampled sub-plans,
* explicit cycle enumeration for cyclic monotonicity per ratio-constancy region,
* potential recovery through a difference-constraint system (Bellman-Ford),
* the full free-marginal LP over a user grid as ground truth for ``solve_free``.
"""
from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import lp as lpe
from .errors import EmptySupport, InternalInfeasible, TooLarge
from .measure import (
    DEFAULT_TOL,
    SQUARED_EUCLIDEAN,
    CostSpec,
    DiscreteMeasure,
    MeasureFamily,
    Tolerances,
    TransportPlan,
    as_points,
    cost_matrix,
    merge_coincident,
)

BRUTE_FORCE_VARIABLE_CAP = 20_000


@dataclass(frozen=True)
class CompetitorReport:
    seed_index: int
    entries: tuple  # ((k, j), ...) sampled plan entries
    alpha: np.ndarray  # normalized masses on ``entries``
    alpha_cost: float
    competitor_cost: float
    passed: bool
    witness: np.ndarray | None = None  # (|K|, |J|) cheaper competitor on fail


def _competitor_lp(ratios: np.ndarray, costs: np.ndarray, alpha: np.ndarray) -> lpe.LinearProgram:
    """LP over ``alpha' >= 0`` on a ``K x J`` grid with the same ``r_i``-weighted marginals."""
    K, J = alpha.shape
    rows, rhs = [], []
    for r in ratios:  # r: (K,)
        w = r[:, None] * alpha
        for k in range(K):
            row = np.zeros((K, J))
            row[k, :] = r[k]
            rows.append(row.ravel())
            rhs.append(w[k].sum())
        for j in range(J):
            row = np.zeros((K, J))
            row[:, j] = r
            rows.append(row.ravel())
            rhs.append(w[:, j].sum())
    return lpe.LinearProgram(costs.ravel(), np.array(rows), np.array(rhs))


def check_c_monotone(
    plan: TransportPlan,
    family: MeasureFamily,
    samples: int = 64,
    support_size: int = 4,
    seed: int = 0,
    cost: CostSpec = SQUARED_EUCLIDEAN,
    threads: int = 1,
    tol: Tolerances = DEFAULT_TOL,
) -> list[CompetitorReport]:
    """Sample finite sub-plans and test them against their cheapest competitor.

    A sub-plan of an optimal plan can never be beaten by a competitor, since
    swapping it in would give a cheaper feasible plan.
    """
    if support_size > 8:
        raise ValueError("support_size is limited to 8")
    support = np.argwhere(plan.matrix > tol.feas)
    if len(support) == 0:
        raise EmptySupport("plan has no mass above tolerance")
    C = cost_matrix(plan.source, plan.target, cost)
    size = min(support_size, len(support))
    rng = np.random.default_rng(seed)
    picks = [np.sort(rng.choice(len(support), size=size, replace=False)) for _ in range(samples)]

    def run(s: int) -> CompetitorReport:
        entries = support[picks[s]]
        ks = np.unique(entries[:, 0])
        js = np.unique(entries[:, 1])
        alpha = np.zeros((len(ks), len(js)))
        for k, j in entries:
            alpha[np.searchsorted(ks, k), np.searchsorted(js, j)] = plan.matrix[k, j]
        alpha /= alpha.sum()
        sub_cost = C[np.ix_(ks, js)]
        a_cost = float((alpha * sub_cost).sum())
        sol = lpe.solve(_competitor_lp(family.ratios[:, ks], sub_cost, alpha))
        if not sol.optimal:
            raise InternalInfeasible(f"competitor LP returned {sol.status.value}; alpha itself is feasible")
        best = float(sol.objective)
        passed = a_cost <= best + tol.cmp
        return CompetitorReport(
            seed_index=s,
            entries=tuple((int(k), int(j)) for k, j in entries),
            alpha=alpha,
            alpha_cost=a_cost,
            competitor_cost=best,
            passed=passed,
            witness=None if passed else sol.primal.reshape(alpha.shape),
        )

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(run, range(samples)))
    return [run(s) for s in range(samples)]


@dataclass(frozen=True)
class CycleViolation:
    region: int
    pairs: tuple  # ((k, j), ...) in cycle order
    slack: float  # original cost minus shifted cost (> 0 means the shift is cheaper)


def support_pairs(plan: TransportPlan, sources: np.ndarray, tol: float = DEFAULT_TOL.feas) -> np.ndarray:
    sub = plan.matrix[sources]
    loc = np.argwhere(sub > tol)
    return np.column_stack([sources[loc[:, 0]], loc[:, 1]]) if len(loc) else np.zeros((0, 2), int)


def check_cyclic_monotonicity(
    plan: TransportPlan,
    regions: list[np.ndarray],
    max_cycle: int = 4,
    tol: Tolerances = DEFAULT_TOL,
) -> list[CycleViolation]:
    """Enumerate cycles of support pairs within each region and report cheaper shifts."""
    if max_cycle > 6:
        raise ValueError("max_cycle is limited to 6")
    out: list[CycleViolation] = []
    for r_idx, region in enumerate(regions):
        pairs = support_pairs(plan, np.asarray(region, dtype=int), tol.feas)
        x = plan.source[pairs[:, 0]]
        y = plan.target[pairs[:, 1]]
        P = len(pairs)
        if P < 2:
            continue
        # C[a, b] = |x_a - y_b|^2
        C = ((x[:, None, :] - y[None, :, :]) ** 2).sum(axis=2)
        for L in range(2, min(max_cycle, P) + 1):
            for combo in itertools.combinations(range(P), L):
                head, rest = combo[0], combo[1:]
                for perm in itertools.permutations(rest):
                    cyc = (head,) + perm
                    orig = sum(C[a, a] for a in cyc)
                    shifted = sum(C[cyc[(i + 1) % L], cyc[i]] for i in range(L))
                    if orig - shifted > tol.cmp:
                        out.append(CycleViolation(r_idx, tuple(tuple(int(v) for v in pairs[a]) for a in cyc),
                                                  float(orig - shifted)))
    return out


@dataclass(frozen=True)
class PotentialResult:
    feasible: bool
    values: np.ndarray | None  # potential at each pair's source point


def recover_potential(pairs_x, pairs_y, tol: float = DEFAULT_TOL.cmp) -> PotentialResult:
    """Convex potential values ``phi_a`` with ``y_a`` a subgradient at ``x_a``.

    Solves ``phi_b >= phi_a + <y_a, x_b - x_a>`` for all pairs by shortest
    paths; a negative cycle means no such potential exists.
    """
    x, y = as_points(pairs_x), as_points(pairs_y)
    P = len(x)
    if P <= 1:
        return PotentialResult(True, np.zeros(P))
    # difference constraints phi_a - phi_b <= <y_a, x_a - x_b> = w(b -> a)
    W = np.einsum("ad,abd->ab", y, x[:, None, :] - x[None, :, :]).T  # W[b, a]
    W = W + tol / P  # tolerance spread over the longest simple cycle
    dist = np.zeros(P)
    for _ in range(P):
        new = np.minimum(dist, (dist[:, None] + W).min(axis=0))
        if np.array_equal(new, dist):
            break
        dist = new
    else:
        if np.any((dist[:, None] + W).min(axis=0) < dist):
            return PotentialResult(False, None)
    return PotentialResult(True, dist)


def brute_force_free_target(
    family: MeasureFamily,
    grid,
    method: str = "simplex",
    cap: int = BRUTE_FORCE_VARIABLE_CAP,
) -> tuple[float, DiscreteMeasure, TransportPlan]:
    """Full free-marginal LP with target atoms restricted to ``grid``."""
    G = as_points(grid)
    m, n, g = family.m, family.n, len(G)
    if m * g > cap:
        raise TooLarge(f"{m}x{g} grid LP exceeds {cap} variables")
    N = m * g
    k_idx = np.repeat(np.arange(m), g)
    j_idx = np.tile(np.arange(g), m)
    A = np.zeros((m + (n - 1) * g, N))
    A[k_idx, np.arange(N)] = 1.0
    for i in range(n - 1):
        A[m + i * g + j_idx, np.arange(N)] = family.ratios[i, k_idx] - 1.0
    b = np.concatenate([family.mean_weights, np.zeros((n - 1) * g)])
    C = cost_matrix(family.support, G)
    sol = lpe.solve(lpe.LinearProgram(C.ravel(), A, b), method=method)
    if not sol.optimal:
        raise InternalInfeasible(f"grid free-marginal LP returned {sol.status.value}")
    mat = sol.primal.reshape(m, g)
    used = mat.sum(axis=0) > 0
    pts, mat = merge_coincident(G[used], mat[:, used])
    plan = TransportPlan(family.support, pts, mat, float(sol.objective))
    return float(sol.objective), plan.target_measure(), plan
