"""Simultaneous transport of a measure family onto a fixed discrete target.

Variables are the plan entries ``pi_kj`` (row-major, index ``k*l + j``).
Constraints, in row order:

* ``m`` source rows:   ``sum_j pi_kj = mu^k``
* ``l`` target rows:   ``sum_k pi_kj = nu^j``
* ``(n-1) l`` mixing rows: ``sum_k pi_kj (r_i^k - 1) = 0`` for ``i < n``

The ``n``-th mixing row of each column is implied by the others because the
ratios average to one, so it is left out.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from . import lp as lpe
from .errors import DimensionMismatch, InternalInfeasible, NonProbability
from .measure import (
    SQUARED_EUCLIDEAN,
    CostSpec,
    DiscreteMeasure,
    MeasureFamily,
    TransportPlan,
    cost_matrix,
)


@dataclass(frozen=True)
class SOTInstance:
    family: MeasureFamily
    target: DiscreteMeasure
    cost: CostSpec = SQUARED_EUCLIDEAN
    exact_target_weights: tuple = ()  # optional rational weights for the exact LP

    def __post_init__(self):
        if not self.target.is_probability():
            raise NonProbability(f"target has mass {self.target.mass:.17g}")
        if self.target.dim != self.family.dim and isinstance(self.cost, str):
            raise DimensionMismatch(f"target dimension {self.target.dim} != support dimension {self.family.dim}")
        c = self.cost_matrix()
        if not np.all(np.isfinite(c)) or c.min() < 0:
            raise ValueError("cost matrix must be finite and nonnegative")

    def cost_matrix(self) -> np.ndarray:
        return cost_matrix(self.family.support, self.target.points, self.cost)


@dataclass(frozen=True)
class DualPotentials:
    phi: np.ndarray  # (m,)
    psi: np.ndarray  # (n, l)
    objective: float

    def constraint_slack(self, family: MeasureFamily, costs: np.ndarray) -> np.ndarray:
        """``c_kj - phi_k - sum_i r_i^k psi_ij``; nonnegative for dual-feasible potentials."""
        return costs - self.phi[:, None] - family.ratios.T @ self.psi


@dataclass(frozen=True)
class FixedTargetResult:
    plan: TransportPlan
    cost: float
    solution: lpe.LPSolution

    def __iter__(self):
        # allows ``plan, cost = solve_fixed(...)``
        return iter((self.plan, self.cost))


def _constraint_blocks(m: int, l: int, mixing: np.ndarray):
    """Sparse constraint matrix for the given ``(n-1, m)`` mixing coefficients."""
    N = m * l
    k_idx = np.repeat(np.arange(m), l)
    j_idx = np.tile(np.arange(l), m)
    var = np.arange(N)
    rows = [k_idx, m + j_idx]
    cols = [var, var]
    vals = [np.ones(N), np.ones(N)]
    for i, coeff in enumerate(mixing):
        rows.append(m + l + i * l + j_idx)
        cols.append(var)
        vals.append(coeff[k_idx])
    R = m + l + len(mixing) * l
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(R, N))


def build_sot_lp(instance: SOTInstance, exact: bool = False, sparse: bool = False) -> lpe.LinearProgram:
    fam, tgt = instance.family, instance.target
    m, l, n = fam.m, len(tgt.weights), fam.n
    costs = instance.cost_matrix().ravel()
    if not exact:
        A = _constraint_blocks(m, l, fam.ratios[: n - 1] - 1.0)
        b = np.concatenate([fam.mean_weights, tgt.weights, np.zeros((n - 1) * l)])
        return lpe.LinearProgram(costs, A if sparse else A.toarray(), b)

    ratios = fam.exact_ratios()
    mus = fam.exact_measures()
    mean = [sum(col) / n for col in zip(*mus)]
    F0 = Fraction(0)
    A = np.full((m + l + (n - 1) * l, m * l), F0, dtype=object)
    for k in range(m):
        for j in range(l):
            v = k * l + j
            A[k, v] = Fraction(1)
            A[m + j, v] = Fraction(1)
            for i in range(n - 1):
                A[m + l + i * l + j, v] = ratios[i][k] - 1
    tw = instance.exact_target_weights or tuple(tgt.weights)
    b = np.array(mean + [Fraction(w) for w in tw] + [F0] * ((n - 1) * l), dtype=object)
    c = np.array([Fraction(v) for v in costs], dtype=object)
    return lpe.LinearProgram(c, A, b)


def _solve_lp(instance: SOTInstance, exact: bool, method: str) -> lpe.LPSolution:
    if exact:
        sol = lpe.solve_exact(build_sot_lp(instance, exact=True))
    else:
        sol = lpe.solve(build_sot_lp(instance, sparse=(method == "highs")), method=method)
    if sol.status is not lpe.Status.OPTIMAL:
        raise InternalInfeasible(f"fixed-target LP returned {sol.status.value}; the product plan is always feasible")
    return sol


def solve_fixed(instance: SOTInstance, exact: bool = False, method: str = "simplex") -> FixedTargetResult:
    """Optimal simultaneous plan onto ``instance.target`` and its cost."""
    sol = _solve_lp(instance, exact, method)
    m, l = instance.family.m, len(instance.target.weights)
    matrix = sol.primal.reshape(m, l)
    cost = float(sol.objective)
    plan = TransportPlan(instance.family.support, instance.target.points, matrix, cost)
    return FixedTargetResult(plan, cost, sol)


def potentials_from_duals(instance: SOTInstance, dual: np.ndarray) -> DualPotentials:
    fam, tgt = instance.family, instance.target
    m, l, n = fam.m, len(tgt.weights), fam.n
    u = dual[:m]
    v = dual[m:m + l]
    w = dual[m + l:].reshape(n - 1, l) if n > 1 else np.zeros((0, l))
    # sum_i r_i psi_i = v + sum_{i<n} w_i (r_i - 1), using sum_i r_i = n
    a = (v - w.sum(axis=0)) / n
    psi = np.vstack([w + a, a[None, :]]) if n > 1 else a[None, :]
    objective = float(u @ fam.mean_weights + psi.sum(axis=0) @ tgt.weights)
    return DualPotentials(phi=np.asarray(u, dtype=float), psi=psi, objective=objective)


def dual_potentials(instance: SOTInstance, solution: lpe.LPSolution | None = None) -> DualPotentials:
    """Kantorovich-type potentials ``(phi, psi_1..psi_n)`` from the LP dual."""
    if solution is None:
        solution = _solve_lp(instance, exact=False, method="simplex")
    return potentials_from_duals(instance, solution.dual)


def classical_ot_cost(source: DiscreteMeasure, target: DiscreteMeasure, cost: CostSpec = SQUARED_EUCLIDEAN) -> float:
    """Plain two-marginal optimal transport cost (no mixing rows)."""
    m, l = len(source.weights), len(target.weights)
    A = _constraint_blocks(m, l, np.zeros((0, m))).toarray()
    b = np.concatenate([source.weights, target.weights])
    sol = lpe.solve(lpe.LinearProgram(cost_matrix(source.points, target.points, cost).ravel(), A, b))
    if not sol.optimal:
        raise InternalInfeasible(f"classical OT LP returned {sol.status.value}")
    return float(sol.objective)


def check_potentials(instance: SOTInstance, pot: DualPotentials) -> float:
    """Largest violation of ``phi_k + sum_i r_i^k psi_ij <= c_kj`` (zero when feasible)."""
    slack = pot.constraint_slack(instance.family, instance.cost_matrix())
    return float(max(0.0, -slack.min()))
