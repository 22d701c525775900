"""Equality-form linear programming: ``min c.x  s.t.  A x = b,  x >= 0``.

The kernel is a two-phase primal simplex on a dense tableau.  The same code
runs on float arrays and on object arrays of :class:`~fractions.Fraction`;
the exact path always prices with Bland's rule, the float path prices with
Dantzig's rule and falls back to Bland's rule during degenerate stalls.

Redundant equality rows are never deleted: their artificial variable simply
stays basic at level zero with zero phase-2 cost, which keeps ``B^{-1}``
(the artificial columns of the tableau) valid for dual extraction.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from .errors import NumericalBreakdown, TooLarge


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        c = _as_vector(self.c)
        b = _as_vector(self.b)
        A = self.A if sp.issparse(self.A) else _as_matrix(self.A)
        if A.shape != (len(b), len(c)):
            raise ValueError(f"A has shape {A.shape}, expected {(len(b), len(c))}")
        if len(c) < 1 or len(b) < 1:
            raise ValueError("need at least one variable and one constraint")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    def dense_A(self) -> np.ndarray:
        return self.A.toarray() if sp.issparse(self.A) else self.A


def _has_fractions(arr) -> bool:
    return arr.dtype == object


def _as_vector(x) -> np.ndarray:
    arr = np.asarray(x)
    if arr.dtype != object:
        arr = arr.astype(float)
    return arr.ravel()


def _as_matrix(x) -> np.ndarray:
    arr = np.asarray(x)
    if arr.dtype != object:
        arr = arr.astype(float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    return arr


@dataclass(frozen=True)
class LPSolution:
    status: Status
    primal: np.ndarray | None
    dual: np.ndarray | None
    objective: float | None
    basis: tuple = ()
    certificate: np.ndarray | None = None
    redundant_rows: tuple = ()
    iterations: int = 0
    exact_primal: tuple | None = field(default=None, repr=False)
    exact_dual: tuple | None = field(default=None, repr=False)
    exact_objective: Fraction | None = None

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


def residuals(lp: LinearProgram, sol: LPSolution) -> dict:
    """Primal feasibility, sign, duality gap and complementary slackness residuals."""
    A = lp.dense_A().astype(float)
    c, b = lp.c.astype(float), lp.b.astype(float)
    x, y = sol.primal, sol.dual
    red = c - A.T @ y
    return {
        "primal": float(np.abs(A @ x - b).max()),
        "sign": float(max(0.0, -x.min())),
        "dual": float(max(0.0, -red.min())),
        "gap": float(abs(c @ x - b @ y)),
        "slackness": float(np.abs(x * red).max()),
    }


# --------------------------------------------------------------------------
# tableau simplex

_OPT_TOL = 1e-10
_PIV_TOL = 1e-9
_BREAKDOWN_TOL = 1e-13
_DEGENERATE_STREAK = 25


class _Tableau:
    def __init__(self, A, b, exact: bool):
        self.exact = exact
        R, N = A.shape
        self.R, self.N = R, N
        zero, one = (Fraction(0), Fraction(1)) if exact else (0.0, 1.0)
        dtype = object if exact else float
        T = np.empty((R, N + R + 1), dtype=dtype)
        T[:, :N] = A
        T[:, N:N + R] = zero
        for r in range(R):
            T[r, N + r] = one
        T[:, -1] = b
        self.T = T
        self.basis = list(range(N, N + R))
        self.iterations = 0
        self.zero = zero

    def pivot(self, p: int, q: int) -> None:
        T = self.T
        piv = T[p, q]
        T[p] = T[p] / piv
        col = T[:, q].copy()
        col[p] = self.zero
        T -= np.outer(col, T[p])
        if not self.exact:
            rhs = T[:, -1]
            rhs[np.abs(rhs) < 1e-13] = 0.0
        self.basis[p] = q
        self.iterations += 1

    def binv(self) -> np.ndarray:
        return self.T[:, self.N:self.N + self.R]

    def reduced_costs(self, cost) -> np.ndarray:
        cb = np.array([cost[j] for j in self.basis], dtype=object if self.exact else float)
        return cost - cb @ self.T[:, :-1], cb

    def run(self, cost, allowed: np.ndarray, max_iter: int) -> tuple[str, int | None]:
        """Iterate to optimality. Returns ('optimal', None) or ('unbounded', q)."""
        exact = self.exact
        opt_tol = 0 if exact else _OPT_TOL
        piv_tol = 0 if exact else _PIV_TOL
        streak = 0
        while True:
            if self.iterations > max_iter:
                raise NumericalBreakdown(f"simplex exceeded {max_iter} iterations")
            d, _ = self.reduced_costs(cost)
            cand = np.flatnonzero(allowed & (d < -opt_tol)) if not exact else np.array(
                [j for j in range(len(d)) if allowed[j] and d[j] < 0], dtype=int
            )
            if cand.size == 0:
                return "optimal", None
            if exact or streak >= _DEGENERATE_STREAK:
                q = int(cand[0])  # Bland: lowest index
            else:
                q = int(cand[np.argmin(d[cand].astype(float))])
            col = self.T[:, q]
            rhs = self.T[:, -1]
            if exact:
                rows = [r for r in range(self.R) if col[r] > 0]
            else:
                rows = list(np.flatnonzero(col > piv_tol))
                if not rows and np.any(col > _BREAKDOWN_TOL):
                    raise NumericalBreakdown(f"pivot column {q} has only entries below {piv_tol}")
            if not rows:
                return "unbounded", q
            ratios = [rhs[r] / col[r] for r in rows]
            best = min(ratios)
            slack = 0 if exact else 1e-12 * max(1.0, abs(float(best)))
            ties = [r for r, t in zip(rows, ratios) if t <= best + slack]
            p = min(ties, key=lambda r: self.basis[r])  # Bland tie-break on leaving index
            if best == 0 or (not exact and abs(float(best)) <= 1e-14):
                streak += 1
            else:
                streak = 0
            self.pivot(p, q)


def _preprocess(A, b, exact):
    """Flip rows to b >= 0; drop zero rows with zero rhs and exact duplicates."""
    R = A.shape[0]
    sign = np.ones(R, dtype=int)
    keep, dropped, seen = [], [], {}
    zero_rhs_conflict = None
    for r in range(R):
        row, rhs = A[r], b[r]
        if all(v == 0 for v in row):
            if rhs == 0:
                dropped.append(r)
                continue
            if zero_rhs_conflict is None:
                zero_rhs_conflict = r
            keep.append(r)
            continue
        key = (tuple(row.tolist()), rhs)
        if key in seen:
            dropped.append(r)
            continue
        seen[key] = r
        keep.append(r)
    for r in keep:
        if b[r] < 0:
            sign[r] = -1
    return keep, dropped, sign, zero_rhs_conflict


def _simplex(lp: LinearProgram, exact: bool, max_iter: int = 100_000) -> LPSolution:
    if exact:
        A = np.array([[Fraction(v) for v in row] for row in lp.dense_A()], dtype=object)
        b = np.array([Fraction(v) for v in lp.b], dtype=object)
        c = np.array([Fraction(v) for v in lp.c], dtype=object)
    else:
        A = lp.dense_A().astype(float)
        b, c = lp.b.astype(float), lp.c.astype(float)
    R0, N = A.shape
    keep, dropped, sign, conflict = _preprocess(A, b, exact)
    to_float = (lambda v: np.array([float(x) for x in v])) if exact else (lambda v: np.asarray(v, dtype=float))

    if conflict is not None:
        y = np.zeros(R0)
        y[conflict] = 1.0 if b[conflict] > 0 else -1.0
        return LPSolution(Status.INFEASIBLE, None, None, None, certificate=y, redundant_rows=tuple(dropped))

    As = A[keep] * sign[keep][:, None]
    bs = b[keep] * sign[keep]
    R = len(keep)
    tab = _Tableau(As, bs, exact)
    one, zero = (Fraction(1), Fraction(0)) if exact else (1.0, 0.0)

    # phase 1
    cost1 = np.array([zero] * N + [one] * R, dtype=object if exact else float)
    allowed = np.ones(N + R, dtype=bool)
    tab.run(cost1, allowed, max_iter)
    w = sum((tab.T[r, -1] for r in range(R) if tab.basis[r] >= N), zero)
    feas_tol = 0 if exact else 1e-9 * max(1.0, float(np.abs(to_float(bs)).max()))
    if w > feas_tol:
        cb = np.array([cost1[j] for j in tab.basis], dtype=object if exact else float)
        y_s = cb @ tab.binv()
        y = np.zeros(R0)
        y[keep] = to_float(y_s) * sign[keep]
        return LPSolution(Status.INFEASIBLE, None, None, None, certificate=y,
                          redundant_rows=tuple(dropped), iterations=tab.iterations)

    # drive zero-level artificials out of the basis where possible
    redundant = list(dropped)
    for r in range(R):
        if tab.basis[r] < N:
            continue
        row = tab.T[r, :N]
        if exact:
            cols = [j for j in range(N) if row[j] != 0]
        else:
            cols = list(np.flatnonzero(np.abs(row) > _PIV_TOL))
        if cols:
            tab.pivot(r, int(cols[0]))
        else:
            redundant.append(keep[r])

    # phase 2: artificials may not re-enter
    cost2 = np.concatenate([c, np.array([zero] * R, dtype=object if exact else float)])
    allowed = np.zeros(N + R, dtype=bool)
    allowed[:N] = True
    outcome, q = tab.run(cost2, allowed, max_iter)
    if outcome == "unbounded":
        ray = np.zeros(N)
        ray[q] = 1.0
        for r in range(R):
            if tab.basis[r] < N:
                ray[tab.basis[r]] = -float(tab.T[r, q])
        return LPSolution(Status.UNBOUNDED, None, None, None, certificate=ray,
                          redundant_rows=tuple(sorted(redundant)), iterations=tab.iterations)

    x = np.array([zero] * N, dtype=object if exact else float)
    for r in range(R):
        if tab.basis[r] < N:
            x[tab.basis[r]] = tab.T[r, -1]
    cb = np.array([cost2[j] for j in tab.basis], dtype=object if exact else float)
    y_s = cb @ tab.binv()
    y_full = np.array([zero] * R0, dtype=object if exact else float)
    for idx, r in enumerate(keep):
        y_full[r] = y_s[idx] * sign[r]
    obj = sum((c[j] * x[j] for j in range(N)), zero)
    if not exact:
        x = np.clip(x, 0.0, None)
    basis = tuple(int(j) for j in tab.basis if j < N)
    return LPSolution(
        Status.OPTIMAL,
        primal=to_float(x),
        dual=to_float(y_full),
        objective=float(obj),
        basis=basis,
        redundant_rows=tuple(sorted(redundant)),
        iterations=tab.iterations,
        exact_primal=tuple(x) if exact else None,
        exact_dual=tuple(y_full) if exact else None,
        exact_objective=obj if exact else None,
    )


def _solve_highs(lp: LinearProgram) -> LPSolution:
    from scipy.optimize import linprog

    res = linprog(lp.c.astype(float), A_eq=lp.A if sp.issparse(lp.A) else lp.A.astype(float),
                  b_eq=lp.b.astype(float), bounds=(0, None), method="highs",
                  options={"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10})
    if res.status == 2:
        return LPSolution(Status.INFEASIBLE, None, None, None)
    if res.status == 3:
        return LPSolution(Status.UNBOUNDED, None, None, None)
    if res.status != 0:
        raise NumericalBreakdown(f"HiGHS failed: {res.message}")
    x = np.clip(res.x, 0.0, None)
    basis = tuple(int(j) for j in np.flatnonzero(x > 1e-12))
    return LPSolution(Status.OPTIMAL, x, np.asarray(res.eqlin.marginals, dtype=float),
                      float(res.fun), basis=basis, iterations=int(res.nit))


_DENSE_CAP = 5_000_000


def solve(lp: LinearProgram, method: str = "simplex") -> LPSolution:
    """Solve in floating point.

    ``method="simplex"`` is the in-house dense tableau (deterministic basis,
    Farkas certificates); ``method="highs"`` hands sparse, large instances to
    HiGHS and returns primal/dual only.
    """
    if method == "highs":
        return _solve_highs(lp)
    if method != "simplex":
        raise ValueError(f"unknown method {method!r}")
    R, N = lp.shape
    if R * (N + R) > _DENSE_CAP:
        raise TooLarge(f"{R}x{N} tableau exceeds the dense cap; use method='highs'")
    return _simplex(lp, exact=False)


def solve_exact(lp: LinearProgram) -> LPSolution:
    """Rational simplex with Bland's rule; residuals are exactly zero."""
    return _simplex(lp, exact=True)


def vertex_enumerate(lp: LinearProgram, max_vertices: int = 10_000, tol: float = 1e-12) -> list[np.ndarray]:
    """All basic feasible solutions of a small LP, by brute force over column bases."""
    A = lp.dense_A().astype(float)
    b = lp.b.astype(float)
    R, N = A.shape
    if N > 24 or R > 16:
        raise TooLarge(f"vertex enumeration limited to N<=24, R<=16 (got N={N}, R={R})")
    rank = np.linalg.matrix_rank(A)
    if rank < np.linalg.matrix_rank(np.column_stack([A, b])):
        return []
    # independent row subset
    rows: list[int] = []
    for r in range(R):
        if np.linalg.matrix_rank(A[rows + [r]]) > len(rows):
            rows.append(r)
    Ar, br = A[rows], b[rows]
    vertices: list[np.ndarray] = []
    feas_tol = 1e-9
    combos = np.array(list(itertools.combinations(range(N), rank)), dtype=int) if rank else np.zeros((1, 0), int)
    for start in range(0, len(combos), 20_000):
        chunk = combos[start:start + 20_000]
        if rank == 0:
            xs = [np.zeros(N)]
        else:
            B = Ar[:, chunk].transpose(1, 0, 2)
            det = np.linalg.det(B)
            ok = np.abs(det) > 1e-10
            if not ok.any():
                continue
            sol = np.linalg.solve(B[ok], np.broadcast_to(br, (ok.sum(), rank))[..., None])[..., 0]
            xs = []
            for cols, xb in zip(chunk[ok], sol):
                x = np.zeros(N)
                x[cols] = xb
                xs.append(x)
        for x in xs:
            if x.min() < -feas_tol or np.abs(A @ x - b).max() > feas_tol:
                continue
            x = np.clip(x, 0.0, None)
            if any(np.abs(x - v).max() <= max(tol, 1e-10) for v in vertices):
                continue
            vertices.append(x)
            if len(vertices) > max_vertices:
                raise TooLarge(f"more than {max_vertices} vertices")
    return vertices
