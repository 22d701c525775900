"""Command-line front end.

Every subcommand reads one problem file and writes one JSON result document
(to ``--output`` or stdout).  Exit codes: 0 success, 1 infeasible plan or
failed verification, 2 unreadable or invalid input.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import (
    BadRange,
    DimensionMismatch,
    EmptySupport,
    NonProbability,
    NotOnUnitInterval,
    ParseError,
    SOTError,
)
from .fixed_target import SOTInstance, check_potentials, dual_potentials, solve_fixed
from .free_target import solve_free
from .line1d.density import PiecewiseConstantDensity, kolmogorov_distance, pushforward_cdf
from .line1d.lyapunov import lyapunov_transform
from .line1d.mixing import extract_monge_map, monotone_mixing_1d
from .line1d.monge import monge_approx
from .measure import (
    DEFAULT_TOL,
    FREE,
    SQUARED_EUCLIDEAN,
    barycentric_function,
    check_plan,
    constancy_regions,
    cost_matrix,
)
from .oracles import (
    brute_force_free_target,
    check_c_monotone,
    check_cyclic_monotonicity,
    recover_potential,
    support_pairs,
)

log = logging.getLogger("simot")

INPUT_ERRORS = (ParseError, NonProbability, DimensionMismatch, EmptySupport, NotOnUnitInterval, BadRange)


def _tol(args):
    return DEFAULT_TOL if args.tol is None else dataclasses.replace(DEFAULT_TOL, feas=args.tol)


def _opt(args, prob, name, default=None):
    v = getattr(args, name, None)
    return prob.options.get(name, default) if v is None else v


def _need(prob, *fields):
    for f in fields:
        if getattr(prob, f) in (None, []):
            raise ParseError(f"problem file lacks '{f}'")


def _feasibility_doc(rep) -> dict:
    return {
        "feasible": rep.feasible,
        "row_error": rep.row_error,
        "column_error": rep.column_error,
        "mixing_residual": rep.mixing_residual,
        "negative_mass": rep.negative_mass,
    }


def _barycentric_table(args, plan, name="barycentric.csv"):
    if args.plot_dir and plan.target.shape[1] == 1:
        t, g = barycentric_function(plan, tol=DEFAULT_TOL.feas)
        io.write_curve(Path(args.plot_dir) / name, t[:, 0], g[:, 0])


def _instance(prob):
    _need(prob, "family", "target")
    cost = SQUARED_EUCLIDEAN if prob.cost is None else prob.cost
    return SOTInstance(prob.family, prob.target, cost, prob.exact_target_weights)


def cmd_solve_fixed(args, prob) -> dict:
    inst = _instance(prob)
    exact = bool(_opt(args, prob, "exact", False))
    res = solve_fixed(inst, exact=exact)
    pot = dual_potentials(inst, res.solution)
    rep = check_plan(res.plan, prob.family, prob.target, _tol(args))
    doc = {
        "command": "solve-fixed",
        "status": "ok" if rep.feasible else "infeasible",
        "cost": res.cost,
        "plan": io.plan_doc(res.plan),
        "potentials": {"phi": pot.phi, "psi": pot.psi, "objective": pot.objective,
                       "max_violation": check_potentials(inst, pot)},
        "duality_gap": abs(res.cost - pot.objective),
        "feasibility": _feasibility_doc(rep),
    }
    if exact:
        doc["exact_cost"] = res.solution.exact_objective
    _barycentric_table(args, res.plan)
    return doc


def _audit_grid(prob, res, n_grid):
    pts = prob.family.support
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    axes = [np.linspace(a, b, n_grid) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, pts.shape[1])
    seeds = np.array([c.barycenter for c in res.candidates])
    return np.unique(np.vstack([grid, seeds]), axis=0)


def cmd_solve_free(args, prob) -> dict:
    _need(prob, "family")
    tol = _tol(args)
    res = solve_free(prob.family, _opt(args, prob, "max_subset_size"), tol=tol)
    rep = check_plan(res.plan, prob.family, FREE, tol)
    doc = {
        "command": "solve-free",
        "status": "ok" if rep.feasible else "infeasible",
        "cost": res.cost,
        "target": io.measure_doc(res.target),
        "plan": io.plan_doc(res.plan),
        "candidates": [{"indices": list(c.indices), "weights": c.weights, "barycenter": c.barycenter,
                        "local_cost": c.local_cost} for c in res.candidates],
        "feasibility": _feasibility_doc(rep),
    }
    if args.audit:
        grid = _audit_grid(prob, res, _opt(args, prob, "grid", 21))
        bf_cost, _, _ = brute_force_free_target(prob.family, grid, method="highs")
        diff = bf_cost - res.cost
        doc["audit"] = {"grid_points": len(grid), "grid_cost": bf_cost, "difference": diff,
                        "agrees": abs(diff) <= tol.cmp}
        if abs(diff) > tol.cmp:
            doc["status"] = "violation"
    _barycentric_table(args, res.plan)
    return doc


def cmd_solve_1d(args, prob) -> dict:
    _need(prob, "family")
    tol = _tol(args)
    res = monotone_mixing_1d(prob.family, _opt(args, prob, "max_subset_size"), audit=True, tol=tol)
    rep = check_plan(res.plan, prob.family, FREE, tol)
    ext = extract_monge_map(res.plan, prob.family, tol)
    t, g = barycentric_function(res.plan, tol=tol.feas)
    doc = {
        "command": "solve-1d",
        "status": "ok" if rep.feasible else "infeasible",
        "cost": res.cost,
        "greedy_cost": res.greedy_cost,
        "reference_cost": res.reference_cost,
        "fallback_reason": res.fallback_reason,
        "target": io.measure_doc(res.target),
        "plan": io.plan_doc(res.plan),
        "barycentric_nondecreasing": bool(np.all(np.diff(g[:, 0]) >= -tol.feas)),
        "map": {"is_graph": ext.is_graph, "assignment": ext.assignment,
                "split_sources": {str(k): list(v) for k, v in ext.split_sources.items()},
                "pushforward_error": ext.pushforward_error},
        "feasibility": _feasibility_doc(rep),
    }
    _barycentric_table(args, res.plan)
    return doc


def _curves(args, tmap, densities, names, resolution=10_000):
    """Pushforward CDFs of ``densities`` through ``tmap`` (optionally as plot tables)."""
    out = {}
    for d, name in zip(densities, names):
        t, F = pushforward_cdf(tmap, d, resolution)
        out[name] = (t, F)
        if args.plot_dir:
            io.write_curve(Path(args.plot_dir) / f"{name}.csv", t, F)
    if args.plot_dir:
        x = np.linspace(0.0, 1.0, 1001)
        io.write_curve(Path(args.plot_dir) / "map.csv", x, tmap(x))
    return out


def cmd_lyapunov_map(args, prob) -> dict:
    _need(prob, "target_density")
    nu = prob.target_density
    tmap = lyapunov_transform(nu)
    lam = PiecewiseConstantDensity.uniform()
    curves = _curves(args, tmap, [lam, nu.normalized()], ["pushforward_lebesgue", "pushforward_target"])
    t = curves["pushforward_lebesgue"][0]
    err_lam = kolmogorov_distance(curves["pushforward_lebesgue"][1], t)
    err_nu = kolmogorov_distance(curves["pushforward_target"][1], t)
    tol = _tol(args)
    ok = max(err_lam, err_nu, tmap.coverage_gap()) <= tol.push
    return {
        "command": "lyapunov-map",
        "status": "ok" if ok else "violation",
        "map": io.map_doc(tmap),
        "pushforward_error": {"lebesgue": err_lam, "target": err_nu},
        "coverage_gap": tmap.coverage_gap(),
    }


def cmd_monge_approx(args, prob) -> dict:
    _need(prob, "densities", "target_density")
    eps = _opt(args, prob, "epsilon")
    if eps is None:
        raise ParseError("monge-approx needs --epsilon or options.epsilon")
    tol = _tol(args)
    res = monge_approx(prob.densities, prob.target_density, float(eps), cells=_opt(args, prob, "grid"), tol=tol)
    names = [f"pushforward_{i}" for i in range(len(prob.densities))]
    if args.plot_dir:
        _curves(args, res.map, prob.densities, names)
    ok = max(res.pushforward_error) <= tol.push and res.gap <= eps + res.slack
    return {
        "command": "monge-approx",
        "status": "ok" if ok else "violation",
        "epsilon": float(eps),
        "cells": len(res.partition.target_edges) - 1,
        "map_cost": res.map_cost,
        "plan_cost": res.plan_cost,
        "gap": res.gap,
        "gap_bound": res.gap_bound,
        "slack": res.slack,
        "max_oscillation": res.max_oscillation,
        "pushforward_error": list(res.pushforward_error),
        "map": io.map_doc(res.map),
    }


def _plan_for(args, prob):
    if args.plan:
        return io.load_plan(args.plan, prob)
    if prob.plan is not None:
        return prob.plan
    return None


def cmd_verify(args, prob) -> dict:
    _need(prob, "family")
    plan = _plan_for(args, prob)
    if plan is None:
        raise ParseError("verify needs a plan (problem 'plan' entry or --plan)")
    rep = check_plan(plan, prob.family, prob.target if prob.target is not None else FREE, _tol(args))
    return {
        "command": "verify",
        "status": "ok" if rep.feasible else "infeasible",
        "feasibility": _feasibility_doc(rep),
        "induced_target": rep.induced_target,
        "cost": float((plan.matrix * _costs(prob, plan)).sum()),
    }


def _costs(prob, plan):
    if prob.cost is not None:
        return prob.cost
    return cost_matrix(plan.source, plan.target)


def cmd_oracle(args, prob) -> dict:
    _need(prob, "family")
    tol = _tol(args)
    plan = _plan_for(args, prob)
    free = prob.target is None
    if plan is None:
        plan = solve_free(prob.family, _opt(args, prob, "max_subset_size"), tol=tol).plan if free \
            else solve_fixed(_instance(prob)).plan
    cost = SQUARED_EUCLIDEAN if prob.cost is None else prob.cost
    reports = check_c_monotone(plan, prob.family, samples=64, seed=int(_opt(args, prob, "seed", 0)),
                               cost=cost, threads=args.threads or os.cpu_count() or 1, tol=tol)
    regions = constancy_regions(prob.family, tol.geom)
    violations = check_cyclic_monotonicity(plan, regions, max_cycle=4, tol=tol)
    potentials = []
    for region in regions:
        pairs = support_pairs(plan, region, tol.feas)
        pr = recover_potential(plan.source[pairs[:, 0]], plan.target[pairs[:, 1]], tol.cmp)
        potentials.append(pr.feasible)
    failed = [r.seed_index for r in reports if not r.passed]
    doc = {
        "command": "oracle",
        "c_monotone": {"samples": len(reports), "failed": failed,
                       "worst_excess": max(r.alpha_cost - r.competitor_cost for r in reports)},
        "cyclic": {"regions": len(regions), "violations": [
            {"region": v.region, "pairs": [list(p) for p in v.pairs], "slack": v.slack} for v in violations]},
        "potential_feasible": potentials,
    }
    if free and args.grid:
        pts = prob.family.support
        axes = [np.linspace(a, b, args.grid) for a, b in zip(pts.min(axis=0), pts.max(axis=0))]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, pts.shape[1])
        grid = np.unique(np.vstack([grid, plan.target]), axis=0)
        bf, _, _ = brute_force_free_target(prob.family, grid, method="highs")
        plan_c = float((plan.matrix * _costs(prob, plan)).sum())
        doc["brute_force"] = {"grid_cost": bf, "plan_cost": plan_c, "difference": plan_c - bf}
        if plan_c > bf + tol.cmp:
            failed.append("brute_force")
    bad = failed or violations or not all(potentials)
    doc["status"] = "violation" if bad else "ok"
    return doc


COMMANDS = {
    "solve-fixed": cmd_solve_fixed,
    "solve-free": cmd_solve_free,
    "solve-1d": cmd_solve_1d,
    "lyapunov-map": cmd_lyapunov_map,
    "monge-approx": cmd_monge_approx,
    "verify": cmd_verify,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simot", description="Simultaneous optimal transport solvers and checks.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("problem", help="problem file (JSON)")
        s.add_argument("--output", "-o", help="result document path (default: stdout)")
        s.add_argument("--tol", type=float, help="feasibility tolerance")
        s.add_argument("--exact", action="store_true", default=None, help="exact rational LP (solve-fixed)")
        s.add_argument("--grid", type=int, help="audit grid points per axis, or Monge cells")
        s.add_argument("--epsilon", type=float, help="Monge approximation accuracy")
        s.add_argument("--seed", type=int, help="sampling seed for oracle checks")
        s.add_argument("--max-subset-size", type=int, dest="max_subset_size")
        s.add_argument("--audit", action="store_true", help="cross-check solve-free on a full grid LP")
        s.add_argument("--threads", type=int, help="worker threads for oracle LPs (default: all cores)")
        s.add_argument("--plan", help="plan or result document to check (verify, oracle)")
        s.add_argument("--plot-dir", dest="plot_dir", help="directory for CSV plot tables")
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        prob = io.load_problem(args.problem, exact=bool(args.exact))
        doc = COMMANDS[args.command](args, prob)
    except INPUT_ERRORS as exc:
        _diagnostic(args, exc)
        return 2
    except SOTError as exc:
        _diagnostic(args, exc)
        return 1
    io.write_document(doc, args.output)
    return 0 if doc["status"] == "ok" else 1


def _diagnostic(args, exc) -> None:
    doc = {"command": args.command, "status": "error", "error": {"type": type(exc).__name__, "message": str(exc)}}
    sys.stderr.write(io.dumps(doc))
    if args.output:
        io.write_document(doc, args.output)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
