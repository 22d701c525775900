from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simot.fixed_target import (
    SOTInstance,
    build_sot_lp,
    check_potentials,
    classical_ot_cost,
    dual_potentials,
    solve_fixed,
)
from simot.measure import DiscreteMeasure, barycentric_function, build_family, check_plan, dirac, product_plan

from generators import random_family, random_weights


@pytest.fixture
def two_point():
    return build_family([[0.0], [1.0]], [[0.75, 0.25], [0.25, 0.75]])


def test_two_point_to_midpoint(two_point):
    inst = SOTInstance(two_point, dirac(0.5))
    plan, cost = solve_fixed(inst)
    assert cost == pytest.approx(0.25)
    np.testing.assert_allclose(plan.matrix, [[0.5], [0.5]])
    lp = build_sot_lp(inst)
    assert lp.shape == (4, 2)
    assert np.linalg.matrix_rank(lp.dense_A()) == 2


def test_two_point_to_uniform_is_product(two_point):
    target = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    plan, cost = solve_fixed(SOTInstance(two_point, target))
    assert cost == pytest.approx(0.5)
    np.testing.assert_allclose(plan.matrix, product_plan(two_point, target).matrix, atol=1e-12)


def test_exact_mode(two_point):
    res = solve_fixed(SOTInstance(two_point, dirac(0.5)), exact=True)
    assert res.solution.exact_objective == Fraction(1, 4)
    target = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
    assert solve_fixed(SOTInstance(two_point, target), exact=True).solution.exact_objective == Fraction(1, 2)


def test_identity_when_everything_coincides():
    fam = build_family([0.0, 1.0, 3.0], [[0.2, 0.3, 0.5]] * 2)
    plan, cost = solve_fixed(SOTInstance(fam, DiscreteMeasure(fam.support, [0.2, 0.3, 0.5])))
    assert cost == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(plan.matrix, np.diag([0.2, 0.3, 0.5]), atol=1e-12)


def test_single_measure_lp_is_classical(two_point):
    fam = build_family([0.0, 1.0], [[0.3, 0.7]])
    lp = build_sot_lp(SOTInstance(fam, DiscreteMeasure([0.0, 2.0], [0.5, 0.5])))
    assert lp.shape == (4, 4)  # no mixing rows


def test_dual_objective_two_point(two_point):
    inst = SOTInstance(two_point, dirac(0.5))
    pot = dual_potentials(inst)
    assert pot.objective == pytest.approx(0.25)
    assert check_potentials(inst, pot) <= 1e-9


def test_zero_cost_has_zero_potentials(two_point):
    inst = SOTInstance(two_point, DiscreteMeasure([0.0, 1.0], [0.5, 0.5]), cost=np.zeros((2, 2)))
    res = solve_fixed(inst)
    pot = dual_potentials(inst, res.solution)
    assert res.cost == 0.0 and pot.objective == pytest.approx(0.0, abs=1e-12)
    assert check_potentials(inst, pot) <= 1e-12


def _instance(rng, n=None):
    fam = random_family(rng, n=n, sparse=True)
    l = int(rng.integers(1, 6))
    return SOTInstance(fam, DiscreteMeasure(rng.normal(size=(l, fam.dim)), random_weights(rng, l)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_instances_certified(seed):
    rng = np.random.default_rng(seed)
    inst = _instance(rng)
    res = solve_fixed(inst)
    assert check_plan(res.plan, inst.family, inst.target).feasible
    pot = dual_potentials(inst, res.solution)
    assert abs(res.cost - pot.objective) <= 1e-7
    assert check_potentials(inst, pot) <= 1e-8
    # the mixing rows only shrink the feasible set
    assert res.cost >= classical_ot_cost(inst.family.mean, inst.target) - 1e-9
    hs = solve_fixed(inst, method="highs")
    assert hs.cost == pytest.approx(res.cost, abs=1e-7)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_identical_measures_reduce_to_classical(seed):
    rng = np.random.default_rng(seed)
    m, l = int(rng.integers(2, 7)), int(rng.integers(1, 6))
    mu = random_weights(rng, m)
    fam = build_family(rng.normal(size=(m, 1)), [mu] * int(rng.integers(1, 4)))
    target = DiscreteMeasure(rng.normal(size=(l, 1)), random_weights(rng, l))
    assert solve_fixed(SOTInstance(fam, target)).cost == pytest.approx(classical_ot_cost(fam.mean, target), abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_one_dimensional_optimal_plans_have_monotone_barycenters(seed):
    rng = np.random.default_rng(seed)
    fam = random_family(rng, d=1)
    l = int(rng.integers(1, 6))
    target = DiscreteMeasure(np.sort(rng.normal(size=l))[:, None], random_weights(rng, l))
    plan, _ = solve_fixed(SOTInstance(fam, target))
    _, g = barycentric_function(plan, tol=1e-12)
    assert np.all(np.diff(g[:, 0]) >= -1e-8)


def test_exact_rational_target():
    fam = build_family([0.0, 1.0, 2.0], [[Fraction(1, 10), Fraction(2, 10), Fraction(7, 10)],
                                        [Fraction(3, 10), Fraction(3, 10), Fraction(4, 10)]])
    tw = (Fraction(1, 10), Fraction(2, 10), Fraction(7, 10))
    inst = SOTInstance(fam, DiscreteMeasure([0.5, 1.0, 1.5], [float(w) for w in tw]), exact_target_weights=tw)
    ex = solve_fixed(inst, exact=True)
    fl = solve_fixed(inst)
    assert float(ex.solution.exact_objective) == pytest.approx(fl.cost, abs=1e-9)
