import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simot.errors import EnumerationCapExceeded
from simot.fixed_target import SOTInstance, solve_fixed
from simot.free_target import enumerate_minimal_subsets, refine_targets, simplex_embed, solve_free
from simot.measure import DiscreteMeasure, TransportPlan, build_family, check_plan, plan_cost
from simot.oracles import brute_force_free_target

from generators import random_family, random_weights


@pytest.fixture
def two_point():
    return build_family([[0.0], [1.0]], [[0.75, 0.25], [0.25, 0.75]])


def test_embedding_examples(two_point):
    emb = simplex_embed(two_point)
    np.testing.assert_allclose(emb.points, [[0.75, 0.25], [0.25, 0.75]])
    same = simplex_embed(build_family([0.0, 1.0], [[0.4, 0.6]] * 2))
    np.testing.assert_allclose(same.points, 0.5)
    disjoint = simplex_embed(build_family([0.0, 1.0], [[1.0, 0.0], [0.0, 1.0]]))
    np.testing.assert_allclose(disjoint.points, np.eye(2))


def test_candidates_examples(two_point):
    cands = enumerate_minimal_subsets(simplex_embed(two_point), two_point.support)
    assert len(cands) == 1
    assert cands[0].indices == (0, 1)
    np.testing.assert_allclose(cands[0].weights, [0.5, 0.5])
    np.testing.assert_allclose(cands[0].barycenter, [0.5])

    same = build_family([0.0, 1.0, 2.0], [[0.2, 0.3, 0.5]] * 2)
    cands = enumerate_minimal_subsets(simplex_embed(same), same.support)
    assert [c.indices for c in cands] == [(0,), (1,), (2,)]


def test_collinear_images_give_only_straddling_pairs():
    # images at 0.8, 0.6 (above the center 0.5) and 0.3 (below) on the first coordinate
    mean = np.array([0.25, 0.25, 0.5])
    r1 = np.array([1.6, 1.2, 0.6])
    mu1 = r1 * mean
    mu1 /= mu1.sum()
    fam = build_family([0.0, 1.0, 2.0], [mu1, 2 * mean - mu1])
    emb = simplex_embed(fam)
    above = emb.points[:, 0] > 0.5
    cands = enumerate_minimal_subsets(emb, fam.support)
    got = sorted(c.indices for c in cands)
    expected = sorted(
        (a, b) for a, b in itertools.combinations(range(3), 2) if above[a] != above[b]
    )
    assert got == expected
    assert all(len(c.indices) < 3 for c in cands)


def test_enumeration_cap():
    rng = np.random.default_rng(0)
    fam = random_family(rng, m=12, n=2)
    with pytest.raises(EnumerationCapExceeded):
        enumerate_minimal_subsets(simplex_embed(fam), fam.support, cap=10)


def test_two_point_free_target(two_point):
    target, plan, cost = solve_free(two_point)
    assert cost == pytest.approx(0.25)
    np.testing.assert_allclose(target.points, [[0.5]])
    bf_cost, bf_target, _ = brute_force_free_target(two_point, np.linspace(0, 1, 101))
    assert abs(bf_cost - cost) <= 1e-6
    np.testing.assert_allclose(bf_target.points, [[0.5]], atol=1e-12)


def test_identical_measures_free_target_is_identity():
    fam = build_family([0.0, 1.0, 2.0], [[0.2, 0.3, 0.5]] * 2)
    target, plan, cost = solve_free(fam)
    assert cost == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(target.weights, [0.2, 0.3, 0.5])


def test_three_point_uniforms_match_grid():
    fam = build_family([0.0, 0.25, 0.5, 0.75, 1.0],
                       [[1 / 3, 1 / 3, 1 / 3, 0, 0], [0, 0, 1 / 3, 1 / 3, 1 / 3]])
    target, plan, cost = solve_free(fam)
    cands = enumerate_minimal_subsets(simplex_embed(fam), fam.support)
    grid = np.unique(np.concatenate([np.linspace(0, 1, 201), [c.barycenter[0] for c in cands]]))
    bf_cost, _, _ = brute_force_free_target(fam, grid)
    assert cost == pytest.approx(bf_cost, abs=2e-6)


def test_grid_missing_barycenters_is_worse(two_point):
    bf_cost, _, _ = brute_force_free_target(two_point, [0.0, 0.3, 0.7, 1.0])
    assert bf_cost > 0.25 + 1e-3


def test_refine_moves_target_to_barycenter(two_point):
    plan = TransportPlan(two_point.support, [[0.3]], [[0.5], [0.5]])
    assert plan_cost(plan) == pytest.approx(0.29)
    out = refine_targets(plan)
    np.testing.assert_allclose(out.target, [[0.5]])
    assert out.cost == pytest.approx(0.25)
    again = refine_targets(out)
    np.testing.assert_allclose(again.target, out.target)
    assert again.cost == pytest.approx(out.cost)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_barycenter_identity_and_candidate_sizes(seed):
    rng = np.random.default_rng(seed)
    fam = random_family(rng, n=int(rng.integers(2, 5)), sparse=True)
    emb = simplex_embed(fam)
    np.testing.assert_allclose(fam.mean_weights @ emb.points, emb.center, atol=1e-8)
    for c in enumerate_minimal_subsets(emb, fam.support):
        assert len(c.indices) <= fam.n
        np.testing.assert_allclose(c.weights @ emb.points[list(c.indices)], emb.center, atol=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_free_target_matches_grid_oracle(seed):
    rng = np.random.default_rng(seed)
    fam = random_family(rng, m=int(rng.integers(2, 7)))
    res = solve_free(fam)
    assert check_plan(res.plan, fam).feasible
    seeds = np.array([c.barycenter for c in res.candidates])
    bf_cost, _, _ = brute_force_free_target(fam, seeds)
    assert res.cost == pytest.approx(bf_cost, abs=2e-6)
    # the free optimum is never worse than sending to its own target as a fixed problem
    fixed = solve_fixed(SOTInstance(fam, res.target)).cost
    assert fixed == pytest.approx(res.cost, abs=1e-7)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_refine_never_increases_cost(seed):
    rng = np.random.default_rng(seed)
    fam = random_family(rng)
    l = int(rng.integers(1, 5))
    target = DiscreteMeasure(rng.normal(size=(l, fam.dim)), random_weights(rng, l))
    plan, cost = solve_fixed(SOTInstance(fam, target))
    out = refine_targets(plan)
    assert out.cost <= cost + 1e-12
    assert check_plan(out, fam).feasible
