import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simot.errors import DimensionMismatch, GreedyStall, GreedyStallWarning
from simot.fixed_target import SOTInstance, solve_fixed
from simot.free_target import solve_free
from simot.line1d.mixing import extract_monge_map, monotone_mixing_1d
from simot.measure import DiscreteMeasure, barycentric_function, build_family, check_plan, product_plan
from simot.oracles import check_cyclic_monotonicity

from generators import random_family


def test_identical_measures():
    fam = build_family([0.0, 1.0, 2.5], [[0.2, 0.3, 0.5]] * 2)
    res = monotone_mixing_1d(fam)
    assert res.cost == pytest.approx(0.0, abs=1e-14)
    assert res.fallback_reason is None
    np.testing.assert_allclose(res.target.points[:, 0], fam.support[:, 0])


def test_two_point_family():
    fam = build_family([0.0, 1.0], [[0.75, 0.25], [0.25, 0.75]])
    target, plan, cost = monotone_mixing_1d(fam)
    assert cost == pytest.approx(0.25)
    np.testing.assert_allclose(target.points, [[0.5]])
    _, g = barycentric_function(plan)
    np.testing.assert_allclose(g, [[0.5]])


def test_crossing_ratio_four_points():
    fam = build_family([0.0, 1.0, 2.0, 3.0], [[0.5, 0.0, 0.5, 0.0], [0.0, 0.5, 0.0, 0.5]])
    res = monotone_mixing_1d(fam)
    assert res.fallback_reason is None
    assert res.cost == pytest.approx(solve_free(fam).cost, abs=1e-6)


def test_rejects_higher_dimension():
    fam = build_family([[0.0, 0.0], [1.0, 1.0]], [[0.75, 0.25], [0.25, 0.75]])
    with pytest.raises(DimensionMismatch):
        monotone_mixing_1d(fam)


def _mismatch_instance():
    rng = np.random.default_rng(0)
    for _ in range(500):
        m = int(rng.integers(3, 7))
        pts = np.sort(rng.choice(20, m, replace=False))[:, None] / 4
        fam = build_family(pts, rng.dirichlet(np.ones(m), size=int(rng.integers(2, 4))))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", GreedyStallWarning)
            if monotone_mixing_1d(fam).fallback_reason:
                return fam
    pytest.skip("no greedy mismatch found")


def test_mismatch_falls_back_loudly():
    fam = _mismatch_instance()
    with pytest.warns(GreedyStallWarning):
        res = monotone_mixing_1d(fam)
    assert res.stalled
    assert res.cost == pytest.approx(solve_free(fam).cost, abs=1e-9)
    if res.greedy_cost is not None:
        assert res.greedy_cost > res.cost + 1e-6
    with pytest.raises(GreedyStall):
        monotone_mixing_1d(fam, on_stall="raise")


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_never_a_silent_mismatch(seed):
    rng = np.random.default_rng(seed)
    fam = random_family(rng, d=1, m=int(rng.integers(2, 8)))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        res = monotone_mixing_1d(fam)
    ref = solve_free(fam).cost
    assert check_plan(res.plan, fam).feasible
    assert abs(res.cost - ref) <= 1e-6
    if res.greedy_cost is None or abs(res.greedy_cost - ref) > 1e-6:
        assert res.stalled
        assert any(issubclass(w.category, GreedyStallWarning) for w in caught)
    _, g = barycentric_function(res.plan, tol=1e-12)
    assert np.all(np.diff(g[:, 0]) >= -1e-9)


def test_extract_classical_monotone_map():
    fam = build_family([0.0, 1.0, 2.0], [[0.2, 0.3, 0.5]])
    target = DiscreteMeasure([0.5, 1.7, 3.0], [0.2, 0.3, 0.5])
    plan, _ = solve_fixed(SOTInstance(fam, target))
    ext = extract_monge_map(plan, fam)
    assert ext.is_graph
    np.testing.assert_allclose(ext.map_values()[:, 0], [0.5, 1.7, 3.0])
    assert ext.pushforward_error <= 1e-12


def test_extract_reports_split_product_plan():
    fam = build_family([0.0, 1.0], [[0.5, 0.5]])
    plan = product_plan(fam, DiscreteMeasure([0.0, 1.0], [0.5, 0.5]))
    ext = extract_monge_map(plan, fam)
    assert not ext.is_graph
    assert ext.split_sources == {0: (0, 1)}
    assert ext.pushforward_error is None


def test_extract_two_point_constant_map():
    fam = build_family([0.0, 1.0], [[0.75, 0.25], [0.25, 0.75]])
    _, plan, _ = solve_free(fam)
    ext = extract_monge_map(plan, fam)
    assert ext.is_graph
    np.testing.assert_allclose(ext.map_values(), [[0.5], [0.5]])
    assert ext.pushforward_error <= 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_region_supports_are_cyclically_monotone(seed):
    rng = np.random.default_rng(seed)
    fam = random_family(rng, d=1, m=int(rng.integers(2, 7)))
    l = int(rng.integers(1, 5))
    target = DiscreteMeasure(rng.normal(size=(l, 1)), rng.dirichlet(np.ones(l)))
    plan, _ = solve_fixed(SOTInstance(fam, target))
    ext = extract_monge_map(plan, fam)
    assert check_cyclic_monotonicity(plan, list(ext.regions)) == []
