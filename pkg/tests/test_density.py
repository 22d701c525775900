import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simot.errors import DimensionMismatch, NonProbability
from simot.line1d.density import (
    PiecewiseConstantDensity,
    PiecewiseMap,
    common_refinement,
    kolmogorov_distance,
    pushforward_cdf,
)

from generators import random_density


def test_validation():
    with pytest.raises(DimensionMismatch):
        PiecewiseConstantDensity([0, 1], [1, 2])
    with pytest.raises(DimensionMismatch):
        PiecewiseConstantDensity([0, 0.5, 0.5, 1], [1, 1, 1])
    with pytest.raises(NonProbability):
        PiecewiseConstantDensity([0, 1], [-1])


def test_cdf_and_masses():
    d = PiecewiseConstantDensity([0, 0.5, 1], [1.5, 0.5])
    assert d.mass == pytest.approx(1.0)
    assert d.cdf(0.25) == pytest.approx(0.375)
    assert d.mass_between(0.25, 0.75) == pytest.approx(0.375 + 0.125)
    np.testing.assert_allclose(d([0.1, 0.6, 2.0]), [1.5, 0.5, 0.0])


def test_quantile_pieces_skip_gaps():
    d = PiecewiseConstantDensity([0, 0.25, 0.5, 1], [2, 0, 1])
    pieces = d.quantile_pieces(0.0, 1.0)
    assert [(p[2], p[3]) for p in pieces] == [(0.0, 0.25), (0.5, 1.0)]
    assert pieces[0][1] == pytest.approx(0.5)


def test_common_refinement():
    a = PiecewiseConstantDensity([0, 0.5, 1], [1, 1])
    b = PiecewiseConstantDensity([0, 0.3, 1], [1, 1])
    np.testing.assert_allclose(common_refinement(a, b, extra=[0.7]), [0, 0.3, 0.5, 0.7, 1])


def test_identity_pushforward_of_lebesgue():
    t, F = pushforward_cdf(PiecewiseMap.identity(), PiecewiseConstantDensity.uniform(), 1000)
    assert kolmogorov_distance(F, t) < 1e-15


def test_zero_density_pushforward():
    zero = PiecewiseConstantDensity([0, 1], [0])
    t, F = pushforward_cdf(PiecewiseMap.from_endpoints([0, 0.5], [0.5, 1], [1, 0], [0.5, 0.2]), zero, 100)
    assert np.all(F == 0)


def test_constant_piece_is_a_jump():
    tmap = PiecewiseMap([0.0], [1.0], [0.0], [0.4])
    t, F = pushforward_cdf(tmap, PiecewiseConstantDensity.uniform(), t=[0.39, 0.4, 0.41])
    np.testing.assert_allclose(F, [0, 1, 1])


def test_resolution_floor():
    with pytest.raises(ValueError):
        pushforward_cdf(PiecewiseMap.identity(), PiecewiseConstantDensity.uniform(), 10)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_pushforward_matches_sampling(seed):
    """Exact interval preimages against a fine midpoint-rule estimate."""
    rng = np.random.default_rng(seed)
    d = random_density(rng)
    k = int(rng.integers(1, 5))
    edges = np.sort(np.concatenate([[0.0, 1.0], rng.uniform(0, 1, k - 1)]))
    y0, y1 = rng.uniform(0, 1, k), rng.uniform(0, 1, k)
    tmap = PiecewiseMap.from_endpoints(edges[:-1], edges[1:], y0, y1)
    t = np.linspace(0, 1, 101)
    _, F = pushforward_cdf(tmap, d, t=t)
    x = (np.arange(200_000) + 0.5) / 200_000
    w = d(x) / 200_000
    y = tmap(x)
    order = np.argsort(y)
    cum = np.concatenate([[0.0], np.cumsum(w[order])])
    est = cum[np.searchsorted(y[order], t, side="right")]
    assert kolmogorov_distance(F, est) < 5e-4
