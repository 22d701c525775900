import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simot.errors import BadRange, NotOnUnitInterval
from simot.line1d.density import PiecewiseConstantDensity, kolmogorov_distance, pushforward_cdf
from simot.line1d.lyapunov import lyapunov_partition, lyapunov_split, lyapunov_transform

from generators import random_density

LAMBDA = PiecewiseConstantDensity.uniform()


def _pushforward_errors(tmap, nu, resolution=10_000):
    t, F_lam = pushforward_cdf(tmap, LAMBDA, resolution)
    _, F_nu = pushforward_cdf(tmap, nu.normalized(), resolution)
    return kolmogorov_distance(F_lam, t), kolmogorov_distance(F_nu, t)


def test_uniform_gives_identity():
    tmap = lyapunov_transform(LAMBDA)
    x = np.linspace(0, 1, 11)
    np.testing.assert_allclose(tmap(x), x)


def test_half_interval_example():
    nu = PiecewiseConstantDensity([0, 0.5, 1], [2, 0])
    tmap = lyapunov_transform(nu)
    assert tmap.slope.tolist() == [2.0, 2.0]
    assert tmap.intercept.tolist() == [0.0, -1.0]
    x = np.array([0.0, 0.25, 0.5 - 1e-12, 0.75, 1.0])
    np.testing.assert_allclose(tmap(x), [0.0, 0.5, 1.0 - 2e-12, 0.5, 1.0])


def test_uneven_density_passes_both_checks():
    nu = PiecewiseConstantDensity([0, 0.5, 1], [1.5, 0.5])
    assert max(_pushforward_errors(lyapunov_transform(nu), nu)) <= 1e-6


def test_rejects_other_domains():
    with pytest.raises(NotOnUnitInterval):
        lyapunov_transform(PiecewiseConstantDensity([0, 2], [0.5]))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_densities(seed):
    rng = np.random.default_rng(seed)
    nu = random_density(rng)
    tmap = lyapunov_transform(nu)
    assert tmap.coverage_gap() <= 1e-12
    assert max(_pushforward_errors(tmap, nu)) <= 1e-6


def test_split_full_and_half():
    mus = [PiecewiseConstantDensity([0, 0.3, 1], [2, 4 / 7]), LAMBDA]
    assert lyapunov_split(mus, PiecewiseConstantDensity([0, 1], [1.0])) == [(0.0, 1.0)]
    E = lyapunov_split(mus, PiecewiseConstantDensity([0, 1], [0.5]))
    np.testing.assert_allclose(E, [(0.0, 0.15), (0.3, 0.65)], rtol=0, atol=1e-15)
    for mu in mus:
        assert sum(mu.mass_between(a, b) for a, b in E) == pytest.approx(0.5)


def test_split_example_with_disjoint_halves():
    mu1 = PiecewiseConstantDensity([0, 0.5, 1], [2, 0])
    mu2 = PiecewiseConstantDensity([0, 0.5, 1], [0, 2])
    g = PiecewiseConstantDensity([0, 0.5, 1], [0.25, 0.75])
    E = lyapunov_split([mu1, mu2], g)
    assert sum(mu1.mass_between(a, b) for a, b in E) == pytest.approx(0.25)
    assert sum(mu2.mass_between(a, b) for a, b in E) == pytest.approx(0.75)


def test_split_range_check():
    with pytest.raises(BadRange):
        lyapunov_split([LAMBDA], PiecewiseConstantDensity([0, 1], [1.5]))


def _integral(g, mu):
    bp = np.union1d(g.breakpoints, mu.breakpoints)
    mids = 0.5 * (bp[:-1] + bp[1:])
    return float((g(mids) * mu(mids) * np.diff(bp)).sum())


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_split_random(seed):
    rng = np.random.default_rng(seed)
    mus = [random_density(rng) for _ in range(int(rng.integers(1, 5)))]
    g = random_density(rng)
    g = PiecewiseConstantDensity(g.breakpoints, rng.uniform(0, 1, len(g.values)))
    E = lyapunov_split(mus, g)
    for mu in mus:
        got = sum(mu.mass_between(a, b) for a, b in E)
        assert abs(got - _integral(g, mu)) <= 1e-7


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_partition_random(seed):
    rng = np.random.default_rng(seed)
    mus = [random_density(rng) for _ in range(3)]
    w = rng.dirichlet(np.ones(int(rng.integers(1, 5))))
    a, b = np.sort(rng.uniform(0, 1, 2))
    parts = lyapunov_partition(mus, w, [(a, b)])
    for mu in mus:
        total = mu.mass_between(a, b)
        for wk, part in zip(w, parts):
            assert abs(sum(mu.mass_between(x, y) for x, y in part) - wk * total) <= 1e-7
    # pieces are disjoint and tile the interval
    pieces = sorted(p for part in parts for p in part)
    assert sum(y - x for x, y in pieces) == pytest.approx(b - a)
    for (x0, y0), (x1, y1) in zip(pieces, pieces[1:]):
        assert y0 <= x1 + 1e-15
