from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import poisson

from fkklob.errors import DomainError, InterpolationError
from fkklob.histogram import Histogram
from fkklob.pde import DensitySurface, FilterParams, OmegaGrid, TerminalCondition, solve_backward
from fkklob.pricemap import (
    PriceDensity,
    PriorSpec,
    moments,
    poisson_pmf,
    price_distribution,
    rescale_to_dollars,
)


def flat_surface(n_nodes=101, horizon=10.0, n_tau=11, shape=None):
    """Time-independent surface; uniform in omega by default."""
    g = OmegaGrid(n_nodes)
    row = np.ones(n_nodes) if shape is None else shape(g.nodes)
    row = row / g.mass(row)
    return DensitySurface(g, np.linspace(0.0, horizon, n_tau), np.tile(row, (n_tau, 1)))


@pytest.fixture(scope="module")
def solved():
    p = FilterParams(0.5, 1.0, 0.0, 25.0)
    return solve_backward(p, OmegaGrid(201), TerminalCondition(0.5, 0.5, 0.13, 0.38), 100)


# --- Poisson weights ----------------------------------------------------------


def test_pmf_examples():
    assert poisson_pmf(0, 0.3, 2.0) == pytest.approx(math.exp(-0.6), rel=1e-15)
    assert poisson_pmf(2, 0.5, 4.0) == pytest.approx(2 * math.exp(-2), rel=1e-14)
    assert poisson_pmf(2, 0.5, 4.0) == pytest.approx(0.27067, abs=1e-5)


def test_pmf_large_counts_do_not_overflow():
    vals = poisson_pmf(np.arange(2000), 3.0, 300.0)
    assert np.all(np.isfinite(vals))
    np.testing.assert_allclose(vals, poisson.pmf(np.arange(2000), 900.0), rtol=1e-9, atol=1e-300)


def test_pmf_rejects():
    for args in ((1, 0.0, 1.0), (1, 1.0, 0.0), (-1, 1.0, 1.0)):
        with pytest.raises(DomainError):
            poisson_pmf(*args)


@pytest.mark.parametrize("lam, theta, t", [(0.5, 0.1, 25.0), (0.25, 0.3, 2.0), (1.0, 0.0, 0.1)])
def test_prior_truncation(lam, theta, t):
    prior = PriorSpec.for_time(lam, theta, t)
    assert prior.patient_rate == pytest.approx(lam * (1 - 2 * theta))
    assert prior.tail_mass(t) < 1e-10
    # smallest such index
    smaller = PriorSpec(prior.patient_rate, prior.impatient_rate, max(prior.i_max - 1, 0))
    assert prior.i_max == 0 or smaller.tail_mass(t) >= 1e-10
    for rate in (prior.patient_rate, prior.impatient_rate):
        total = poisson_pmf(np.arange(prior.i_max + 1), rate, t).sum()
        assert total == pytest.approx(1.0, abs=1e-10)


def test_prior_rejects():
    with pytest.raises(DomainError):
        PriorSpec(0.0, 1.0, 3)
    with pytest.raises(DomainError):
        PriorSpec.for_time(1.0, 0.5, 1.0)


# --- price distribution -----------------------------------------------------------


@pytest.mark.parametrize("t", [1.0, 5.0, 12.5, 25.0])
def test_output_is_unit_density(solved, t):
    d = price_distribution(solved, PriorSpec.for_time(0.5, 0.1, t), t, 60)
    assert d.mass == pytest.approx(1.0, abs=1e-9)
    assert np.all(d.density >= 0)
    assert d.ticks[0] == 0 and d.ticks[-1] == 60


def test_time_outside_surface(solved):
    prior = PriorSpec.for_time(0.5, 0.1, 30.0)
    with pytest.raises(InterpolationError):
        price_distribution(solved, prior, 30.0, 60)
    with pytest.raises(InterpolationError):
        price_distribution(solved, prior, 0.0, 60)


def test_equal_rates_collapse_to_single_poisson(solved):
    t = 6.0
    prior = PriorSpec.for_time(0.5, 0.0, t)
    d = price_distribution(solved, prior, t, 60, renormalize=False)
    n = prior.i_max + 1
    want = poisson_pmf(np.arange(n), 0.5, t)
    np.testing.assert_allclose(d.density[:n], want, rtol=1e-12, atol=1e-300)
    assert np.all(d.density[n:] == 0.0)


def test_uniform_surface_blend():
    # the mean of a uniform density on [0, 1/2] is 1/4, so the blend is 25/75
    s = flat_surface()
    t = 4.0
    prior = PriorSpec.for_time(0.5, 0.2, t)
    d = price_distribution(s, prior, t, 40, renormalize=False)
    i = np.arange(prior.i_max + 1)
    want = 0.25 * poisson_pmf(i, prior.patient_rate, t) + 0.75 * poisson_pmf(i, 0.5, t)
    np.testing.assert_allclose(d.density[: len(i)], want, rtol=1e-12, atol=1e-300)


@pytest.mark.parametrize("k", [3, 8, 60])
def test_deficit_is_truncation_plus_clamping(k):
    s = flat_surface(shape=lambda w: np.exp(-((w - 0.3) / 0.05) ** 2))
    t = 10.0
    prior = PriorSpec.for_time(0.5, 0.1, t)
    d = price_distribution(s, prior, t, k, renormalize=False)
    assert 1.0 - d.raw_mass == pytest.approx(d.truncated_mass + d.clamped_mass, abs=1e-9)
    if k < prior.i_max:
        assert d.clamped_mass > 0


def test_linear_in_surface(solved):
    other = flat_surface(n_nodes=201, horizon=25.0, n_tau=101)
    mixed = DensitySurface(solved.grid, solved.tau, 0.3 * solved.values + 0.7 * other.values)
    t = 7.0
    prior = PriorSpec.for_time(0.5, 0.1, t)
    out = [price_distribution(s, prior, t, 60, renormalize=False).density for s in (solved, other, mixed)]
    np.testing.assert_allclose(out[2], 0.3 * out[0] + 0.7 * out[1], rtol=1e-12, atol=1e-300)


def test_buy_and_sell_sides_identical(solved):
    t = 10.0
    prior = PriorSpec.for_time(0.5, 0.1, t)
    d = price_distribution(solved, prior, t, 60)
    buy = rescale_to_dollars(d, 24.5, 0.01, side="buy")
    sell = rescale_to_dollars(d, 24.0, 0.01, side="sell")
    assert np.array_equal(buy.density, sell.density)
    again = price_distribution(solved, prior, t, 60)
    assert np.array_equal(again.density, d.density)


# --- moments ------------------------------------------------------------------


def test_moments_point_mass():
    d = PriceDensity(np.arange(11.0), np.eye(11)[4], 1.0)
    assert moments(d) == (4.0, 0.0)
    h = Histogram.uniform(9.5, 1.0, [0, 0, 3, 0])
    assert moments(h) == (12.0, 0.0)


def test_moments_uniform():
    x = np.linspace(0, 1, 2001)
    mean, std = moments(PriceDensity(x, np.ones_like(x), 1.0))
    assert mean == pytest.approx(0.5, abs=1e-12)
    assert std == pytest.approx(1 / math.sqrt(12), abs=1e-6)


def test_moments_two_points():
    h = Histogram.uniform(23.5, 1.0, [1.0, 1.0])
    assert moments(h) == pytest.approx((24.5, 0.5), abs=1e-12)


def test_moments_empty():
    with pytest.raises(ValueError):
        moments(PriceDensity(np.arange(3.0), np.zeros(3), 1.0))
    with pytest.raises(ValueError):
        moments(Histogram.uniform(0.0, 1.0, [0.0, 0.0]))


# --- dollar rescaling ----------------------------------------------------------------


def test_rescale_identity():
    d = PriceDensity(np.arange(5.0), [0.1, 0.2, 0.3, 0.2, 0.1], 2.0)
    r = rescale_to_dollars(d, 0.0, 1.0)
    np.testing.assert_array_equal(r.dollars, d.ticks)
    np.testing.assert_array_equal(r.density, d.density)


def test_rescale_buy_side_example():
    d = PriceDensity(np.arange(11.0), np.eye(11)[4], 1.0)
    r = rescale_to_dollars(d, 100.0, 0.01, side="buy")
    assert r.dollars[np.argmax(r.density)] == pytest.approx(99.96, abs=1e-12)


@given(
    weights=st.lists(st.floats(0.0, 1.0), min_size=4, max_size=30).filter(lambda w: sum(w) > 1e-3),
    anchor=st.floats(1.0, 500.0),
    tick=st.sampled_from([0.01, 0.05, 0.25, 1.0]),
)
@settings(max_examples=60, deadline=None)
def test_moments_transform_affinely(weights, anchor, tick):
    d = PriceDensity(np.arange(float(len(weights))), weights, 1.0)
    mean, std = moments(d)
    buy = moments(rescale_to_dollars(d, anchor, tick, side="buy"), in_dollars=True)
    sell = moments(rescale_to_dollars(d, anchor, tick, side="sell"), in_dollars=True)
    assert buy[0] == pytest.approx(anchor - tick * mean, rel=1e-12, abs=1e-9)
    assert sell[0] == pytest.approx(anchor + tick * mean, rel=1e-12, abs=1e-9)
    assert buy[1] == pytest.approx(tick * std, rel=1e-7, abs=1e-9)
    assert sell[1] == pytest.approx(tick * std, rel=1e-7, abs=1e-9)


def test_rescale_rejects():
    d = PriceDensity(np.arange(3.0), [1.0, 1.0, 1.0], 1.0)
    with pytest.raises(DomainError):
        rescale_to_dollars(d, 1.0, 0.0)
    with pytest.raises(DomainError):
        rescale_to_dollars(d, 1.0, 0.1, side="mid")


def test_price_density_csv_round_trip(tmp_path, solved):
    t = 5.0
    meta = {"lam": 0.5, "sigma": 1.0, "mu": 0.0, "theta": 0.1, "T": 25.0}
    d = price_distribution(solved, PriorSpec.for_time(0.5, 0.1, t), t, 60, meta=meta)
    d = rescale_to_dollars(d, 24.0, 0.01)
    path = tmp_path / "p.csv"
    d.to_csv(path)
    text = path.read_text().splitlines()
    assert text[0].startswith("# lam=")
    assert "price_ticks,price_dollars,density" in text
    back = PriceDensity.from_csv(path)
    np.testing.assert_array_equal(back.density, d.density)
    np.testing.assert_array_equal(back.dollars, d.dollars)
    assert back.t == t
    assert back.meta["theta"] == 0.1 and back.meta["tick"] == 0.01
    assert moments(back) == moments(d)
