"""Gumbel noise: inverse CDF, moments, chain streams, persistence."""

import numpy as np
import pytest
from scipy import stats

from pmp.perturb import (EULER_GAMMA, PersistentGumbel, chain_rng,
                         draw_gumbel, gumbel_icdf, persistent_step, perturb,
                         split_flat)


def test_gumbel_icdf_hand_values():
    # F^{-1}(u) = -gamma - log(-log u)
    assert gumbel_icdf(np.exp(-1.0)) == pytest.approx(-EULER_GAMMA, abs=1e-12)
    assert gumbel_icdf(0.5) == pytest.approx(-EULER_GAMMA - np.log(np.log(2.0)),
                                             abs=1e-12)
    # clipped endpoints stay finite
    assert np.isfinite(gumbel_icdf(np.array([0.0, 1.0]))).all()


def test_gumbel_icdf_inverts_cdf():
    x = np.linspace(-2.0, 5.0, 50)
    u = np.exp(-np.exp(-(x + EULER_GAMMA)))
    assert np.allclose(gumbel_icdf(u), x, atol=1e-9)


def test_draw_gumbel_zero_mean_unit_gumbel_scale():
    rng = np.random.default_rng(0)
    x = draw_gumbel(rng, 200_000)
    assert abs(x.mean()) < 0.01                       # E = 0 by the -gamma shift
    assert abs(x.var() - np.pi ** 2 / 6) < 0.02       # Var = pi^2/6


def test_chain_rng_streams_are_reproducible_and_distinct():
    a1 = chain_rng(7, 3).random(5)
    a2 = chain_rng(7, 3).random(5)
    b = chain_rng(7, 4).random(5)
    c = chain_rng(8, 3).random(5)
    assert np.array_equal(a1, a2)
    assert not np.array_equal(a1, b)
    assert not np.array_equal(a1, c)


def test_perturb_adds_blockwise_and_broadcasts_batches():
    unaries = [np.array([1.0, 2.0]), np.array([0.0, 0.0, 1.0])]
    eps = [np.array([[0.1, -0.1], [0.2, 0.0]]), np.zeros((2, 3))]
    out = perturb(unaries, eps)
    assert np.allclose(out[0], [[1.1, 1.9], [1.2, 2.0]])
    assert np.allclose(out[1], [[0, 0, 1], [0, 0, 1]])
    assert np.array_equal(unaries[0], [1.0, 2.0])     # inputs untouched
    with pytest.raises(ValueError):
        perturb(unaries, eps[:1])


def test_split_flat_respects_cardinalities():
    flat = np.arange(10.0).reshape(2, 5)
    blocks = split_flat(flat, [2, 3])
    assert np.array_equal(blocks[0], [[0, 1], [5, 6]])
    assert np.array_equal(blocks[1], [[2, 3, 4], [7, 8, 9]])


def test_persistent_rho_validation():
    with pytest.raises(ValueError):
        PersistentGumbel(-0.1, 4)
    with pytest.raises(ValueError):
        PersistentGumbel(1.5, 4)


def test_persistent_marginals_stay_gumbel():
    # every step of the AR(1)-driven chain is marginally Gumbel(-gamma, 1)
    rng = np.random.default_rng(1)
    for rho in (0.0, 0.5, 0.9):
        pg = PersistentGumbel(rho, 20_000)
        for _ in range(3):
            eps = pg.step(rng)
        p = stats.kstest(eps, stats.gumbel_r(loc=-EULER_GAMMA).cdf).pvalue
        assert p > 0.01, (rho, p)


def test_persistent_rho_one_freezes_noise():
    rng = np.random.default_rng(2)
    pg = PersistentGumbel(1.0, 1000)
    first = pg.step(rng)
    assert np.array_equal(pg.step(rng), first)
    assert np.array_equal(pg.step(rng), first)


def test_persistent_rho_zero_is_fresh():
    rng = np.random.default_rng(3)
    pg = PersistentGumbel(0.0, 50_000)
    a, b = pg.step(rng), pg.step(rng)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.02


def test_persistent_correlation_increases_with_rho():
    rng = np.random.default_rng(4)
    corr = {}
    for rho in (0.2, 0.8):
        pg = PersistentGumbel(rho, 50_000)
        a, b = pg.step(rng), pg.step(rng)
        corr[rho] = np.corrcoef(a, b)[0, 1]
    assert corr[0.2] < corr[0.8]


def test_persistent_step_wrapper_matches_method():
    pg = PersistentGumbel(0.5, (3, 2))
    out = persistent_step(pg, np.random.default_rng(5))
    assert out.shape == (3, 2)
