import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_spd
from twotemp import spectral
from twotemp.errors import CommutationError, DefinitenessError, DomainError, StabilityError
from twotemp.spectral import LinearModel


def _eig_2x2(k, g):
    # oracle: roots of lambda^2 + g lambda + k
    disc = complex(g * g - 4 * k)
    return sorted([(-g + disc**0.5) / 2, (-g - disc**0.5) / 2], key=lambda z: -z.real)


def test_assemble_blocks():
    pair = spectral.assemble(LinearModel(np.diag([1.0, 2.0]), np.diag([0.5, 1.0]), 2.0, beta=4.0))
    assert np.allclose(pair.a[:2, 2:], np.eye(2))
    assert np.allclose(pair.a[2:, :2], -np.diag([1.0, 2.0]))
    assert np.allclose(pair.a[2:, 2:], -np.diag([1.0, 2.0]))
    # C C^T = (2 / beta_bar) gamma with beta_bar = beta / alpha = 2
    assert np.allclose(pair.c[2:] @ pair.c[2:].T, np.diag([0.5, 1.0]))
    assert np.allclose(pair.c[:2], 0.0)


@given(st.floats(0.05, 20), st.floats(0.05, 20), st.floats(0.05, 10))
def test_decay_rate_scalar_oracle(k, g, alpha):
    pair = spectral.assemble(LinearModel(np.array([[k]]), np.array([[g]]), alpha))
    lam = _eig_2x2(k, alpha * g)
    assert spectral.decay_rate(pair) == pytest.approx(-2 * lam[0].real, rel=1e-8, abs=1e-12)


def test_decay_rate_rejects_unstable():
    with pytest.raises(StabilityError):
        spectral.decay_rate(np.array([[0.1, 0.0], [0.0, -1.0]]))


def test_optimal_ratio_1d():
    assert spectral.optimal_ratio_1d(1.0, 1.0) == 2.0
    assert spectral.optimal_ratio_1d(4.0, 2.0) == 2.0
    with pytest.raises(DomainError):
        spectral.optimal_ratio_1d(-1.0, 1.0)


@given(st.floats(0.1, 10), st.floats(0.1, 10))
def test_search_matches_1d_formula(k, g):
    alpha_star = spectral.optimal_ratio_1d(k, g)
    lo, hi = 0.2 * alpha_star, 5.0 * alpha_star
    found, rate = spectral.optimal_ratio_search(np.array([[k]]), np.array([[g]]), (lo, hi))
    assert found == pytest.approx(alpha_star, rel=1e-3)
    assert rate == pytest.approx(2 * math.sqrt(k), rel=1e-3)


def test_commuting_closed_form_4x4_example():
    kd, gd, s = spectral.diagonalize_commuting(np.eye(2), np.diag([2.0, 1.0]))
    assert np.allclose(gd, [1.0, 2.0])
    assert np.allclose(s @ s.T, np.eye(2))
    assert spectral.optimal_ratio_commuting(kd, gd) == pytest.approx(math.sqrt(4 / 3), abs=1e-12)


def test_diagonalize_commuting_degenerate_friction(rng):
    # gamma = I commutes with anything; K's eigenbasis must come out
    k = random_spd(rng, 3)
    kd, gd, s = spectral.diagonalize_commuting(k, np.eye(3))
    assert np.allclose(np.sort(kd), np.linalg.eigvalsh(k))
    assert np.allclose(s @ k @ s.T, np.diag(kd), atol=1e-12)


def test_diagonalize_rejects_non_commuting():
    with pytest.raises(CommutationError):
        spectral.diagonalize_commuting(np.array([[2.0, 1.0], [1.0, 2.0]]), np.diag([1.0, 2.0]))


@given(st.integers(1, 4), st.integers(0, 10_000))
def test_closed_form_agrees_with_search_for_commuting_pairs(n, seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    kd = rng.uniform(0.3, 3.0, n)
    gd = np.sort(rng.uniform(0.3, 3.0, n))
    k = (q * kd) @ q.T
    g = (q * gd) @ q.T
    closed = spectral.optimal_ratio_commuting(*spectral.diagonalize_commuting(k, g)[:2])
    found, _ = spectral.optimal_ratio_search(k, g, (0.02, 4 * closed + 1), tol=1e-10, n_grid=2000)
    assert found == pytest.approx(closed, rel=1e-5)
    # square-root kink at the optimum: abscissa error ~ sqrt(alpha error)
    assert spectral.abscissa_at(k, g, found) == pytest.approx(spectral.abscissa_at(k, g, closed), abs=1e-4)


@given(st.integers(1, 4), st.integers(0, 10_000), st.floats(0.1, 5))
def test_trace_bound_dominates_rate(n, seed, alpha):
    rng = np.random.default_rng(seed)
    pair = spectral.assemble(LinearModel(random_spd(rng, n), random_spd(rng, n), alpha))
    assert spectral.decay_rate(pair) <= spectral.trace_rate_bound(pair) + 1e-10


def test_linear_model_validation():
    with pytest.raises(DefinitenessError):
        LinearModel(np.diag([1.0, -1.0]), np.eye(2), 1.0)
    with pytest.raises(DomainError):
        LinearModel(np.eye(2), np.eye(2), 0.0)
    assert LinearModel(np.eye(1), np.eye(1), 2.0, beta=4.0).beta_bar == 2.0
