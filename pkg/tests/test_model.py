import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_skew, random_spd
from twotemp import model
from twotemp.errors import DimensionError, SingularityError, ValidationError
from twotemp.model import DoubleWell, LennardJones, Quadratic, TwoTemperatureSystem


def _fd_gradient(pot, x, h=1e-6):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (pot.energy(x + e) - pot.energy(x - e)) / (2 * h)
    return g


def test_quadratic_values():
    pot = Quadratic(np.diag([1.0, 4.0]))
    assert pot.energy(np.array([1.0, 1.0])) == pytest.approx(2.5)
    assert np.allclose(pot.gradient(np.array([1.0, 1.0])), [1.0, 4.0])
    with pytest.raises(ValidationError):
        Quadratic(np.diag([1.0, -1.0]))


def test_double_well_minima_and_barrier():
    pot = DoubleWell(3, k=0.5)
    for s in (-1.0, 1.0):
        x = np.full(4, s)
        assert pot.energy(x) == pytest.approx(0.0)
        assert np.allclose(pot.gradient(x), 0.0)
    assert pot.energy(np.zeros(4)) == pytest.approx(0.5)


def test_lennard_jones_dimer():
    pot = LennardJones(2, dim=2)
    r = 2 ** (1 / 6)
    x = np.array([0.0, 0.0, r, 0.0])
    assert pot.energy(x) == pytest.approx(-1.0)
    assert np.allclose(pot.gradient(x), 0.0, atol=1e-12)
    with pytest.raises(SingularityError):
        pot.energy(np.zeros(4))


def test_lennard_jones_batched():
    pot = LennardJones(3, dim=2)
    rng = np.random.default_rng(1)
    x = rng.uniform(0, 3, (5, 6))
    assert pot.energy(x).shape == (5,)
    assert np.allclose(pot.gradient(x)[2], pot.gradient(x[2]))


def test_make_potential_and_dimension_checks():
    pot = model.make_potential("double_well", d=2, k=2.0)
    assert pot.n == 3
    with pytest.raises(ValidationError):
        model.make_potential("nope")
    with pytest.raises(DimensionError):
        pot.energy(np.zeros(4))


@st.composite
def points(draw):
    kind = draw(st.sampled_from(["quadratic", "double_well", "lennard_jones"]))
    seed = draw(st.integers(0, 10_000))
    rng = np.random.default_rng(seed)
    if kind == "quadratic":
        n = draw(st.integers(1, 5))
        return Quadratic(random_spd(rng, n)), rng.standard_normal(n)
    if kind == "double_well":
        d = draw(st.integers(0, 5))
        return DoubleWell(d, draw(st.floats(0.01, 10.0))), rng.uniform(-2, 2, d + 1)
    grid = np.array([[i, j] for i in range(3) for j in range(2)], dtype=float)[:4] * 1.2
    return LennardJones(4, 2), (grid + 0.1 * rng.standard_normal(grid.shape)).ravel()


@given(points())
def test_gradient_matches_finite_differences(case):
    pot, x = case
    g = pot.gradient(x)
    fd = _fd_gradient(pot, x)
    assert np.linalg.norm(g - fd) <= 1e-5 * max(1.0, np.linalg.norm(g))


def test_energy_bounded_below():
    rng = np.random.default_rng(3)
    assert np.all(DoubleWell(4, 1.0).energy(rng.uniform(-5, 5, (1000, 5))) >= 0.0)
    lj = LennardJones(3, 2)
    x = rng.uniform(0, 4, (2000, 6))
    # three pairs, each bounded below by -eps
    assert np.all(lj.energy(x) >= -3.0)


# --------------------------------------------------------------------------
# controls


@given(st.integers(1, 5), st.integers(0, 10_000), st.floats(0.1, 10), st.floats(0.1, 10))
def test_admissible_controls_satisfy_fdr2(n, seed, beta_bar, beta):
    rng = np.random.default_rng(seed)
    sigma = rng.standard_normal((n, n)) + 2 * np.eye(n)
    m = random_skew(rng, n)
    b = model.build_control(sigma, beta_bar, beta, m)
    assert model.fdr2_residual(b, sigma, beta_bar, beta) <= 1e-12 * max(1.0, np.linalg.norm(sigma) ** 2 * max(beta, beta_bar))


def test_build_control_rejects_non_skew():
    with pytest.raises(ValidationError):
        model.build_control(np.eye(2), 1.0, 2.0, np.ones((2, 2)))


def test_system_validation():
    g = np.diag([1.0, 2.0])
    s = TwoTemperatureSystem.from_friction(g, 1.0, 3.0)
    assert s.alpha == pytest.approx(3.0)
    assert np.allclose(s.effective_friction, 3.0 * g)
    assert np.allclose(s.noise_cov, 2.0 * g)
    with pytest.raises(ValidationError):
        TwoTemperatureSystem(g, np.eye(2), 1.0, 3.0, np.zeros((2, 2)))  # FDR broken
    with pytest.raises(ValidationError):
        TwoTemperatureSystem(g, s.sigma, 1.0, 3.0, np.zeros((2, 2)))  # FDR2 broken
    assert not s.gamma.flags.writeable


def test_aep_rate_zero_for_optimal_and_positive_for_skew(rng):
    g = random_spd(rng, 3)
    s = TwoTemperatureSystem.from_friction(g, 1.0, 2.0)
    assert model.aep_rate(s) <= 1e-14
    s2 = TwoTemperatureSystem.from_friction(g, 1.0, 2.0, m=random_skew(rng, 3))
    assert model.aep_rate(s2) > 0


def test_aep_rate_closed_form_scalar_case():
    # n=1 admits no skew part, so every admissible B is B* and R = 0
    s = TwoTemperatureSystem.from_friction(np.array([[2.0]]), 0.5, 4.0)
    assert model.aep_rate(s) <= 1e-14


def test_aep_rate_2d_hand_computation():
    # sigma = I, so Q = sigma B^T - (beta_bar - beta)/2 I = M^T and R = tr(M M^T) / (2 beta)
    beta_bar, beta = 2.0, 3.0
    m = np.array([[0.0, 0.4], [-0.4, 0.0]])
    s = TwoTemperatureSystem.from_friction(np.eye(2) * beta_bar / 2, beta_bar, beta, m=m)
    assert model.aep_rate(s) == pytest.approx(np.sum(m * m) / (2 * beta), rel=1e-12)
