import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import seeds
from cvwitness.states import (
    RandomStateConfig,
    bound_entangled_4mode,
    draw_random_state,
    haar_orthosymplectic,
    haar_unitary,
    log_negativity,
    random_covariance,
    squeezed_vacuum,
    squeezing_db,
    thermal,
)
from cvwitness.symplectic import (
    is_physical,
    is_symplectic,
    partial_transpose,
    symplectic_eigenvalues,
)

LOG2E = np.log2(np.e)


def test_squeezed_vacuum_entries():
    assert np.array_equal(squeezed_vacuum(0.0), np.eye(4))
    g = squeezed_vacuum(1.0)
    assert np.allclose(np.diag(g), np.cosh(2.0))
    assert g[0, 2] == pytest.approx(np.sinh(2.0))
    assert g[1, 3] == pytest.approx(-np.sinh(2.0))
    assert np.allclose(symplectic_eigenvalues(g), 1.0, atol=1e-9)


@pytest.mark.parametrize("r", np.linspace(0, 2, 21))
def test_log_negativity_of_squeezed_vacuum(r):
    rep = log_negativity(squeezed_vacuum(r))
    assert rep.E == pytest.approx(2 * r * LOG2E, abs=1e-9)
    assert rep.f == pytest.approx(np.exp(-4 * r), rel=1e-9)


def test_log_negativity_of_product_states():
    assert log_negativity(np.eye(4)).E == 0.0
    assert log_negativity(np.eye(4)).f == pytest.approx(1.0)
    assert log_negativity(thermal([2.0, 3.5])).E == 0.0
    with pytest.raises(ValueError):
        log_negativity(np.eye(6))


def test_squeezing_db():
    assert squeezing_db(0.0) == 0.0
    assert squeezing_db(1.0) == pytest.approx(8.6859, abs=1e-4)
    assert squeezing_db(1.73) == pytest.approx(15.0, abs=0.05)


def test_degenerate_random_state_is_vacuum(rng):
    cfg = RandomStateConfig(modes=3, nu_lo=1.0, nu_hi=1.0, r_max=0.0)
    assert np.allclose(random_covariance(cfg, rng), np.eye(6), atol=1e-12)


@given(seeds, st.integers(1, 4))
def test_random_state_spectrum_and_physicality(seed, n):
    st_ = draw_random_state(RandomStateConfig(modes=n), np.random.default_rng(seed))
    assert is_physical(st_.gamma)
    assert np.allclose(symplectic_eigenvalues(st_.gamma), np.sort(st_.nu)[::-1], rtol=1e-7)


def test_random_state_config_validation():
    with pytest.raises(ValueError):
        RandomStateConfig(nu_lo=0.5)
    with pytest.raises(ValueError):
        RandomStateConfig(r_max=-1)
    with pytest.raises(ValueError):
        RandomStateConfig(modes=0)


def test_random_state_replay():
    cfg = RandomStateConfig(modes=2, seed=7)
    assert np.array_equal(random_covariance(cfg), random_covariance(cfg))


@given(seeds, st.integers(1, 5))
def test_orthosymplectic_membership(seed, n):
    S = haar_orthosymplectic(n, np.random.default_rng(seed))
    assert np.allclose(S @ S.T, np.eye(2 * n), atol=1e-9)
    assert is_symplectic(S)


def test_one_mode_orthosymplectic_is_rotation(rng):
    S = haar_orthosymplectic(1, rng)
    assert S[0, 0] == pytest.approx(S[1, 1])
    assert S[0, 1] == pytest.approx(-S[1, 0])


def test_haar_second_moment():
    rng = np.random.default_rng(3)
    n, draws = 3, 10_000
    vals = np.array([abs(haar_unitary(n, rng)[0, 0]) ** 2 for _ in range(draws)])
    # |U_11|^2 ~ Beta(1, n-1): mean 1/n, variance (n-1)/(n^2 (n+1))
    sd = np.sqrt((n - 1) / (n**2 * (n + 1)) / draws)
    assert abs(vals.mean() - 1 / n) < 3 * sd


def test_haar_left_invariance_of_trace_statistic():
    rng = np.random.default_rng(5)
    n, draws = 2, 10_000
    A = np.diag([1.0, 2.0, 3.0, 4.0])
    K = haar_orthosymplectic(n, np.random.default_rng(99))
    plain, shifted = [], []
    for _ in range(draws):
        S = haar_orthosymplectic(n, rng)
        plain.append((S.T @ A @ S)[0, 0])
        KS = K @ haar_orthosymplectic(n, rng)
        shifted.append((KS.T @ A @ KS)[0, 0])
    plain, shifted = np.array(plain), np.array(shifted)
    sd = np.sqrt(plain.var() / draws + shifted.var() / draws)
    assert abs(plain.mean() - shifted.mean()) < 3 * sd


def test_bound_entangled_state():
    g = bound_entangled_4mode()
    assert g[0, 0] == 2 and g[0, 4] == 1 and g[1, 7] == -1
    assert np.array_equal(g, g.T)
    assert is_physical(g)
    assert is_physical(partial_transpose(g, [2, 3]))
