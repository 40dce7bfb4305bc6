import math
import random

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weakiso.analytic import (
    equivariance_check,
    gamma0_matrix,
    is_symplectic,
    random_gamma0,
    random_pd_matrix,
    riemann_form_check,
    run_checks,
    sl_density_demo,
    symplectic_J,
    tau_embed,
)
from weakiso.psi_map import det_int


def numpy_symplectic(M) -> bool:
    M = np.array(M, dtype=np.int64)
    g = M.shape[0] // 2
    J = np.block([[np.zeros((g, g), dtype=np.int64), np.eye(g, dtype=np.int64)],
                  [-np.eye(g, dtype=np.int64), np.zeros((g, g), dtype=np.int64)]])
    return bool((M.T @ J @ M == J).all())


def test_tau_embed_examples():
    assert np.allclose(tau_embed(1j, [[1, 0], [0, 1]]).Omega, 1j * np.eye(2))
    Om = tau_embed(1j, [[2, 1], [1, 2]]).Omega
    assert np.all(np.linalg.eigvalsh(Om.imag) > 0)
    with pytest.raises(ValueError, match="upper half plane"):
        tau_embed(-1j, [[1]])
    with pytest.raises(ValueError):
        tau_embed(0.1j, [[1]])
    with pytest.raises(ValueError):
        tau_embed(1j, [[2000]])


def test_gamma0_examples():
    A = [[2, 1], [1, 2]]
    M = gamma0_matrix(((1, 0), (0, 1)), A)
    assert M == [[int(i == j) for j in range(4)] for i in range(4)]
    M = gamma0_matrix(((1, 1), (0, 1)), A)
    assert M == [[1, 0, 2, 1], [0, 1, 1, 2], [0, 0, 1, 0], [0, 0, 0, 1]]
    r = equivariance_check(((1, 0), (0, 1)), 0.3 + 1.1j, A)
    assert r["residual"] == 0.0 and r["pass"]
    with pytest.raises(ValueError):
        gamma0_matrix(((1, 0), (1, 1)), A)
    with pytest.raises(ValueError):
        gamma0_matrix(((2, 0), (0, 1)), A)


def test_symplectic_J():
    assert symplectic_J(1) == [[0, 1], [-1, 0]]
    assert is_symplectic(symplectic_J(3))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 3))
def test_gamma0_matrix_is_symplectic(seed, g):
    rng = random.Random(seed)
    A = random_pd_matrix(rng, g)
    sigma = random_gamma0(rng, A.det)
    M = gamma0_matrix(sigma, A)
    assert numpy_symplectic(M) and is_symplectic(M)
    assert det_int(M) == 1


def mp_residual(sigma, tau, A):
    """sigma(tau) A against (a tau A + b A)(c A^-1 tau A + d)^-1 computed from scratch at 40 digits."""
    (a, b), (c, d) = sigma
    with mpmath.workdps(40):
        t = mpmath.mpc(tau.real, tau.imag)
        Am = mpmath.matrix(A)
        I = mpmath.eye(len(A))
        rhs = (a * t * Am + b * Am) * (c * Am**-1 * t * Am + d * I) ** -1
        lhs = ((a * t + b) / (c * t + d)) * Am
        return float(mpmath.mnorm(lhs - rhs, 1))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_equivariance_random(seed):
    rng = random.Random(seed)
    A = random_pd_matrix(rng, rng.randint(1, 3))
    sigma = random_gamma0(rng, A.det)
    tau = complex(rng.uniform(-2, 2), rng.uniform(0.5, 3))
    r = equivariance_check(sigma, tau, A.entries)
    assert r["pass"] and r["symplectic"]
    assert mp_residual(sigma, tau, A.entries) < 1e-25


def test_riemann_form_g1_classical():
    for N in (1, 2, 5, 12):
        r = riemann_form_check(0.2 + 1.3j, [[N]])
        assert r["pass"]
        assert r["max_residual"] < 1e-12


def test_riemann_form_identity():
    r = riemann_form_check(1j, [[1, 0], [0, 1]])
    assert r["pass"] and r["transport"] == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_riemann_form_random_g2(seed):
    rng = random.Random(seed)
    A = random_pd_matrix(rng, 2)
    tau = complex(rng.uniform(-2, 2), rng.uniform(0.5, 3))
    r = riemann_form_check(tau, A.entries)
    assert r["pass"], r


def test_sl_density_examples():
    r = sl_density_demo([[1.0, 0.0], [0.0, 1.0]], 2, 1e-6)
    assert r["error"] == 0.0
    t = math.pi / 6
    rot = [[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]]
    r = sl_density_demo(rot, 2, 1e-3)
    assert r["pass"] and r["error"] < 1e-3
    with pytest.raises(ValueError):
        sl_density_demo(rot, 2, 0)


def test_run_checks_deterministic():
    a = run_checks(20, seed=4)
    b = run_checks(20, seed=4)
    assert a == b and a["pass"]
    assert run_checks(6, seed=4, jobs=2) == run_checks(6, seed=4)
