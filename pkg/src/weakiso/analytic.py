"""Numerical checks of the complex-analytic identities behind tau -> tau*A.

* For sigma = [[a, b], [c, d]] in Gamma_0(det A) the integer matrix
  M = [[aI, bA], [cA^-1, dI]] is symplectic and sigma(tau)*A = M(tau*A).
* On Lambda_A = A^-1 Z^g + tau Z^g the form E_A(x1 + tau y1, x2 + tau y2) =
  x1.A y2 - y1.A x2 is integral and unimodular; on Z^g + tau A Z^g the form
  E~(x1 + tau A y1, ...) = x1.y2 - y1.x2 is the standard one, and
  z -> A z carries E_A to E~.

Everything runs in double precision with residuals reported; the
equivariance residual is recomputed with mpmath as a second precision.
"""

from __future__ import annotations

import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from math import gcd

import mpmath
import numpy as np

from .errors import SearchFailure
from .psi_map import as_matrix, det_int
from .qexp import approx_in_sl, max_abs_diff

TOL = 1e-9
ENTRY_LIMIT = 1000
MIN_IM_TAU = 0.5
MP_DPS = 50


@dataclass(frozen=True)
class SiegelPoint:
    Omega: np.ndarray

    def __post_init__(self):
        O = np.asarray(self.Omega, dtype=complex)
        if O.ndim != 2 or O.shape[0] != O.shape[1]:
            raise ValueError("Omega must be square")
        if np.max(np.abs(O - O.T)) > TOL:
            raise ValueError("Omega is not symmetric")
        im = O.imag
        try:
            L = np.linalg.cholesky(im)
        except np.linalg.LinAlgError:
            raise ValueError("Im(Omega) is not positive definite") from None
        if np.min(np.diag(L)) < 1e-12:
            raise ValueError("Im(Omega) is too close to singular")
        object.__setattr__(self, "Omega", O)


def _check_tau(tau: complex):
    tau = complex(tau)
    if tau.imag <= 0:
        raise ValueError("tau must lie in the upper half plane")
    if tau.imag < MIN_IM_TAU:
        raise ValueError(f"Im(tau) = {tau.imag} is below the supported range {MIN_IM_TAU}")
    return tau


def _check_entries(A):
    A = as_matrix(A)
    if max(abs(x) for r in A.entries for x in r) > ENTRY_LIMIT:
        raise ValueError(f"matrix entries exceed {ENTRY_LIMIT}")
    return A


def tau_embed(tau: complex, A) -> SiegelPoint:
    tau = _check_tau(tau)
    A = _check_entries(A)
    return SiegelPoint(tau * np.array(A.entries, dtype=float))


def _adjugate(A) -> list[list[int]]:
    g = len(A)
    if g == 1:
        return [[1]]
    adj = [[0] * g for _ in range(g)]
    for i in range(g):
        for j in range(g):
            minor = [[A[r][c] for c in range(g) if c != j] for r in range(g) if r != i]
            adj[j][i] = (-1) ** (i + j) * det_int(minor)
    return adj


def symplectic_J(g: int) -> list[list[int]]:
    return [[(1 if j == i + g else -1 if i == j + g else 0) for j in range(2 * g)] for i in range(2 * g)]


def _imatmul(X, Y):
    return [[sum(X[i][k] * Y[k][j] for k in range(len(Y))) for j in range(len(Y[0]))] for i in range(len(X))]


def is_symplectic(M) -> bool:
    g = len(M) // 2
    Mt = [list(r) for r in zip(*M)]
    return _imatmul(_imatmul(Mt, symplectic_J(g)), M) == symplectic_J(g)


def gamma0_matrix(sigma, A) -> list[list[int]]:
    """M = [[aI, bA], [cA^-1, dI]] for sigma in Gamma_0(det A)."""
    A = as_matrix(A)
    (a, b), (c, d) = sigma
    if a * d - b * c != 1:
        raise ValueError("sigma must have determinant 1")
    N = A.det
    if c % N:
        raise ValueError(f"sigma is not in Gamma_0({N})")
    g = A.g
    adj = _adjugate(A.entries)
    cinv = [[Fraction(c * adj[i][j], N) for j in range(g)] for i in range(g)]
    if any(x.denominator != 1 for r in cinv for x in r):
        raise ValueError("c A^-1 is not integral")
    M = [[0] * (2 * g) for _ in range(2 * g)]
    for i in range(g):
        M[i][i] = a
        M[g + i][g + i] = d
        for j in range(g):
            M[i][g + j] = b * A.entries[i][j]
            M[g + i][j] = int(cinv[i][j])
    if not is_symplectic(M):
        raise ValueError("constructed M is not symplectic")
    return M


def _act(M, Omega):
    g = Omega.shape[0]
    M = np.array(M, dtype=float)
    A, B, C, D = M[:g, :g], M[:g, g:], M[g:, :g], M[g:, g:]
    # (A Omega + B)(C Omega + D)^-1, via a transposed solve
    return np.linalg.solve((C @ Omega + D).T, (A @ Omega + B).T).T


def _act_mp(M, Omega):
    g = len(Omega)
    Mm = mpmath.matrix(M)
    Om = mpmath.matrix(Omega)
    A = Mm[0:g, 0:g]
    B = Mm[0:g, g : 2 * g]
    C = Mm[g : 2 * g, 0:g]
    D = Mm[g : 2 * g, g : 2 * g]
    return (A * Om + B) * (C * Om + D) ** -1


def equivariance_check(sigma, tau: complex, A) -> dict:
    A = _check_entries(A)
    Om = tau_embed(tau, A).Omega
    M = gamma0_matrix(sigma, A)
    (a, b), (c, d) = sigma
    tau = complex(tau)
    st = (a * tau + b) / (c * tau + d)
    lhs = st * np.array(A.entries, dtype=float)
    res64 = float(np.max(np.abs(lhs - _act(M, Om))))
    with mpmath.workdps(MP_DPS):
        t = mpmath.mpc(tau.real, tau.imag)
        Am = mpmath.matrix(A.entries)
        st_mp = (a * t + b) / (c * t + d)
        rhs_mp = _act_mp(M, t * Am)
        diff = st_mp * Am - rhs_mp
        res_mp = float(max(abs(diff[i, j]) for i in range(A.g) for j in range(A.g)))
    return {
        "symplectic": is_symplectic(M),
        "M": M,
        "residual": res64,
        "residual_mp": res_mp,
        "precision": {"float": "float64", "mp_dps": MP_DPS},
        "pass": res64 < TOL and res_mp < 10.0 ** (-MP_DPS // 2),
    }


def _coords(z: np.ndarray, tau: complex, B: np.ndarray):
    """Real x, y with z = x + tau * B y."""
    y = np.linalg.solve(B, z.imag / tau.imag)
    x = z.real - tau.real * (B @ y)
    return x, y


def riemann_form_check(tau: complex, A, tol: float = TOL) -> dict:
    tau = _check_tau(tau)
    A = _check_entries(A)
    g = A.g
    Af = np.array(A.entries, dtype=float)
    Ainv = np.linalg.inv(Af)
    I = np.eye(g)

    def E_A(z1, z2):
        x1, y1 = _coords(z1, tau, I)
        x2, y2 = _coords(z2, tau, I)
        return x1 @ Af @ y2 - y1 @ Af @ x2

    def E_t(z1, z2):
        x1, y1 = _coords(z1, tau, Af)
        x2, y2 = _coords(z2, tau, Af)
        return x1 @ y2 - y1 @ x2

    basis = [Ainv[:, i].astype(complex) for i in range(g)] + [tau * I[:, i] for i in range(g)]
    basis_t = [I[:, i].astype(complex) for i in range(g)] + [tau * Af[:, i] for i in range(g)]
    gram = np.array([[E_A(u, v) for v in basis] for u in basis])
    gram_t = np.array([[E_t(u, v) for v in basis_t] for u in basis_t])
    J = np.array(symplectic_J(g), dtype=float)
    integrality = float(np.max(np.abs(gram - np.round(gram))))
    unimodular = float(np.max(np.abs(gram - J)))
    standard = float(np.max(np.abs(gram_t - J)))
    transport = float(max(abs(E_t(Af @ u, Af @ v) - E_A(u, v)) for u in basis for v in basis))
    # with the orientation E(1, tau) = 1, (z, w) -> E(z, iw) is symmetric positive definite on R^2g
    rb = [I[:, i].astype(complex) for i in range(g)] + [1j * I[:, i] for i in range(g)]
    H = np.array([[E_A(u, 1j * v) for v in rb] for u in rb])
    positive = bool(np.max(np.abs(H - H.T)) < tol and np.min(np.linalg.eigvalsh((H + H.T) / 2)) > 0)
    worst = max(integrality, unimodular, standard, transport)
    return {
        "integrality": integrality,
        "unimodular": unimodular,
        "standard": standard,
        "transport": transport,
        "positive": positive,
        "max_residual": worst,
        "precision": {"float": "float64"},
        "pass": worst < tol and positive,
    }


def sl_density_demo(target, ell: int, eps: float, k0: int = 4, k_max: int = 64) -> dict:
    """Raise the precision until approx_in_sl lands within eps of the target."""
    if eps <= 0:
        raise ValueError("eps must be positive; exact agreement is not achievable in general")
    k = k0
    while k <= k_max:
        G = approx_in_sl(target, ell, k)
        err = max_abs_diff(G, target)
        if err < eps:
            return {"G": [[str(x) for x in r] for r in G], "k": k, "error": err, "eps": eps, "pass": True}
        k += 4
    raise SearchFailure(f"error still >= {eps} at precision {ell}^-{k_max}", stage="sl_density_demo")


def random_pd_matrix(rng: random.Random, g: int, bound: int = 6):
    while True:
        R = [[rng.randint(-bound, bound) for _ in range(g)] for _ in range(g)]
        A = [[sum(R[k][i] * R[k][j] for k in range(g)) + (i == j) for j in range(g)] for i in range(g)]
        if max(abs(x) for r in A for x in r) <= ENTRY_LIMIT:
            return as_matrix(A)


def random_gamma0(rng: random.Random, N: int, bound: int = 4):
    while True:
        c = N * rng.randint(-bound, bound)
        d = rng.randint(-bound * 3, bound * 3)
        if d == 0:
            continue
        if gcd(c, d) != 1:
            continue
        # a d - b c = 1
        if c == 0:
            if abs(d) != 1:
                continue
            return ((d, rng.randint(-bound, bound)), (0, d))
        a = pow(d, -1, abs(c)) if abs(c) > 1 else 1
        b = (a * d - 1) // c
        return ((a, b), (c, d))


def random_tau(rng: random.Random) -> complex:
    return complex(rng.uniform(-2, 2), rng.uniform(MIN_IM_TAU, 3))


def _one_instance(inst):
    A, sigma, tau1, tau2 = inst
    return equivariance_check(sigma, tau1, A), riemann_form_check(tau2, A)


def random_instances(trials: int, g: int | None = None, seed: int = 0):
    rng = random.Random(seed)
    out = []
    for _ in range(trials):
        A = random_pd_matrix(rng, g or rng.randint(1, 3))
        out.append((A, random_gamma0(rng, A.det), random_tau(rng), random_tau(rng)))
    return out


def run_checks(trials: int, g: int | None = None, seed: int = 0, jobs: int = 1) -> dict:
    """Equivariance and Riemann-form checks on seeded random instances."""
    insts = random_instances(trials, g, seed)
    if jobs > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            pairs = list(pool.map(_one_instance, insts))
    else:
        pairs = [_one_instance(i) for i in insts]
    eq = [e for e, _ in pairs]
    rf = [r for _, r in pairs]
    return {
        "trials": trials,
        "seed": seed,
        "equivariance": {
            "max_residual": max((r["residual"] for r in eq), default=0.0),
            "max_residual_mp": max((r["residual_mp"] for r in eq), default=0.0),
            "all_symplectic": all(r["symplectic"] for r in eq),
            "pass": all(r["pass"] for r in eq),
        },
        "riemann_form": {
            "max_residual": max((r["max_residual"] for r in rf), default=0.0),
            "pass": all(r["pass"] for r in rf),
        },
        "tolerance": TOL,
        "precision": {"float": "float64", "mp_dps": MP_DPS},
        "pass": all(r["pass"] for r in eq) and all(r["pass"] for r in rf),
    }
