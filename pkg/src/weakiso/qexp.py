"""Formal Siegel q-expansions and their pullback along tau -> tau*A.

An expansion is a finite map Q -> c(Q) on half-integral PSD matrices; its
pullback under A is the one-variable series sum c(Q) q^tr(AQ).  The
witness search finds A in Det_{ell,g} for which tr(AQ) has a unique
minimizer on the support, so the leading pullback coefficient is a single
c(Q_0) != 0.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import IntegrityError, SearchFailure
from .psi_map import SymPosDefIntMatrix, as_matrix, det_int, enumerate_detl

FracMatrix = tuple[tuple[Fraction, ...], ...]


def _principal_minors_nonneg(M) -> bool:
    g = len(M)
    for r in range(1, g + 1):
        for idx in itertools.combinations(range(g), r):
            if det_int([[M[i][j] for j in idx] for i in idx]) < 0:
                return False
    return True


@dataclass(frozen=True, order=True)
class HalfIntegralMatrix:
    """Q stored as the integer matrix 2Q (even diagonal)."""

    twice: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(int(x) for x in r) for r in self.twice)
        g = len(rows)
        if any(len(r) != g for r in rows):
            raise ValueError("2Q must be square")
        for i in range(g):
            if rows[i][i] % 2:
                raise ValueError("Q must have integer diagonal")
            for j in range(i):
                if rows[i][j] != rows[j][i]:
                    raise ValueError("Q must be symmetric")
        if not _principal_minors_nonneg(rows):
            raise ValueError("Q is not positive semidefinite")
        object.__setattr__(self, "twice", rows)

    @classmethod
    def from_flat(cls, flat, g: int | None = None) -> "HalfIntegralMatrix":
        flat = list(flat)
        if g is None:
            g = math.isqrt(len(flat))
        if g * g != len(flat):
            raise ValueError("flat entry list is not a square")
        return cls(tuple(tuple(flat[i * g : (i + 1) * g]) for i in range(g)))

    @property
    def g(self) -> int:
        return len(self.twice)

    def trace(self) -> int:
        return sum(self.twice[i][i] for i in range(self.g)) // 2

    def Q(self) -> FracMatrix:
        return tuple(tuple(Fraction(x, 2) for x in r) for r in self.twice)

    def flat(self) -> list[int]:
        return [x for r in self.twice for x in r]

    def trace_against(self, A) -> int:
        """tr(AQ) for an integer symmetric A."""
        g = self.g
        total = sum(A[i][j] * self.twice[i][j] for i in range(g) for j in range(g))
        return total // 2

    def trace_against_frac(self, E) -> Fraction:
        g = self.g
        return sum((E[i][j] * self.twice[i][j] for i in range(g) for j in range(g)), Fraction(0)) / 2

    def conjugate(self, P) -> "HalfIntegralMatrix":
        """P^t Q P for an integer matrix P."""
        g = self.g
        M = [[sum(P[k][i] * self.twice[k][l] * P[l][j] for k in range(g) for l in range(g)) for j in range(g)] for i in range(g)]
        return HalfIntegralMatrix(tuple(map(tuple, M)))


def _key(Q: HalfIntegralMatrix):
    return (Q.trace(), Q.flat())


def enumerate_bounded_trace(g: int, t: int) -> list[HalfIntegralMatrix]:
    """All PSD half-integral g x g matrices with tr(Q) <= t.

    Off-diagonal entries are scanned over the ball tr(Q^2) <= tr(Q)^2, i.e.
    (2Q_ij)^2 <= 2 t^2, then filtered by exact principal minors.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if g < 1:
        raise ValueError("g must be >= 1")
    bmax = math.isqrt(2 * t * t)
    off = [(i, j) for i in range(g) for j in range(i + 1, g)]
    out = []
    for diag in itertools.product(range(t + 1), repeat=g):
        if sum(diag) > t:
            continue
        for bs in itertools.product(range(-bmax, bmax + 1), repeat=len(off)):
            M = [[0] * g for _ in range(g)]
            for i in range(g):
                M[i][i] = 2 * diag[i]
            ok = True
            for (i, j), b in zip(off, bs):
                # a zero diagonal forces its row to vanish; cheap early exit
                if b and (diag[i] == 0 or diag[j] == 0):
                    ok = False
                    break
                M[i][j] = M[j][i] = b
            if ok and _principal_minors_nonneg(M):
                out.append(HalfIntegralMatrix(tuple(map(tuple, M))))
    out.sort(key=_key)
    return out


def _coerce(c, modulus):
    if modulus is None:
        return Fraction(c)
    c = Fraction(c)
    return c.numerator * pow(c.denominator, -1, modulus) % modulus


@dataclass(frozen=True)
class FormalQExpansion:
    """Finite map Q -> c(Q); exact rationals, or residues mod ``modulus``."""

    coeffs: dict = field(default_factory=dict)
    modulus: int | None = None

    def __post_init__(self):
        clean = {}
        g = None
        for Q, c in self.coeffs.items():
            if not isinstance(Q, HalfIntegralMatrix):
                raise TypeError("keys must be HalfIntegralMatrix")
            if g is not None and Q.g != g:
                raise ValueError("all terms must have the same size")
            g = Q.g
            c = _coerce(c, self.modulus)
            if c:
                clean[Q] = c
        object.__setattr__(self, "coeffs", dict(sorted(clean.items(), key=lambda kv: _key(kv[0]))))

    @property
    def g(self) -> int | None:
        return next(iter(self.coeffs)).g if self.coeffs else None

    def support(self) -> list[HalfIntegralMatrix]:
        return list(self.coeffs)

    def is_zero(self) -> bool:
        return not self.coeffs

    def __add__(self, other: "FormalQExpansion") -> "FormalQExpansion":
        if self.modulus != other.modulus:
            raise ValueError("coefficient rings differ")
        out = dict(self.coeffs)
        for Q, c in other.coeffs.items():
            out[Q] = out.get(Q, 0) + c
        return FormalQExpansion(out, self.modulus)

    def to_json(self):
        return [{"Q": Q.flat(), "c": str(c)} for Q, c in self.coeffs.items()]

    @classmethod
    def from_json(cls, rows, modulus: int | None = None) -> "FormalQExpansion":
        coeffs = {}
        for r in rows:
            Q = HalfIntegralMatrix.from_flat(r["Q"])
            coeffs[Q] = coeffs.get(Q, 0) + _coerce(Fraction(r["c"]), modulus)
        return cls(coeffs, modulus)


@dataclass(frozen=True)
class PullbackSeries:
    terms: dict = field(default_factory=dict)
    modulus: int | None = None

    def __add__(self, other: "PullbackSeries") -> "PullbackSeries":
        out = dict(self.terms)
        for n, c in other.terms.items():
            out[n] = out.get(n, 0) + c
            if self.modulus is not None:
                out[n] %= self.modulus
        return PullbackSeries({n: c for n, c in sorted(out.items()) if c}, self.modulus)

    def leading(self):
        if not self.terms:
            return None
        n = min(self.terms)
        return n, self.terms[n]

    def to_json(self):
        return {str(n): str(c) for n, c in self.terms.items()}


def pullback(f: FormalQExpansion, A) -> PullbackSeries:
    """sum over Q of c(Q) q^tr(AQ), collisions summed, zeros dropped."""
    A = as_matrix(A)
    if f.g is not None and f.g != A.g:
        raise ValueError("A and the expansion have different sizes")
    terms: dict = {}
    for Q, c in f.coeffs.items():
        n = Q.trace_against(A.entries)
        terms[n] = terms.get(n, 0) + c
        if f.modulus is not None:
            terms[n] %= f.modulus
    return PullbackSeries({n: c for n, c in sorted(terms.items()) if c}, f.modulus)


def _levels(S):
    t0 = min(Q.trace() for Q in S)
    S0 = [Q for Q in S if Q.trace() == t0]
    rest = [Q.trace() for Q in S if Q.trace() != t0]
    t1 = min(rest) if rest else None
    return t0, t1, S0


def _frac_pd(E) -> bool:
    g = len(E)
    for k in range(1, g + 1):
        if _frac_det([r[:k] for r in E[:k]]) <= 0:
            return False
    return True


def _frac_det(M) -> Fraction:
    n = len(M)
    a = [[Fraction(x) for x in r] for r in M]
    det = Fraction(1)
    for k in range(n):
        piv = next((i for i in range(k, n) if a[i][k] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != k:
            a[k], a[piv] = a[piv], a[k]
            det = -det
        det *= a[k][k]
        for i in range(k + 1, n):
            r = a[i][k] / a[k][k]
            for j in range(k, n):
                a[i][j] -= r * a[k][j]
    return det


def cone_conditions(S, E) -> dict:
    """The three verifiable conditions on E, evaluated exactly.

    distinct: tr(EQ) differs across the minimal-trace part S_0 of S;
    positive: E is positive definite;
    small: tr(EQ) < t_1 - t_0 on S (vacuous when S has one trace level).
    """
    t0, t1, S0 = _levels(S)
    vals = [Q.trace_against_frac(E) for Q in S0]
    small = t1 is None or all(Q.trace_against_frac(E) < t1 - t0 for Q in S)
    return {"distinct": len(set(vals)) == len(vals), "positive": _frac_pd(E), "small": small}


def minimizer_cone_sample(S, seed=0, budget: int = 100) -> FracMatrix:
    """A rational symmetric E meeting the three conditions of ``cone_conditions``."""
    S = list(S)
    if not S:
        raise ValueError("support must be nonempty")
    g = S[0].g
    t0, t1, S0 = _levels(S)
    rng = random.Random(seed)
    if len(S0) == 1:
        R = [[Fraction(0)] * g for _ in range(g)]
    else:
        for _ in range(budget):
            R = [[Fraction(0)] * g for _ in range(g)]
            for i in range(g):
                for j in range(i, g):
                    R[i][j] = R[j][i] = Fraction(rng.randint(-1000, 1000), 1000)
            vals = [Q.trace_against_frac(R) for Q in S0]
            if len(set(vals)) == len(vals):
                break
        else:
            raise SearchFailure(f"no separating perturbation in {budget} draws", stage="minimizer_cone_sample")
    # Gershgorin: a diagonal shift beyond every off-diagonal row sum is PD;
    # S_0 has a single trace, so the shift keeps the separation intact
    shift = max(sum(abs(x) for x in row) for row in R) + 1
    E = [[R[i][j] + (shift if i == j else 0) for j in range(g)] for i in range(g)]
    top = max(Q.trace_against_frac(E) for Q in S)
    gap = Fraction(1) if t1 is None else Fraction(t1 - t0)
    if top > 0:
        eps = gap / (2 * top)
        E = [[x * eps for x in r] for r in E]
    E = tuple(tuple(r) for r in E)
    conds = cone_conditions(S, E)
    if not all(conds.values()):
        raise IntegrityError(f"cone sample failed its own check: {conds}")
    return E


def _transvection_factor(H: np.ndarray, max_param: float):
    """Row operations reducing H to I; returns the inverse factors (i, j, c) with H = prod(I + c e_ij)."""
    g = H.shape[0]
    M = H.astype(float).copy()
    ops = []

    def add(i, j, c):
        M[i, :] += c * M[j, :]
        ops.append((i, j, c))

    for j in range(g - 1):
        i = max(range(j + 1, g), key=lambda r: abs(M[r, j]))
        if abs(M[i, j]) < abs(M[j, j]):
            # strengthen the lever row; the sign keeps the two entries from cancelling
            add(i, j, 1.0 if M[i, j] * M[j, j] >= 0 else -1.0)
        add(j, i, (1.0 - M[j, j]) / M[i, j])
        for r in range(j + 1, g):
            if M[r, j]:
                add(r, j, -M[r, j])
    for j in range(g - 1, -1, -1):
        for r in range(j):
            if M[r, j]:
                add(r, j, -M[r, j])
    worst = max((abs(c) for _, _, c in ops), default=0.0)
    residual = float(np.max(np.abs(M - np.eye(g))))
    if worst > max_param or residual > 1e-6:
        raise SearchFailure(
            f"ill-conditioned transvection factorization: max parameter {worst:.3g}, residual {residual:.3g}",
            stage="approx_in_sl",
        )
    # E_K ... E_1 H = I, so H = E_1^-1 ... E_K^-1
    return [(i, j, -c) for i, j, c in ops]


def _exact_transvection_product(g: int, factors) -> FracMatrix:
    G = [[Fraction(int(i == j)) for j in range(g)] for i in range(g)]
    for i, j, c in reversed(factors):
        # left-multiply by (I + c e_ij): row_i += c row_j
        G[i] = [G[i][k] + c * G[j][k] for k in range(g)]
    return tuple(tuple(r) for r in G)


def approx_in_sl(H, ell: int, k: int, max_param: float = 1e8) -> FracMatrix:
    """G in SL_g(Z[1/ell]) close to H: factor H into transvections, round each to ell^-k."""
    H = np.asarray(H, dtype=float)
    g = H.shape[0]
    if H.shape != (g, g):
        raise ValueError("H must be square")
    if abs(np.linalg.det(H) - 1) > 1e-9:
        raise ValueError(f"det H = {np.linalg.det(H)} is not 1")
    if g == 1:
        return ((Fraction(1),),)
    scale = ell**k
    factors = [(i, j, Fraction(round(c * scale), scale)) for i, j, c in _transvection_factor(H, max_param)]
    factors = [(i, j, c) for i, j, c in factors if c]
    G = _exact_transvection_product(g, factors)
    if _frac_det(G) != 1:
        raise IntegrityError("product of transvections lost determinant 1")
    return G


def max_abs_diff(G, H) -> float:
    return float(np.max(np.abs(np.array(G, dtype=float) - np.asarray(H, dtype=float))))


def unique_argmin(S, A) -> HalfIntegralMatrix | None:
    vals = sorted((Q.trace_against(A), Q) for Q in S)
    if len(vals) > 1 and vals[0][0] == vals[1][0]:
        return None
    return vals[0][1]


def _ell_content(A, ell):
    while all(x % ell == 0 for r in A for x in r):
        A = [[x // ell for x in r] for r in A]
    return A


def find_witness_matrix(S, ell: int, seed=0, k0: int = 8, steps: int = 6) -> SymPosDefIntMatrix:
    """A in Det_{ell,g} whose trace pairing has a unique minimizer on S.

    Target P = I + E from the cone sample, written as P = L L^t; G approximates
    L / det(L)^(1/g) in SL_g(Z[1/ell]) and A is ell^(2K) G G^t with ell^K the
    denominator of G.  The argmin is checked exactly; precision k grows by 8
    on failure.
    """
    S = list(S)
    if not S:
        raise ValueError("support must be nonempty")
    g = S[0].g
    if len(S) == 1:
        return next(enumerate_detl(g, ell, 0))
    E = minimizer_cone_sample(S, seed)
    P = np.eye(g) + np.array(E, dtype=float)
    L = np.linalg.cholesky(P)
    H = L / np.linalg.det(L) ** (1.0 / g)
    k = k0
    for _ in range(steps):
        G = approx_in_sl(H, ell, k)
        K = 0
        while any((x * ell**K).denominator != 1 for r in G for x in r):
            K += 1
        Gi = [[int(x * ell**K) for x in r] for r in G]
        A = [[sum(Gi[i][t] * Gi[j][t] for t in range(g)) for j in range(g)] for i in range(g)]
        A = SymPosDefIntMatrix(tuple(map(tuple, _ell_content(A, ell))))
        if unique_argmin(S, A.entries) is not None:
            d = A.det
            while d % ell == 0:
                d //= ell
            if d != 1:
                raise IntegrityError(f"witness determinant {A.det} is not a power of {ell}")
            return A
        k += 8
    raise SearchFailure(f"no witness with unique minimizer up to precision {ell}^-{k - 8}", stage="find_witness_matrix")


def nonvanishing_witness(f: FormalQExpansion, ell: int, seed=0):
    """(A, n, c0): the q^n coefficient of the pullback under A is the single c(Q_0) = c0 != 0."""
    if f.is_zero():
        raise ValueError("the zero expansion has no nonvanishing witness")
    S = f.support()
    A = find_witness_matrix(S, ell, seed)
    Q0 = unique_argmin(S, A.entries)
    n = Q0.trace_against(A.entries)
    c0 = f.coeffs[Q0]
    series = pullback(f, A)
    if series.terms.get(n) != c0 or series.leading() != (n, c0):
        raise IntegrityError(f"pullback coefficient at q^{n} is {series.terms.get(n)}, expected {c0}")
    return A, n, c0
