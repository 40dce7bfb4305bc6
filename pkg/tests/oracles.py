"""Brute-force reference computations, written independently of the library.

Nothing here imports the algorithm it checks; only plain data types cross
the boundary.
"""

from __future__ import annotations

import itertools
from fractions import Fraction
from math import gcd

import numpy as np
from sympy import primefactors


def has_square_root(d: int, p: int) -> bool:
    return any((x * x - d) % p == 0 for x in range(p))


def kronecker_by_roots(d: int, p: int) -> int:
    """Splitting type of p in Q(sqrt d) from roots of x^2 + x + (1-d)/4 or x^2 - d/4."""
    if d % 4 == 1:
        c = (1 - d) // 4
        roots = sum(1 for x in range(p) if (x * x + x + c) % p == 0)
    else:
        roots = sum(1 for x in range(p) if (x * x - d // 4) % p == 0)
    return {0: -1, 1: 0, 2: 1}[roots]


def reduced_forms(D: int) -> list[tuple[int, int, int]]:
    """Primitive reduced positive definite forms of discriminant D, by a plain scan over a and b."""
    out = []
    a = 1
    while 3 * a * a <= -D:
        for b in range(-a + 1, a + 1):
            if (b * b - D) % (4 * a):
                continue
            c = (b * b - D) // (4 * a)
            if c < a or (c == a and b < 0):
                continue
            if gcd(gcd(a, abs(b)), c) == 1:
                out.append((a, b, c))
        a += 1
    return out


def class_number_formula(d_K: int, h_K: int, f: int) -> int:
    """h(O_f) = h_K * f * prod_{p | f} (1 - (d_K/p)/p), units of O_K being +-1."""
    h = Fraction(h_K * f)
    p = 2
    n = f
    while n > 1:
        if n % p == 0:
            h *= 1 - Fraction(kronecker_by_roots(d_K, p), p)
            while n % p == 0:
                n //= p
        p += 1
    return int(h)


def torsor_classes(d_K: int, q: int) -> int:
    """|F_q[s]/(s^2 - d_K)^x / F_q^x| counted by normalizing the first nonzero coordinate."""
    reps = set()
    for a in range(q):
        for b in range(q):
            if (a, b) == (0, 0):
                continue
            lead = a if a else b
            inv = pow(lead, -1, q)
            reps.add((a * inv % q, b * inv % q))
    return len(reps)


def brute_kernel_count(A, N: int) -> int:
    """#{v in (Z/N)^g : A v = 0 mod N} by vectorized enumeration."""
    A = np.array(A, dtype=np.int64)
    g = A.shape[0]
    grids = np.stack(np.meshgrid(*([np.arange(N, dtype=np.int64)] * g), indexing="ij"), axis=-1).reshape(-1, g)
    images = grids @ A.T % N
    return int(np.count_nonzero(~images.any(axis=1)))


def ldl_psd(M) -> bool:
    """Exact semidefiniteness by symmetric elimination; a zero pivot forces a zero row."""
    n = len(M)
    a = [[Fraction(x) for x in r] for r in M]
    for k in range(n):
        if a[k][k] < 0:
            return False
        if a[k][k] == 0:
            if any(a[k][j] != 0 for j in range(k + 1, n)):
                return False
            continue
        for i in range(k + 1, n):
            r = a[i][k] / a[k][k]
            for j in range(k, n):
                a[i][j] -= r * a[k][j]
    return True


def brute_half_integral(g: int, t: int) -> set[tuple[int, ...]]:
    """Flattened 2Q for PSD half-integral Q with tr Q <= t; off-diagonals scanned over |2Q_ij| <= t."""
    out = set()
    off = [(i, j) for i in range(g) for j in range(i + 1, g)]
    for diag in itertools.product(range(t + 1), repeat=g):
        if sum(diag) > t:
            continue
        for bs in itertools.product(range(-t, t + 1), repeat=len(off)):
            M = [[0] * g for _ in range(g)]
            for i in range(g):
                M[i][i] = 2 * diag[i]
            for (i, j), b in zip(off, bs):
                M[i][j] = M[j][i] = b
            if ldl_psd(M):
                out.add(tuple(x for r in M for x in r))
    return out


def _omega_multiple_inside(basis, d_K: int, f: int) -> bool:
    """Whether f*w*L lies in L, L given by a rational basis in (1, w) coordinates.

    w*(x + y w) = -y n0 + (x + y d) w with n0 = (d^2 - d)/4; membership is
    tested by solving against the basis with Fractions.
    """
    (a, b), (c, e) = [[Fraction(x) for x in r] for r in basis]
    det = a * e - b * c
    n0 = (d_K * d_K - d_K) // 4

    def inside(v):
        x, y = v
        s = (x * e - y * c) / det
        t = (y * a - x * b) / det
        return s.denominator == 1 and t.denominator == 1

    return all(inside((-f * y * n0, f * (x + y * d_K))) for x, y in ((a, b), (c, e)))


def is_conductor(basis, d_K: int, F: int) -> bool:
    """The f with f*w*L in L form the ideal cZ, c the conductor; so c = F iff F works and no F/p does."""
    if not _omega_multiple_inside(basis, d_K, F):
        return False
    return not any(_omega_multiple_inside(basis, d_K, F // p) for p in primefactors(F))


def determinantal_divisors(A) -> list[int]:
    """d_1 ... d_g from gcds of k x k minors (D_k / D_{k-1}), via sympy determinants."""
    from sympy import Matrix

    M = Matrix(A)
    g = M.shape[0]
    D = [1]
    for k in range(1, g + 1):
        acc = 0
        for rows in itertools.combinations(range(g), k):
            for cols in itertools.combinations(range(g), k):
                acc = gcd(acc, int(M.extract(list(rows), list(cols)).det()))
        D.append(acc)
    return [D[k] // D[k - 1] for k in range(1, g + 1)]


def brute_detl(g: int, ell: int, max_power: int, bound: int) -> set[tuple[int, ...]]:
    """Flattened symmetric PD matrices with |entries| <= bound and det a power of ell, by plain scan."""
    from sympy import Matrix

    dets = {ell**k for k in range(max_power + 1)}
    pos = [(i, j) for i in range(g) for j in range(i, g)]
    out = set()
    for vals in itertools.product(range(-bound, bound + 1), repeat=len(pos)):
        M = [[0] * g for _ in range(g)]
        for (i, j), v in zip(pos, vals):
            M[i][j] = M[j][i] = v
        if any(M[i][i] <= 0 for i in range(g)):
            continue
        minors = [Matrix([r[:k] for r in M[:k]]).det() for k in range(1, g + 1)]
        if all(m > 0 for m in minors) and int(minors[-1]) in dets:
            out.add(tuple(x for r in M for x in r))
    return out
