"""Smith normal form and the maps from Y_0(det A) points to products of curves.

For a positive definite symmetric integer matrix A with elementary divisors
d_1 | ... | d_g and a point (E, C) with C cyclic of order N = det A, the
principally polarized quotient of E^g attached to A is, forgetting the
polarization, E/((N/d_1)C) x ... x E/((N/d_g)C).  The polarization itself is
never built; ``kernel_order`` supplies the degree count that makes it
principal.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd, prod

from .cm_curves import CMCurve, MarkedSubgroup, is_cyclic, multiple, quotient
from .errors import IntegrityError
from .products import ProductVariety

Matrix = tuple[tuple[int, ...], ...]


def det_int(M) -> int:
    """Exact determinant of a square integer matrix (Bareiss elimination)."""
    n = len(M)
    if n == 0:
        return 1
    a = [list(r) for r in M]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if a[k][k] == 0:
            for i in range(k + 1, n):
                if a[i][k]:
                    a[k], a[i] = a[i], a[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) // prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def _matmul(A, B):
    return tuple(
        tuple(sum(A[i][k] * B[k][j] for k in range(len(B))) for j in range(len(B[0])))
        for i in range(len(A))
    )


def _identity(g: int) -> Matrix:
    return tuple(tuple(int(i == j) for j in range(g)) for i in range(g))


@dataclass(frozen=True)
class SymPosDefIntMatrix:
    entries: Matrix

    def __post_init__(self):
        rows = tuple(tuple(int(x) for x in r) for r in self.entries)
        g = len(rows)
        if g == 0 or any(len(r) != g for r in rows):
            raise ValueError("matrix must be square and nonempty")
        for i in range(g):
            for j in range(i):
                if rows[i][j] != rows[j][i]:
                    raise ValueError("matrix is not symmetric")
        for k in range(1, g + 1):
            if det_int([r[:k] for r in rows[:k]]) <= 0:
                raise ValueError("matrix is not positive definite")
        object.__setattr__(self, "entries", rows)

    @classmethod
    def diag(cls, ds) -> "SymPosDefIntMatrix":
        g = len(ds)
        return cls(tuple(tuple(ds[i] if i == j else 0 for j in range(g)) for i in range(g)))

    @property
    def g(self) -> int:
        return len(self.entries)

    @property
    def det(self) -> int:
        return det_int(self.entries)

    def is_diagonal(self) -> bool:
        return all(self.entries[i][j] == 0 for i in range(self.g) for j in range(self.g) if i != j)

    def diagonal(self) -> tuple[int, ...]:
        return tuple(self.entries[i][i] for i in range(self.g))

    def to_json(self):
        return [list(r) for r in self.entries]


def as_matrix(A) -> SymPosDefIntMatrix:
    return A if isinstance(A, SymPosDefIntMatrix) else SymPosDefIntMatrix(tuple(map(tuple, A)))


@dataclass(frozen=True)
class SNFResult:
    U: Matrix
    D: Matrix
    V: Matrix

    @property
    def divisors(self) -> tuple[int, ...]:
        return tuple(self.D[i][i] for i in range(len(self.D)))


def _snf(rows) -> SNFResult:
    """A = U*D*V for a square nonsingular integer matrix.

    Pivot is the smallest nonzero entry in absolute value; rows are cleared
    before columns.  Every row operation on M is undone on the columns of U,
    every column operation on the rows of V, so U*M*V = A throughout.
    """
    g = len(rows)
    M = [list(r) for r in rows]
    U = [list(r) for r in _identity(g)]
    V = [list(r) for r in _identity(g)]

    def swap_rows(i, j):
        M[i], M[j] = M[j], M[i]
        for r in U:
            r[i], r[j] = r[j], r[i]

    def swap_cols(i, j):
        for r in M:
            r[i], r[j] = r[j], r[i]
        V[i], V[j] = V[j], V[i]

    def add_row(i, j, c):  # row_i += c * row_j
        for k in range(g):
            M[i][k] += c * M[j][k]
        for r in U:
            r[j] -= c * r[i]

    def add_col(j, i, c):  # col_j += c * col_i
        for r in M:
            r[j] += c * r[i]
        for k in range(g):
            V[i][k] -= c * V[j][k]

    for t in range(g):
        while True:
            nz = [(abs(M[i][j]), i, j) for i in range(t, g) for j in range(t, g) if M[i][j]]
            if not nz:
                raise ValueError("matrix is singular")
            _, i, j = min(nz)
            if i != t:
                swap_rows(t, i)
            if j != t:
                swap_cols(t, j)
            p = M[t][t]
            dirty = False
            for i in range(t + 1, g):
                if M[i][t]:
                    add_row(i, t, -(M[i][t] // p))
                    dirty = dirty or M[i][t] != 0
            for j in range(t + 1, g):
                if M[t][j]:
                    add_col(j, t, -(M[t][j] // p))
                    dirty = dirty or M[t][j] != 0
            if dirty:
                continue
            bad = next(
                (i for i in range(t + 1, g) for j in range(t + 1, g) if M[i][j] % p),
                None,
            )
            if bad is None:
                break
            add_row(t, bad, 1)
        if M[t][t] < 0:
            for k in range(g):
                M[t][k] = -M[t][k]
            for r in U:
                r[t] = -r[t]
    res = SNFResult(tuple(map(tuple, U)), tuple(map(tuple, M)), tuple(map(tuple, V)))
    if _matmul(_matmul(res.U, res.D), res.V) != tuple(map(tuple, rows)):
        raise IntegrityError("Smith normal form does not reproduce the input")
    return res


def smith_normal_form(A) -> SNFResult:
    return _snf(as_matrix(A).entries)


def elementary_divisors(A) -> tuple[int, ...]:
    return smith_normal_form(A).divisors


def kernel_order(A, N: int) -> int:
    """#{v in (Z/N)^g : A v = 0 mod N}, asserted equal to det A.

    With A = U D V and U, V invertible mod N, the count is prod gcd(d_i, N).
    """
    A = as_matrix(A)
    if A.det != N:
        raise ValueError(f"det A = {A.det} but N = {N}")
    count = prod(gcd(d, N) for d in elementary_divisors(A))
    if count != A.det:
        raise IntegrityError(f"kernel has order {count}, expected det A = {A.det}")
    return count


def enumerate_detl(g: int, ell: int, max_power: int, entry_bound: int | None = None):
    """Symmetric PD g x g matrices with det = ell^k, k <= max_power, |entries| <= entry_bound.

    The bound defaults to ell^max_power.  The last diagonal entry is solved
    for, since det is affine in it.  Yields in (det, row-major entries) order.
    """
    if g < 1:
        raise ValueError("g must be >= 1")
    B = ell**max_power if entry_bound is None else entry_bound
    targets = [ell**k for k in range(max_power + 1)]
    free = [(i, j) for i in range(g) for j in range(i, g) if (i, j) != (g - 1, g - 1)]
    found = []

    def leading_ok(M, k):
        return det_int([r[:k] for r in M[:k]]) > 0

    def rec(pos, M):
        if pos == len(free):
            M[g - 1][g - 1] = 0
            rest = det_int(M)
            minor = det_int([r[: g - 1] for r in M[: g - 1]])
            for T in targets:
                if (T - rest) % minor:
                    continue
                a = (T - rest) // minor
                if 1 <= a <= B:
                    M[g - 1][g - 1] = a
                    found.append((T, tuple(tuple(r) for r in M)))
            return
        i, j = free[pos]
        values = range(1, B + 1) if i == j else range(-B, B + 1)
        for v in values:
            M[i][j] = M[j][i] = v
            # setting A_ii completes the leading (i+1)-block: test its minor
            if j == i and i < g - 1 and not leading_ok(M, i + 1):
                continue
            rec(pos + 1, M)
        M[i][j] = M[j][i] = 0

    rec(0, [[0] * g for _ in range(g)])
    found.sort()
    for _, rows in found:
        yield SymPosDefIntMatrix(rows)


def _check_point(E: CMCurve, C: MarkedSubgroup):
    if C.parent.lattice != E.lattice:
        raise ValueError("subgroup does not belong to this curve")
    if not is_cyclic(E.lattice, C.witness):
        raise ValueError("subgroup is not cyclic")


def _factors(E: CMCurve, C: MarkedSubgroup, ds) -> tuple[CMCurve, ...]:
    N = C.modulus
    return tuple(quotient(E, multiple(C, N // d)) for d in ds)


def psi_general(E: CMCurve, C: MarkedSubgroup, A) -> ProductVariety:
    """E/((N/d_1)C) x ... x E/((N/d_g)C) with a principality certificate."""
    A = as_matrix(A)
    _check_point(E, C)
    N = C.modulus
    if A.det != N:
        raise ValueError(f"det A = {A.det} does not match the subgroup order {N}")
    ds = elementary_divisors(A)
    cert = {"matrix": A.to_json(), "elementary_divisors": list(ds), "kernel_order": kernel_order(A, N)}
    return ProductVariety(_factors(E, C, ds), cert)


def psi_diag(E: CMCurve, C: MarkedSubgroup, A) -> ProductVariety:
    """Factors E/((N/d_i)C) in the order of the diagonal of A.

    Each d_i must divide N = |C|; det A = N is the usual case, but the
    descending-chain construction feeds points of larger level.
    """
    A = as_matrix(A)
    if not A.is_diagonal():
        raise ValueError("psi_diag needs a diagonal matrix")
    _check_point(E, C)
    N = C.modulus
    ds = A.diagonal()
    if any(N % d for d in ds):
        raise ValueError(f"diagonal entries {ds} must divide the subgroup order {N}")
    return ProductVariety(_factors(E, C, ds))
