"""Imaginary quadratic fields, their orders, and binary quadratic forms.

Elements of O_K are written x + y*w with w = (d_K + sqrt(d_K))/2, so that
w satisfies w^2 = d_K*w - (d_K^2 - d_K)/4.  The order of conductor f is
Z + f*O_K = Z[f*w], with discriminant f^2 * d_K.

Ideal classes are carried as reduced primitive positive definite forms,
one per class, so class equality is tuple equality.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd, isqrt

from sympy import isprime, primerange

from .errors import SearchFailure, UnitsError


def _squarefree(n: int) -> bool:
    n = abs(n)
    if n == 0:
        return False
    p = 2
    while p * p <= n:
        if n % (p * p) == 0:
            return False
        if n % p == 0:
            n //= p
        p += 1
    return True


def is_fundamental(d: int) -> bool:
    """True iff d is a negative fundamental discriminant."""
    if d >= 0:
        return False
    if d % 4 == 1:
        return _squarefree(d)
    if d % 4 == 0:
        m = d // 4
        return m % 4 in (2, 3) and _squarefree(m)
    return False


@dataclass(frozen=True, order=True)
class Discriminant:
    d_K: int

    def __post_init__(self):
        if not isinstance(self.d_K, int) or not is_fundamental(self.d_K):
            raise ValueError(f"{self.d_K!r} is not a negative fundamental discriminant")

    @property
    def w_norm(self) -> int:
        """N(w) = (d_K^2 - d_K)/4; w satisfies w^2 = d_K*w - N(w)."""
        return (self.d_K * self.d_K - self.d_K) // 4

    @property
    def has_extra_units(self) -> bool:
        return self.d_K in (-3, -4)

    def require_plain_units(self):
        if self.has_extra_units:
            raise UnitsError(f"d_K = {self.d_K} has O_K^x larger than {{+1, -1}}")

    def __int__(self):
        return self.d_K


def as_disc(d) -> Discriminant:
    return d if isinstance(d, Discriminant) else Discriminant(int(d))


@dataclass(frozen=True, order=True)
class QuadOrder:
    disc: Discriminant
    conductor: int = 1

    def __post_init__(self):
        if self.conductor < 1:
            raise ValueError("conductor must be a positive integer")

    @property
    def discriminant(self) -> int:
        return self.conductor**2 * self.disc.d_K

    def contains(self, a: "QuadInteger") -> bool:
        return a.y % self.conductor == 0

    def __str__(self):
        return f"O(d_K={self.disc.d_K}, f={self.conductor})"


@dataclass(frozen=True, order=True)
class QuadInteger:
    """x + y*w in O_K for the field of discriminant d."""

    x: int
    y: int
    d: int

    @classmethod
    def rational(cls, n: int, d) -> "QuadInteger":
        return cls(n, 0, int(d))

    @classmethod
    def from_half_sqrt(cls, a: int, b: int, d) -> "QuadInteger":
        """The element (a + b*sqrt(d))/2."""
        d = int(d)
        # (a + b sqrt d)/2 = (a - b d)/2 + b w
        if (a - b * d) % 2:
            raise ValueError(f"({a} + {b} sqrt({d}))/2 is not integral")
        return cls((a - b * d) // 2, b, d)

    def _check(self, other):
        if not isinstance(other, QuadInteger):
            other = QuadInteger(int(other), 0, self.d)
        if other.d != self.d:
            raise ValueError("elements of different fields")
        return other

    def __add__(self, other):
        other = self._check(other)
        return QuadInteger(self.x + other.x, self.y + other.y, self.d)

    __radd__ = __add__

    def __neg__(self):
        return QuadInteger(-self.x, -self.y, self.d)

    def __sub__(self, other):
        return self + (-self._check(other))

    def __mul__(self, other):
        other = self._check(other)
        n0 = (self.d * self.d - self.d) // 4
        x = self.x * other.x - self.y * other.y * n0
        y = self.x * other.y + self.y * other.x + self.y * other.y * self.d
        return QuadInteger(x, y, self.d)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if n < 0:
            raise ValueError("negative powers are not integral")
        result = QuadInteger(1, 0, self.d)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def conj(self) -> "QuadInteger":
        # conj(w) = d - w
        return QuadInteger(self.x + self.y * self.d, -self.y, self.d)

    def norm(self) -> int:
        n0 = (self.d * self.d - self.d) // 4
        return self.x * self.x + self.d * self.x * self.y + n0 * self.y * self.y

    def trace(self) -> int:
        return 2 * self.x + self.d * self.y

    def half_sqrt_coords(self) -> tuple[int, int]:
        """(a, b) with self = (a + b*sqrt(d))/2."""
        return self.trace(), self.y

    def __str__(self):
        a, b = self.half_sqrt_coords()
        return f"({a} + {b}*sqrt({self.d}))/2"


def kronecker_symbol(d: int, p: int) -> int:
    """Splitting type of the prime p in Q(sqrt(d)): +1 split, -1 inert, 0 ramified."""
    if not isprime(p):
        raise ValueError(f"{p} is not prime")
    if p == 2:
        if d % 2 == 0:
            return 0
        return 1 if d % 8 in (1, 7) else -1
    r = d % p
    if r == 0:
        return 0
    return 1 if pow(r, (p - 1) // 2, p) == 1 else -1


def find_field(p: int | None, ell: int | None, search_bound: int = 10_000) -> Discriminant:
    """Smallest |d_K| with O_K^x = {+-1}, p split (if given) and ell inert (if given)."""
    if p is not None and ell is not None and p == ell:
        raise ValueError("the split prime p and the inert prime ell must differ")
    for q in (p, ell):
        if q is not None and not isprime(q):
            raise ValueError(f"{q} is not prime")
    for n in range(3, search_bound + 1):
        d = -n
        if not is_fundamental(d) or d in (-3, -4):
            continue
        if p is not None and kronecker_symbol(d, p) != 1:
            continue
        if ell is not None and kronecker_symbol(d, ell) != -1:
            continue
        return Discriminant(d)
    raise SearchFailure(
        f"no admissible d_K with |d_K| <= {search_bound} (p={p}, ell={ell})",
        stage="find_field",
        found=0,
    )


def elements_of_norm(disc: Discriminant, n: int) -> list[QuadInteger]:
    """All x + y*w with norm n, ordered by (b, a) in the (a + b sqrt d)/2 form."""
    d = disc.d_K
    out = []
    # 4 N = a^2 + b^2 |d|
    b = 0
    while b * b * -d <= 4 * n:
        rest = 4 * n - b * b * -d
        a = isqrt(rest)
        if a * a == rest:
            for sa in {a, -a}:
                for sb in {b, -b}:
                    if (sa - sb * d) % 2 == 0:
                        out.append(QuadInteger.from_half_sqrt(sa, sb, d))
        b += 1
    return sorted(set(out), key=lambda e: (e.half_sqrt_coords()[1], e.half_sqrt_coords()[0]))


def find_split_principal(d, bound: int = 10_000, exclude=()) -> tuple[int, QuadInteger]:
    """Smallest split prime ell <= bound that is the norm of some alpha in O_K.

    The returned alpha is canonical: positive sqrt(d)-coefficient and the
    smallest nonnegative trace among such elements.
    """
    disc = as_disc(d)
    disc.require_plain_units()
    exclude = set(exclude)
    for ell in primerange(2, bound + 1):
        if ell in exclude or kronecker_symbol(disc.d_K, ell) != 1:
            continue
        cands = [a for a in elements_of_norm(disc, ell) if a.y > 0 and a.trace() >= 0]
        if cands:
            return ell, min(cands, key=lambda a: (a.trace(), a.y))
    raise SearchFailure(
        f"no split principal prime <= {bound} for d_K = {disc.d_K}",
        stage="find_split_principal",
        found=0,
    )


@dataclass(frozen=True, order=True)
class QuadraticForm:
    a: int
    b: int
    c: int

    @property
    def discriminant(self) -> int:
        return self.b * self.b - 4 * self.a * self.c

    def is_primitive(self) -> bool:
        return gcd(gcd(self.a, self.b), self.c) == 1

    def is_reduced(self) -> bool:
        a, b, c = self.a, self.b, self.c
        if not (abs(b) <= a <= c):
            return False
        if (abs(b) == a or a == c) and b < 0:
            return False
        return True

    def reduce(self) -> "QuadraticForm":
        a, b, c = self.a, self.b, self.c
        if a <= 0 or self.discriminant >= 0:
            raise ValueError(f"{self} is not positive definite")
        while True:
            # bring b into (-a, a]
            if not (-a < b <= a):
                r = (a - b) // (2 * a)
                c = a * r * r + b * r + c
                b = b + 2 * r * a
            if a > c:
                a, b, c = c, -b, a
                continue
            if a == c and b < 0:
                b = -b
            return QuadraticForm(a, b, c)

    def inverse(self) -> "QuadraticForm":
        return QuadraticForm(self.a, -self.b, self.c).reduce()

    def compose(self, other: "QuadraticForm") -> "QuadraticForm":
        """Gauss composition of primitive forms of equal discriminant (reduced output)."""
        if self.discriminant != other.discriminant:
            raise ValueError(
                f"discriminant mismatch: {self.discriminant} vs {other.discriminant}"
            )
        a1, b1, c1 = self.a, self.b, self.c
        a2, b2, c2 = other.a, other.b, other.c
        if a1 > a2:
            a1, b1, c1, a2, b2, c2 = a2, b2, c2, a1, b1, c1
        s = (b1 + b2) // 2
        n = b2 - s
        if a2 % a1 == 0:
            y1, dd = 0, a1
        else:
            dd, u, _ = _xgcd(a2, a1)
            y1 = u
        if s % dd == 0:
            y2, x2, d1 = -1, 0, dd
        else:
            d1, u, v = _xgcd(s, dd)
            x2, y2 = u, -v
        v1 = a1 // d1
        v2 = a2 // d1
        r = (y1 * y2 * n - x2 * c2) % v1
        b3 = b2 + 2 * v2 * r
        a3 = v1 * v2
        c3 = (c2 * d1 + r * (b2 + v2 * r)) // v1
        return QuadraticForm(a3, b3, c3).reduce()

    def __mul__(self, other):
        return self.compose(other)

    def __pow__(self, n: int):
        if n < 0:
            return self.inverse() ** (-n)
        result = principal_form(self.discriminant)
        base = self.reduce()
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def as_tuple(self):
        return (self.a, self.b, self.c)

    def __str__(self):
        return f"({self.a}, {self.b}, {self.c})"


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    """(g, u, v) with u*a + v*b = g = gcd(a, b) >= 0."""
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def principal_form(D: int) -> QuadraticForm:
    k = D % 2
    return QuadraticForm(1, k, (k * k - D) // 4)


@dataclass(frozen=True, order=True)
class IdealClass:
    form: QuadraticForm
    order: QuadOrder

    def __post_init__(self):
        if self.form.discriminant != self.order.discriminant:
            raise ValueError("form discriminant does not match the order")
        if not (self.form.is_reduced() and self.form.is_primitive()):
            raise ValueError(f"{self.form} is not a reduced primitive form")

    def __mul__(self, other: "IdealClass") -> "IdealClass":
        if self.order != other.order:
            raise ValueError("ideal classes of different orders")
        return IdealClass(self.form * other.form, self.order)

    def inverse(self) -> "IdealClass":
        return IdealClass(self.form.inverse(), self.order)

    @property
    def is_principal(self) -> bool:
        return self.form == principal_form(self.order.discriminant)


def principal_class(order: QuadOrder) -> IdealClass:
    return IdealClass(principal_form(order.discriminant), order)


def reduce(form: QuadraticForm) -> QuadraticForm:
    return form.reduce()


def compose(f1: QuadraticForm, f2: QuadraticForm) -> QuadraticForm:
    return f1.compose(f2)


def class_group(order: QuadOrder) -> list[IdealClass]:
    """All reduced primitive forms of discriminant f^2 d_K, in lexicographic order."""
    D = order.discriminant
    out = []
    a = 1
    while 3 * a * a <= -D:
        for b in range(-a + 1, a + 1):
            if (b - D) % 2:
                continue
            num = b * b - D
            if num % (4 * a):
                continue
            c = num // (4 * a)
            if c < a or (b < 0 and a == c):
                continue
            if gcd(gcd(a, abs(b)), c) != 1:
                continue
            out.append(IdealClass(QuadraticForm(a, b, c), order))
        a += 1
    return out
