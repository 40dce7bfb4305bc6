"""The group (O_K/qO_K)^x / (Z/qZ)^x for a prime q inert in K.

O_K/qO_K is the field F_{q^2} = F_q[w], and the quotient by F_q^x is
cyclic of order q + 1.  An element is stored by its normalized
representative x + y*w: y = 1 when y != 0 mod q, otherwise (1, 0).
The integer ``index`` (x for y = 1, q for the class of 1) is a bijection
onto {0, ..., q} and is the canonical sort key.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gcd

from sympy import isprime, primerange

from .errors import SearchFailure
from .quad_orders import Discriminant, QuadInteger, as_disc, kronecker_symbol


@dataclass(frozen=True, order=True)
class TorsorGroup:
    disc: Discriminant
    q: int

    def __post_init__(self):
        if not isprime(self.q):
            raise ValueError(f"{self.q} is not prime")
        if kronecker_symbol(self.disc.d_K, self.q) != -1:
            raise ValueError(f"{self.q} is not inert in Q(sqrt({self.disc.d_K}))")

    @property
    def order(self) -> int:
        return self.q + 1

    def identity(self) -> "TorsorElement":
        return TorsorElement(self, 1, 0)

    def element(self, x: int, y: int) -> "TorsorElement":
        return TorsorElement.normalized(self, x, y)

    def from_index(self, i: int) -> "TorsorElement":
        if i == self.q:
            return self.identity()
        return TorsorElement(self, i % self.q, 1)

    def elements(self) -> list["TorsorElement"]:
        return [self.from_index(i) for i in range(self.q + 1)]

    def transversal(self) -> list[QuadInteger]:
        """One element of O_K prime to q over each class, in index order."""
        return [e.lift() for e in self.elements()]


@dataclass(frozen=True)
class TorsorElement:
    group: TorsorGroup
    x: int
    y: int

    @classmethod
    def normalized(cls, group: TorsorGroup, x: int, y: int) -> "TorsorElement":
        q = group.q
        x, y = x % q, y % q
        if y:
            return cls(group, x * pow(y, -1, q) % q, 1)
        if x == 0:
            raise ValueError("zero is not a unit mod q")
        return cls(group, 1, 0)

    @property
    def index(self) -> int:
        return self.x if self.y else self.group.q

    def __lt__(self, other):
        return (self.group, self.index) < (other.group, other.index)

    def _same(self, other: "TorsorElement"):
        if self.group != other.group:
            raise ValueError("elements of different torsor groups")

    def __mul__(self, other: "TorsorElement") -> "TorsorElement":
        self._same(other)
        d = self.group.disc.d_K
        n0 = self.group.disc.w_norm
        x = self.x * other.x - self.y * other.y * n0
        y = self.x * other.y + self.y * other.x + self.y * other.y * d
        return TorsorElement.normalized(self.group, x, y)

    def inv(self) -> "TorsorElement":
        # the conjugate differs from the inverse by the norm, which lies in F_q^x
        d = self.group.disc.d_K
        return TorsorElement.normalized(self.group, self.x + self.y * d, -self.y)

    def __pow__(self, n: int) -> "TorsorElement":
        base = self if n >= 0 else self.inv()
        n = abs(n) % self.group.order
        result = self.group.identity()
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def is_identity(self) -> bool:
        return self.y == 0

    def lift(self) -> QuadInteger:
        return QuadInteger(self.x, self.y, self.group.disc.d_K)

    def __repr__(self):
        return f"TorsorElement(q={self.group.q}, index={self.index})"


def embed(alpha: QuadInteger, G: TorsorGroup) -> TorsorElement:
    """Class of alpha in G; alpha must be prime to q."""
    if alpha.d != G.disc.d_K:
        raise ValueError("alpha lies in a different field")
    if alpha.norm() % G.q == 0:
        raise ValueError(f"{alpha} is not prime to q = {G.q}")
    return TorsorElement.normalized(G, alpha.x, alpha.y)


def mul(a: TorsorElement, b: TorsorElement) -> TorsorElement:
    return a * b


def inv(a: TorsorElement) -> TorsorElement:
    return a.inv()


def order(G: TorsorGroup) -> int:
    return G.order


def is_gth_power(t: TorsorElement, g: int) -> bool:
    k = gcd(g, t.group.order)
    return (t ** (t.group.order // k)).is_identity()


def gth_roots(t: TorsorElement, g: int) -> list[TorsorElement]:
    """Every b with b^g = t, sorted by index."""
    if g < 1:
        raise ValueError("g must be >= 1")
    if g == 1:
        return [t]
    if not is_gth_power(t, g):
        return []
    return [b for b in t.group.elements() if b**g == t]


def find_q(d, g: int, alpha: QuadInteger, count: int, bound: int = 100_000) -> list[int]:
    """The first ``count`` primes q <= bound with q inert, q = -1 mod g, alpha a g-th power mod q."""
    disc = as_disc(d)
    ell = alpha.norm()
    if not isprime(ell) or kronecker_symbol(disc.d_K, ell) != 1:
        raise ValueError(f"N(alpha) = {ell} is not a prime split in K")
    found = []
    for q in primerange(2, bound + 1):
        if len(found) == count:
            break
        if kronecker_symbol(disc.d_K, q) != -1 or (q + 1) % g:
            continue
        G = TorsorGroup(disc, q)
        if is_gth_power(embed(alpha, G), g):
            found.append(q)
    if len(found) < count:
        raise SearchFailure(
            f"found only {len(found)} of {count} primes q <= {bound}",
            stage="find_q",
            found=len(found),
        )
    return found
