"""CM elliptic curves in the lattice model.

A curve is C/L for a lattice L inside K, written in coordinates over the
basis (1, w).  A finite subgroup of C/L is a superlattice W of L (the
subgroup is W/L) and the quotient curve is C/W.  An endomorphism alpha
sends W/L to (alpha*W + L)/L.

For q inert in K and prime to the conductor f of End(C/L), L/qL is a
one-dimensional F_{q^2}-vector space, so the order-q subgroups form a
torsor under (O_K/q)^x / (Z/q)^x.  Coordinates are taken relative to the
subgroup whose witness has the lexicographically smallest HNF basis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import gcd, lcm

from .errors import IntegrityError
from .quad_orders import (
    Discriminant,
    IdealClass,
    QuadInteger,
    QuadOrder,
    QuadraticForm,
    as_disc,
    kronecker_symbol,
)
from .torsor import TorsorElement, TorsorGroup, embed

Vec = tuple[Fraction, Fraction]


def _kmul(a: Vec, b: Vec, d: int) -> Vec:
    n0 = (d * d - d) // 4
    return (
        a[0] * b[0] - a[1] * b[1] * n0,
        a[0] * b[1] + a[1] * b[0] + a[1] * b[1] * d,
    )


def _knorm(a: Vec, d: int) -> Fraction:
    n0 = (d * d - d) // 4
    return a[0] * a[0] + d * a[0] * a[1] + n0 * a[1] * a[1]


def _hnf2(rows: list[list[int]]) -> tuple[tuple[int, int], tuple[int, int]]:
    """Row HNF [[a, b], [0, c]] (a, c > 0, 0 <= b < c) of integer rows spanning Z-rank 2."""
    rows = [list(r) for r in rows if r[0] or r[1]]
    while sum(1 for r in rows if r[0]) > 1:
        rows.sort(key=lambda r: (r[0] == 0, abs(r[0])))
        p = rows[0]
        for r in rows[1:]:
            if r[0]:
                k = r[0] // p[0]
                r[0] -= k * p[0]
                r[1] -= k * p[1]
    piv = [r for r in rows if r[0]]
    if not piv:
        raise ValueError("generators do not span a rank-2 lattice")
    a, b = piv[0]
    c = 0
    for r in rows:
        if not r[0]:
            c = gcd(c, r[1])
    if c == 0:
        raise ValueError("generators do not span a rank-2 lattice")
    if a < 0:
        a, b = -a, -b
    return (a, b % c), (0, c)


@dataclass(frozen=True)
class Lattice:
    """A rank-2 Z-lattice in K, stored by its row Hermite normal form."""

    disc: Discriminant
    basis: tuple[Vec, Vec]

    def __hash__(self):
        # values are hashed constantly by the oracle caches; Fraction hashing is slow
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash((self.disc, self.basis))
            object.__setattr__(self, "_hash", h)
        return h

    @classmethod
    def from_generators(cls, disc, gens) -> "Lattice":
        disc = as_disc(disc)
        gens = [(Fraction(u), Fraction(v)) for u, v in gens]
        den = 1
        for u, v in gens:
            den = lcm(den, u.denominator, v.denominator)
        ints = [[int(u * den), int(v * den)] for u, v in gens]
        (a, b), (_, c) = _hnf2(ints)
        basis = ((Fraction(a, den), Fraction(b, den)), (Fraction(0), Fraction(c, den)))
        return cls(disc, basis)

    @classmethod
    def maximal_order(cls, disc) -> "Lattice":
        return cls.from_generators(disc, [(1, 0), (0, 1)])

    @classmethod
    def from_form(cls, disc, form: QuadraticForm) -> "Lattice":
        """The ideal [a, (-b + sqrt(D))/2] attached to a primitive form of discriminant D."""
        disc = as_disc(disc)
        D = form.discriminant
        f2, r = divmod(D, disc.d_K)
        f = int(round(abs(f2) ** 0.5))
        if r or f * f != f2:
            raise ValueError(f"form discriminant {D} is not f^2 * {disc.d_K}")
        # sqrt(D) = f*(2w - d_K)
        return cls.from_generators(disc, [(form.a, 0), (Fraction(-form.b - f * disc.d_K, 2), f)])

    @property
    def d(self) -> int:
        return self.disc.d_K

    def det(self) -> Fraction:
        (a, b), (c, e) = self.basis
        return a * e - b * c

    def coords(self, v: Vec) -> Vec:
        """Coordinates of v in this lattice's basis."""
        (a, b), (c, e) = self.basis
        det = a * e - b * c
        return ((v[0] * e - v[1] * c) / det, (v[1] * a - v[0] * b) / det)

    def contains(self, v: Vec) -> bool:
        return all(x.denominator == 1 for x in self.coords(v))

    def contains_lattice(self, other: "Lattice") -> bool:
        return all(self.contains(v) for v in other.basis)

    def index_of(self, sub: "Lattice") -> int:
        """[self : sub] for a sublattice ``sub``."""
        if not self.contains_lattice(sub):
            raise ValueError("not a sublattice")
        r = abs(sub.det() / self.det())
        assert r.denominator == 1
        return int(r)

    def relative_matrix(self, sub: "Lattice") -> list[list[int]]:
        """Integer matrix whose rows are the basis of ``sub`` in this lattice's coordinates."""
        out = []
        for v in sub.basis:
            c = self.coords(v)
            if any(x.denominator != 1 for x in c):
                raise ValueError("not a sublattice")
            out.append([int(c[0]), int(c[1])])
        return out

    def scale(self, elt) -> "Lattice":
        if isinstance(elt, QuadInteger):
            elt = (Fraction(elt.x), Fraction(elt.y))
        elif not isinstance(elt, tuple):
            elt = (Fraction(elt), Fraction(0))
        return Lattice.from_generators(self.disc, [_kmul(elt, v, self.d) for v in self.basis])

    def __add__(self, other: "Lattice") -> "Lattice":
        if other.disc != self.disc:
            raise ValueError("lattices in different fields")
        return Lattice.from_generators(self.disc, list(self.basis) + list(other.basis))

    def add_vectors(self, vecs) -> "Lattice":
        return Lattice.from_generators(self.disc, list(self.basis) + list(vecs))

    def __mul__(self, other: "Lattice") -> "Lattice":
        """Product lattice spanned by all pairwise products."""
        gens = [_kmul(u, v, self.d) for u in self.basis for v in other.basis]
        return Lattice.from_generators(self.disc, gens)

    def element(self, coords) -> Vec:
        (a, b), (c, e) = self.basis
        return (coords[0] * a + coords[1] * c, coords[0] * b + coords[1] * e)

    def to_json(self):
        return [[str(x) for x in row] for row in self.basis]

    @classmethod
    def from_json(cls, disc, rows) -> "Lattice":
        return cls.from_generators(disc, [(Fraction(u), Fraction(v)) for u, v in rows])


def multiplier_ring(L: Lattice) -> QuadOrder:
    """The order {x in K : x*L in L}, as Z + f*O_K."""
    f = 1
    w = (Fraction(0), Fraction(1))
    for v in L.basis:
        for c in L.coords(_kmul(w, v, L.d)):
            f = lcm(f, c.denominator)
    return QuadOrder(L.disc, f)


def lattice_form(L: Lattice) -> QuadraticForm:
    """Reduced primitive form N(x*w1 - y*w2)/N(L) for an oriented basis (w1, w2)."""
    w1, w2 = L.basis
    # orientation: Im(w2/w1) > 0 iff det > 0 in (1, w) coordinates
    if w1[0] * w2[1] - w1[1] * w2[0] < 0:
        w2 = (-w2[0], -w2[1])
    d = L.d
    n1 = _knorm(w1, d)
    n2 = _knorm(w2, d)
    tr = _knorm((w1[0] + w2[0], w1[1] + w2[1]), d) - n1 - n2
    coeffs = [n1, -tr, n2]
    den = lcm(*(c.denominator for c in coeffs))
    ints = [int(c * den) for c in coeffs]
    g = gcd(*ints)
    a, b, c = (x // g for x in ints)
    return QuadraticForm(a, b, c).reduce()


@dataclass(frozen=True)
class QuotientStep:
    """One quotient recorded in a curve's provenance."""

    origin: Lattice
    modulus: int
    coords: tuple[tuple[int, TorsorElement], ...] = ()
    index: int | None = None


@dataclass(frozen=True)
class CMCurve:
    lattice: Lattice
    order: QuadOrder
    cls: IdealClass
    provenance: tuple[QuotientStep, ...] = field(default=(), compare=False)

    def __hash__(self):
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash((self.lattice, self.order, self.cls))
            object.__setattr__(self, "_hash", h)
        return h

    @classmethod
    def from_lattice(cls, L: Lattice, provenance=()) -> "CMCurve":
        O = multiplier_ring(L)
        form = lattice_form(L)
        if form.discriminant != O.discriminant:
            raise IntegrityError(
                f"form {form} has discriminant {form.discriminant}, "
                f"multiplier ring has {O.discriminant}"
            )
        return cls(L, O, IdealClass(form, O), tuple(provenance))

    @property
    def disc(self) -> Discriminant:
        return self.lattice.disc

    @property
    def conductor(self) -> int:
        return self.order.conductor

    def __repr__(self):
        return f"CMCurve(d_K={self.disc.d_K}, f={self.conductor}, form={self.cls.form})"


def base_curve(d, form: QuadraticForm | None = None) -> CMCurve:
    """The curve C/O_K, or C/a for the ideal attached to ``form``."""
    disc = as_disc(d)
    L = Lattice.maximal_order(disc) if form is None else Lattice.from_form(disc, form)
    return CMCurve.from_lattice(L)


def weak_iso_curves(E1: CMCurve, E2: CMCurve) -> bool:
    """Homothety of the lattices: same multiplier ring and same proper ideal class."""
    return E1.disc == E2.disc and E1.order == E2.order and E1.cls == E2.cls


@dataclass(frozen=True)
class MarkedSubgroup:
    """The subgroup witness/parent.lattice of ``parent``, with torsor coordinates per prime."""

    parent: CMCurve
    modulus: int
    coords: tuple[tuple[int, TorsorElement], ...]
    witness: Lattice

    @property
    def primes(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.coords)

    def coord_map(self) -> dict[int, TorsorElement]:
        return dict(self.coords)


def torsor_group(E: CMCurve, q: int) -> TorsorGroup:
    if kronecker_symbol(E.disc.d_K, q) != -1:
        raise ValueError(f"q = {q} is not inert in Q(sqrt({E.disc.d_K}))")
    if E.conductor % q == 0:
        raise ValueError(f"q = {q} divides the conductor {E.conductor}")
    return TorsorGroup(E.disc, q)


def _p1_vectors(q: int) -> list[tuple[int, int]]:
    return [(u, 1) for u in range(q)] + [(1, 0)]


def _p1_index(u: tuple[int, int], q: int) -> int:
    a, b = u[0] % q, u[1] % q
    if b:
        return a * pow(b, -1, q) % q
    if a == 0:
        raise ValueError("zero vector has no line")
    return q


def _order_generator(E: CMCurve) -> Vec:
    return (Fraction(0), Fraction(E.conductor))


def _gen_action(E: CMCurve) -> tuple[int, int]:
    """Coordinates of (f*w)*e2 in the basis of L."""
    c = E.lattice.coords(_kmul(_order_generator(E), E.lattice.basis[1], E.lattice.d))
    return int(c[0]), int(c[1])


def _raw_coord(E: CMCurve, G: TorsorGroup, u: tuple[int, int]) -> TorsorElement:
    """The gamma with gamma * line(e2) = line(u) in L/qL."""
    q = G.q
    w1, w2 = _gen_action(E)
    # x*(0, 1) + y*(w1, w2) = u  (mod q)
    if w1 % q == 0:
        raise IntegrityError("e2 and (f w) e2 are dependent mod q")
    y = u[0] * pow(w1, -1, q) % q
    x = (u[1] - y * w2) % q
    # x + y*(f w) as an element of O_K
    return G.element(x, y * E.conductor)


@lru_cache(maxsize=None)
def _reference_line(L: Lattice, q: int) -> tuple[int, int]:
    """Line whose subgroup has the lexicographically smallest witness basis: the identity coordinate."""
    return min(_p1_vectors(q), key=lambda u: _lattice_from_lines(L, {q: u}).basis)


def _coord_of_line(E: CMCurve, G: TorsorGroup, u: tuple[int, int]) -> TorsorElement:
    """The gamma with gamma * (reference line) = line(u)."""
    ref = _raw_coord(E, G, _reference_line(E.lattice, G.q))
    return _raw_coord(E, G, u) * ref.inv()


def _line_of_coord(E: CMCurve, G: TorsorGroup, t: TorsorElement) -> tuple[int, int]:
    q = G.q
    t = t * _raw_coord(E, G, _reference_line(E.lattice, q))
    x, y = t.x, t.y * pow(E.conductor, -1, q) % q
    w1, w2 = _gen_action(E)
    return (y * w1 % q, (x + y * w2) % q)


def coords_from_witness(E: CMCurve, W: Lattice, primes) -> tuple[tuple[int, TorsorElement], ...]:
    """Recover torsor coordinates of the subgroup W/L directly from the lattice W."""
    P = W.relative_matrix(E.lattice)
    out = []
    for q in primes:
        G = torsor_group(E, q)
        col = next((j for j in (0, 1) if P[0][j] % q or P[1][j] % q), None)
        if col is None:
            raise IntegrityError(f"q-part of the subgroup is not cyclic (q={q})")
        u = (P[1][col] % q, -P[0][col] % q)
        if (u[0] * P[0][0] + u[1] * P[1][0]) % q or (u[0] * P[0][1] + u[1] * P[1][1]) % q:
            raise IntegrityError(f"subgroup has no order-{q} part")
        out.append((q, _coord_of_line(E, G, u)))
    return tuple(out)


def _lattice_from_lines(L: Lattice, lines: dict[int, tuple[int, int]]) -> Lattice:
    gens = []
    for q, u in lines.items():
        v = L.element(u)
        gens.append((v[0] / q, v[1] / q))
    return L.add_vectors(gens)


def _witness_from_lines(E: CMCurve, lines: dict[int, tuple[int, int]]) -> Lattice:
    return _lattice_from_lines(E.lattice, lines)


def subgroup_from_coords(E: CMCurve, coords) -> MarkedSubgroup:
    """The subgroup with the given coordinates (a dict or pairs q -> TorsorElement)."""
    coords = dict(coords)
    lines = {}
    for q in sorted(coords):
        G = torsor_group(E, q)
        if coords[q].group != G:
            raise ValueError(f"coordinate for q={q} lies in the wrong group")
        lines[q] = _line_of_coord(E, G, coords[q])
    W = _witness_from_lines(E, lines)
    modulus = 1
    for q in coords:
        modulus *= q
    C = MarkedSubgroup(E, modulus, tuple(sorted(coords.items())), W)
    _check_consistent(C)
    return C


def trivial_subgroup(E: CMCurve) -> MarkedSubgroup:
    return MarkedSubgroup(E, 1, (), E.lattice)


def _check_consistent(C: MarkedSubgroup):
    if C.witness.index_of(C.parent.lattice) != C.modulus:
        raise IntegrityError("witness index does not match the modulus")
    if C.coords:
        again = coords_from_witness(C.parent, C.witness, C.primes)
        if again != C.coords:
            raise IntegrityError(
                "torsor coordinates disagree with the lattice witness",
                payload={"coords": C.coords, "recomputed": again},
            )


def subgroups_of_order(E: CMCurve, q: int) -> list[MarkedSubgroup]:
    """All q + 1 subgroups of order q, in P^1 order of their lines."""
    G = torsor_group(E, q)
    out = []
    for u in _p1_vectors(q):
        W = _witness_from_lines(E, {q: u})
        C = MarkedSubgroup(E, q, ((q, _coord_of_line(E, G, u)),), W)
        _check_consistent(C)
        out.append(C)
    return out


def basepoint(E: CMCurve, primes) -> MarkedSubgroup:
    """The subgroup of order prod(primes) with identity coordinate at every prime.

    At each prime this is the order-q subgroup whose witness lattice has the
    lexicographically smallest normal-form basis.
    """
    return subgroup_from_coords(E, {q: torsor_group(E, q).identity() for q in primes})


def apply_endo(alpha: QuadInteger, C: MarkedSubgroup) -> MarkedSubgroup:
    """alpha(C), with both the witness and the coordinates transported and cross-checked."""
    E = C.parent
    if alpha.d != E.disc.d_K:
        raise ValueError("alpha lies in a different field")
    if gcd(alpha.norm(), C.modulus) != 1:
        raise ValueError(f"alpha is not prime to the modulus {C.modulus}")
    if not E.order.contains(alpha):
        raise ValueError(f"alpha is not an endomorphism of {E}")
    W = C.witness.scale(alpha) + E.lattice
    coords = tuple((q, t * embed(alpha, t.group)) for q, t in C.coords)
    out = MarkedSubgroup(E, C.modulus, coords, W)
    _check_consistent(out)
    return out


def quotient(E: CMCurve, C: MarkedSubgroup) -> CMCurve:
    """E/C.  For a squarefree inert modulus prime to f, End(E/C) has conductor f * modulus."""
    if C.parent.lattice != E.lattice:
        raise ValueError("subgroup does not belong to this curve")
    if C.modulus == 1:
        return E
    _check_consistent(C)
    step = QuotientStep(E.lattice, C.modulus, C.coords)
    out = CMCurve.from_lattice(C.witness, E.provenance + (step,))
    if C.coords and C.modulus == _prod(C.primes):
        if out.conductor != E.conductor * C.modulus:
            raise IntegrityError(
                f"conductor {out.conductor} != {E.conductor} * {C.modulus}"
            )
    return out


def _prod(xs) -> int:
    r = 1
    for x in xs:
        r *= x
    return r


def is_cyclic(parent: Lattice, W: Lattice) -> bool:
    P = W.relative_matrix(parent)
    return gcd(P[0][0], P[0][1], P[1][0], P[1][1]) == 1


def multiple(C: MarkedSubgroup, m: int) -> MarkedSubgroup:
    """The subgroup m*C; for cyclic C of order N it is the subgroup of order N/gcd(m, N)."""
    E = C.parent
    W = C.witness.scale(m) + E.lattice
    return MarkedSubgroup(E, W.index_of(E.lattice), (), W)


def index_superlattices(E: CMCurve, p: int) -> list[Lattice]:
    """All p + 1 superlattices of index p, in P^1 order of their lines."""
    return [_witness_from_lines(E, {p: u}) for u in _p1_vectors(p)]


def descending_chain(E0: CMCurve, ell: int, n: int, offset: int = 0) -> list[CMCurve]:
    """E0 -> E1 -> ... -> En by ell-isogenies that never step back along the dual.

    Each step takes the admissible subgroup of rank ``offset`` (mod ell, default
    the smallest P^1 index); the chosen index is kept in the provenance.
    """
    if E0.conductor != 1:
        raise ValueError("the chain starts from a curve with End = O_K")
    if kronecker_symbol(E0.disc.d_K, ell) != -1:
        raise ValueError(f"ell = {ell} is not inert")
    chain = [E0]
    prev = None
    for i in range(n):
        E = chain[-1]
        cands = index_superlattices(E, ell)
        if prev is None:
            admissible = list(range(len(cands)))
        else:
            dual = prev.lattice.scale(Fraction(1, ell))
            admissible = [j for j, W in enumerate(cands) if W != dual]
            if len(admissible) != ell:
                raise IntegrityError("dual-isogeny kernel not found among the subgroups")
        j = admissible[offset % len(admissible)]
        step = QuotientStep(E.lattice, ell, (), j)
        nxt = CMCurve.from_lattice(cands[j], E.provenance + (step,))
        if nxt.conductor != ell ** (i + 1):
            raise IntegrityError(f"step {i + 1}: conductor {nxt.conductor} != {ell}^{i + 1}")
        prev = E
        chain.append(nxt)
    return chain


def chain_kernel(chain: list[CMCurve]) -> MarkedSubgroup:
    """The kernel of the composite chain[0] -> chain[-1] as a subgroup of chain[0]."""
    E0, En = chain[0], chain[-1]
    return MarkedSubgroup(E0, En.lattice.index_of(E0.lattice), (), En.lattice)


@dataclass(frozen=True)
class ModularPoint:
    """A point (E, C) of Y_0(N): a curve with a cyclic subgroup of order N.

    ``origin`` remembers (base curve, base subgroup, alpha) when the point came
    from the alpha-chain construction.
    """

    curve: CMCurve
    subgroup: MarkedSubgroup
    origin: tuple[CMCurve, MarkedSubgroup, QuadInteger] | None = field(default=None, compare=False)

    @property
    def level(self) -> int:
        return self.subgroup.modulus


def alpha_chain(E: CMCurve, C: MarkedSubgroup, alpha: QuadInteger, n: int) -> ModularPoint:
    """The point (E/C, ker of E/C -> E/alpha^n(C)) of Y_0(N(alpha)^n).

    With E/C = C/W, the map z -> alpha^n z has kernel (W + alpha^-n L)/W.
    """
    ell = alpha.norm()
    if gcd(ell, C.modulus) != 1:
        raise ValueError(f"subgroup order {C.modulus} is not prime to {ell}")
    if E.conductor != 1:
        raise ValueError("alpha chains start from a curve with End = O_K")
    EC = quotient(E, C)
    if n == 0:
        return ModularPoint(EC, trivial_subgroup(EC), (E, C, alpha))
    an = alpha**n
    inv = (Fraction(an.conj().x, an.norm()), Fraction(an.conj().y, an.norm()))
    K = EC.lattice + E.lattice.scale(inv)
    sub = MarkedSubgroup(EC, K.index_of(EC.lattice), (), K)
    if sub.modulus != ell**n or not is_cyclic(EC.lattice, K):
        raise IntegrityError(f"alpha-chain kernel is not cyclic of order {ell}^{n}")
    return ModularPoint(EC, sub, (E, C, alpha))
