"""Weak isomorphism of products of CM elliptic curves.

Two routes decide the same question:

* the torsor criterion: prod E/alpha_i(C) and prod E/beta_i(C) are weakly
  isomorphic iff prod alpha_i = prod beta_i in (O_K/q)^x/(Z/q)^x;
* the Steinitz oracle: for factors sharing one order O, the lattice
  a_1 + ... + a_g is isomorphic to O^(g-1) + a_1...a_g as an O-module, and
  the product class is compared in Pic(O) by form composition.

The oracle never touches torsor arithmetic; the criterion never touches
quadratic forms.  ``weak_iso_products`` runs both and refuses to return a
certificate if they disagree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

from sympy import factorint

from .cm_curves import CMCurve, Lattice, QuotientStep
from .errors import IntegrityError, UnsupportedCase
from .quad_orders import IdealClass, principal_class
from .serialize import SCHEMA_VERSION, digest
from .torsor import TorsorGroup, embed


@dataclass(frozen=True)
class ProductVariety:
    factors: tuple[CMCurve, ...]
    # arithmetic evidence attached by the psi maps; not part of the identity
    certificate: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.factors:
            raise ValueError("a product needs at least one factor")
        object.__setattr__(self, "factors", tuple(self.factors))

    @property
    def g(self) -> int:
        return len(self.factors)

    def to_json(self):
        return [
            {
                "lattice": E.lattice.to_json(),
                "conductor": E.conductor,
                "form": list(E.cls.form.as_tuple()),
            }
            for E in self.factors
        ]


def criterion_fast(alphas, betas, G: TorsorGroup) -> bool:
    """prod(alphas) == prod(betas) in G."""
    G.disc.require_plain_units()
    if len(alphas) != len(betas):
        raise ValueError("both sides need the same number of factors")
    lhs = G.identity()
    for a in alphas:
        lhs = lhs * embed(a, G)
    rhs = G.identity()
    for b in betas:
        rhs = rhs * embed(b, G)
    return lhs == rhs


def _single_step(E: CMCurve) -> QuotientStep:
    if not E.provenance:
        return QuotientStep(E.lattice, 1, ())
    if len(E.provenance) != 1 or E.provenance[0].index is not None:
        raise UnsupportedCase("fast path needs factors that are one torsor quotient of a common curve")
    step = E.provenance[0]
    if step.modulus > 1 and not step.coords:
        # no torsor coordinates: comparing empty products would be vacuous
        raise UnsupportedCase("factor was not built by a torsor quotient")
    return step


def _coord_products(P: ProductVariety):
    steps = [_single_step(E) for E in P.factors]
    origin = steps[0].origin
    primes = tuple(q for q, _ in steps[0].coords)
    for s in steps:
        if s.origin != origin or tuple(q for q, _ in s.coords) != primes:
            raise UnsupportedCase("factors come from different curves or different torsors")
    prods = []
    for j, q in enumerate(primes):
        acc = steps[0].coords[j][1].group.identity()
        for s in steps:
            acc = acc * s.coords[j][1]
        prods.append((q, acc))
    return origin, primes, prods


def criterion_record(P1: ProductVariety, P2: ProductVariety) -> dict:
    """The torsor criterion evaluated on provenance coordinates of both products."""
    if P1.g != P2.g:
        raise UnsupportedCase("products of different dimension")
    o1, primes1, pr1 = _coord_products(P1)
    o2, primes2, pr2 = _coord_products(P2)
    if o1 != o2 or primes1 != primes2:
        raise UnsupportedCase("products are not built over the same torsor")
    o1.disc.require_plain_units()
    verdict = all(a == b for (_, a), (_, b) in zip(pr1, pr2))
    return {
        "primes": list(primes1),
        "lhs": [t.index for _, t in pr1],
        "rhs": [t.index for _, t in pr2],
        "verdict": verdict,
    }


@lru_cache(maxsize=4096)
def _invariant_factors(conductors: tuple[int, ...]) -> list[int]:
    """Invariant factors of the abelian group sum Z/f_i, as a divisibility chain."""
    g = len(conductors)
    per_prime = {}
    for f in conductors:
        for p, e in factorint(f).items():
            per_prime.setdefault(p, []).append(e)
    chain = [1] * g
    for p, exps in per_prime.items():
        exps = [0] * (g - len(exps)) + sorted(exps)
        for i, e in enumerate(exps):
            chain[i] *= p**e
    return chain


@lru_cache(maxsize=65536)
def steinitz_classes(P: ProductVariety) -> tuple[tuple[int, IdealClass], ...]:
    """Per multiplier ring: (number of factors, product of their ideal classes)."""
    groups: dict = {}
    for E in P.factors:
        n, c = groups.get(E.order, (0, principal_class(E.order)))
        groups[E.order] = (n + 1, c * E.cls)
    return tuple((n, c) for _, (n, c) in sorted(groups.items()))


def oracle_record(P1: ProductVariety, P2: ProductVariety) -> dict:
    fields = {E.disc for E in P1.factors + P2.factors}
    rec = {
        "lhs_conductors": [E.conductor for E in P1.factors],
        "rhs_conductors": [E.conductor for E in P2.factors],
    }
    if len(fields) != 1 or P1.g != P2.g:
        # curves over different fields are not even isogenous
        return {**rec, "reason": "field-or-dimension", "verdict": False}
    # O_K*Lambda/Lambda = sum Z/f_i is an isomorphism invariant of the torus
    inv1 = _invariant_factors(tuple(rec["lhs_conductors"]))
    inv2 = _invariant_factors(tuple(rec["rhs_conductors"]))
    if inv1 != inv2:
        return {**rec, "reason": "conductor-invariants", "verdict": False}
    s1 = steinitz_classes(P1)
    s2 = steinitz_classes(P2)
    rec["lhs_steinitz"] = [[n, list(c.form.as_tuple())] for n, c in s1]
    rec["rhs_steinitz"] = [[n, list(c.form.as_tuple())] for n, c in s2]
    single = len(s1) == 1 and len(s2) == 1
    if s1 == s2:
        return {**rec, "reason": "steinitz", "verdict": True}
    if single:
        return {**rec, "reason": "steinitz", "verdict": False}
    raise UnsupportedCase(
        "mixed endomorphism rings with differing per-ring classes; cancellation is not established here"
    )


def oracle_slow(P1: ProductVariety, P2: ProductVariety) -> bool:
    return oracle_record(P1, P2)["verdict"]


@dataclass(frozen=True)
class WeakIsoCertificate:
    verdict: bool
    fast_path: dict
    oracle_path: dict
    inputs_digest: str

    def to_json(self, P1: ProductVariety, P2: ProductVariety) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "verdict": self.verdict,
            "fast_path": self.fast_path,
            "oracle_path": self.oracle_path,
            "inputs_digest": self.inputs_digest,
            "lhs": P1.to_json(),
            "rhs": P2.to_json(),
        }


def inputs_digest(P1: ProductVariety, P2: ProductVariety) -> str:
    d = P1.factors[0].disc.d_K
    return digest({"d_K": d, "lhs": P1.to_json(), "rhs": P2.to_json()})


def weak_iso_products(P1: ProductVariety, P2: ProductVariety) -> WeakIsoCertificate:
    fast = criterion_record(P1, P2)
    oracle = oracle_record(P1, P2)
    if fast["verdict"] != oracle["verdict"]:
        raise IntegrityError(
            "torsor criterion and Steinitz oracle disagree",
            payload={"lhs": P1.to_json(), "rhs": P2.to_json(), "fast": fast, "oracle": oracle},
        )
    return WeakIsoCertificate(oracle["verdict"], fast, oracle, inputs_digest(P1, P2))


def product_from_json(d_K: int, rows) -> ProductVariety:
    return ProductVariety(tuple(CMCurve.from_lattice(Lattice.from_json(d_K, r["lattice"])) for r in rows))


def verify_certificate(doc: dict, d_K: int) -> list[str]:
    """Oracle-only re-verification of a serialized certificate; returns a list of problems."""
    problems = []
    try:
        if doc.get("schema_version") != SCHEMA_VERSION:
            problems.append("schema version mismatch")
        P1 = product_from_json(d_K, doc["lhs"])
        P2 = product_from_json(d_K, doc["rhs"])
        if P1.to_json() != doc["lhs"] or P2.to_json() != doc["rhs"]:
            problems.append("recorded factor data does not match the lattices")
        if inputs_digest(P1, P2) != doc["inputs_digest"]:
            problems.append("inputs digest mismatch")
        oracle = oracle_record(P1, P2)
        if oracle != doc["oracle_path"]:
            problems.append("oracle record mismatch")
        if doc["verdict"] is not oracle["verdict"]:
            problems.append("verdict mismatch")
        fast = doc["fast_path"]
        if fast.get("verdict") is not oracle["verdict"]:
            problems.append("recorded fast path disagrees with the oracle")
        if not (len(fast["primes"]) == len(fast["lhs"]) == len(fast["rhs"])):
            problems.append("fast path record has mismatched lengths")
        if fast.get("verdict") is not (fast["lhs"] == fast["rhs"]):
            problems.append("fast path verdict does not follow from its coordinates")
    except (KeyError, TypeError, ValueError, ZeroDivisionError, AttributeError) as exc:
        problems.append(f"malformed certificate: {exc!r}")
    except UnsupportedCase as exc:
        problems.append(f"unsupported: {exc}")
    return problems
