"""Points x_i of Y_0(ell^n) and their g^i weakly isomorphic partners.

Over K with O_K^x = {+-1}, fix a split principal prime ell = N(alpha) and
inert primes q_1, q_2, ... with alpha a g-th power in every G_{q_j}.  Let C
be the subgroup of order q_1...q_i with identity torsor coordinates and
x_i = (E/C, alpha-chain of length n).  For A, A' in Det_{ell,g} with
det A = ell^n, det A' = ell^m, every beta with beta^g = alpha^(n-m) in
prod_j G_{q_j} gives y_beta = (E/beta(C), alpha-chain of length m) with
psi_A(x_i) weakly isomorphic to psi_A'(y_beta).  There are g^i such classes
of beta and the y_beta are pairwise distinct.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from sympy.ntheory.modular import crt

from .cm_curves import (
    CMCurve,
    MarkedSubgroup,
    ModularPoint,
    alpha_chain,
    apply_endo,
    base_curve,
    basepoint,
    quotient,
    torsor_group,
    weak_iso_curves,
)
from .errors import IntegrityError
from .products import ProductVariety, WeakIsoCertificate, weak_iso_products
from .psi_map import SymPosDefIntMatrix, as_matrix, elementary_divisors, psi_general
from .quad_orders import (
    Discriminant,
    QuadInteger,
    elements_of_norm,
    find_field,
    find_split_principal,
    kronecker_symbol,
)
from .torsor import TorsorElement, embed, find_q, gth_roots


@dataclass(frozen=True)
class GenConfig:
    g: int
    depth: int
    p: int | None = None
    ell: int | None = None
    field_bound: int = 10_000
    prime_bound: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.g < 2:
            raise ValueError("g must be at least 2")
        if self.depth < 0:
            raise ValueError("depth must be nonnegative")
        if self.p is not None and self.ell is not None and self.p == self.ell:
            raise ValueError("ell must differ from the characteristic p")


@dataclass
class PairFamily:
    config: GenConfig
    field: Discriminant
    ell: int
    alpha: QuadInteger
    qs: list[int]
    base: CMCurve
    xs: dict[int, ModularPoint] = field(default_factory=dict)
    partners: dict[int, list[tuple[ModularPoint, WeakIsoCertificate]]] = field(default_factory=dict)


def _ell_exponent(A: SymPosDefIntMatrix, ell: int) -> int:
    d = A.det
    n = 0
    while d % ell == 0:
        d //= ell
        n += 1
    if d != 1:
        raise ValueError(f"det A = {A.det} is not a power of {ell}")
    return n


def setup(cfg: GenConfig) -> tuple[Discriminant, int, QuadInteger, list[int]]:
    """Field, split principal (ell, alpha), and the first ``depth`` torsor primes."""
    disc = find_field(cfg.p, None, cfg.field_bound)
    if cfg.ell is None:
        exclude = {cfg.p} if cfg.p is not None else set()
        ell, alpha = find_split_principal(disc, cfg.field_bound, exclude)
    else:
        ell, alpha = _alpha_for(disc, cfg.ell)
    qs = find_q(disc, cfg.g, alpha, cfg.depth, cfg.prime_bound) if cfg.depth else []
    if ell in qs:
        raise IntegrityError(f"ell = {ell} came back as a torsor prime")
    return disc, ell, alpha, qs


def _alpha_for(disc: Discriminant, ell: int) -> tuple[int, QuadInteger]:
    if kronecker_symbol(disc.d_K, ell) != 1:
        raise ValueError(f"ell = {ell} does not split in Q(sqrt({disc.d_K}))")
    cands = [a for a in elements_of_norm(disc, ell) if a.y > 0 and a.trace() >= 0]
    if not cands:
        raise ValueError(f"ell = {ell} is not the norm of an element of O_K")
    return ell, min(cands, key=lambda a: (a.trace(), a.y))


def make_family(cfg: GenConfig) -> PairFamily:
    disc, ell, alpha, qs = setup(cfg)
    return PairFamily(cfg, disc, ell, alpha, qs, base_curve(disc))


def base_subgroup(family: PairFamily, i: int) -> MarkedSubgroup:
    if not 0 <= i <= len(family.qs):
        raise ValueError(f"index {i} outside 0..{len(family.qs)}")
    return basepoint(family.base, family.qs[:i])


def point_for(family: PairFamily, C: MarkedSubgroup, n: int) -> ModularPoint:
    return alpha_chain(family.base, C, family.alpha, n)


def build_x(family: PairFamily, i: int, A) -> ModularPoint:
    n = _ell_exponent(as_matrix(A), family.ell)
    x = point_for(family, base_subgroup(family, i), n)
    family.xs[i] = x
    return x


def canonical_psi(family: PairFamily, point: ModularPoint, A) -> ProductVariety:
    """psi_A(point) with each factor replaced by the weakly isomorphic E/alpha^k(C).

    The point must come from the alpha-chain construction with origin (E, C).
    Factor j of psi_A is the quotient of E/C by the order-ell^k part of the
    chain, and z -> alpha^k z identifies it with E/alpha^k(C); the check below
    confirms this by comparing ideal classes, so the replacement only adds
    torsor provenance.
    """
    A = as_matrix(A)
    E, C, alpha = point.origin
    raw = psi_general(point.curve, point.subgroup, A)
    reps = []
    for d, f in zip(elementary_divisors(A), raw.factors):
        k = _ell_exponent(SymPosDefIntMatrix.diag([d]), family.ell)
        rep = quotient(E, apply_endo(alpha**k, C))
        if not weak_iso_curves(rep, f):
            raise IntegrityError(f"psi factor {f} is not E/alpha^{k}(C) = {rep}")
        reps.append(rep)
    return ProductVariety(tuple(reps), raw.certificate)


def _lift(roots: list[TorsorElement], qs: list[int], d_K: int) -> QuadInteger:
    """An element of O_K reducing to roots[j] modulo q_j, by CRT on both coordinates."""
    x, _ = crt(qs, [t.x for t in roots])
    y, _ = crt(qs, [t.y for t in roots])
    return QuadInteger(int(x), int(y), d_K)


def partner_subgroups(family: PairFamily, C: MarkedSubgroup, n: int, m: int) -> list[tuple[QuadInteger, MarkedSubgroup]]:
    """All beta(C) with beta^g = alpha^(n-m) in every G_q, q | |C|, in coordinate order."""
    g = family.config.g
    qs = list(C.primes)
    if not qs:
        return [(QuadInteger(1, 0, family.field.d_K), C)]
    per_prime = []
    for q in qs:
        G = torsor_group(family.base, q)
        target = embed(family.alpha, G) ** (n - m)
        roots = gth_roots(target, g)
        if len(roots) != g:
            raise IntegrityError(f"expected {g} g-th roots in G_{q}, found {len(roots)}")
        per_prime.append(roots)
    out = []
    for combo in itertools.product(*per_prime):
        beta = _lift(list(combo), qs, family.field.d_K)
        out.append((beta, apply_endo(beta, C)))
    return out


def _certify_partner(family: PairFamily, sub: MarkedSubgroup, m: int, A_prime, lhs: ProductVariety):
    y = point_for(family, sub, m)
    rhs = canonical_psi(family, y, A_prime)
    return y, rhs, weak_iso_products(lhs, rhs)


def certified_partners(family: PairFamily, i: int, A, A_prime, jobs: int = 1):
    """(lhs, [(y, rhs, certificate), ...]) for x_i; order follows the torsor coordinates of beta."""
    A, A_prime = as_matrix(A), as_matrix(A_prime)
    if A.g != family.config.g or A_prime.g != family.config.g:
        raise ValueError("matrices must be g x g")
    n = _ell_exponent(A, family.ell)
    m = _ell_exponent(A_prime, family.ell)
    x = family.xs.get(i)
    if x is None or x.level != family.ell**n:
        x = build_x(family, i, A)
    lhs = canonical_psi(family, x, A)
    C = x.origin[1]
    subs = [sub for _, sub in partner_subgroups(family, C, n, m)]
    if jobs > 1 and len(subs) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            res = list(pool.map(_certify_partner, *zip(*[(family, s, m, A_prime, lhs) for s in subs])))
    else:
        res = [_certify_partner(family, s, m, A_prime, lhs) for s in subs]
    for _, _, cert in res:
        if not cert.verdict:
            raise IntegrityError("a constructed partner is not weakly isomorphic to psi_A(x)")
    ys = [y.curve for y, _, _ in res]
    for a, b in itertools.combinations(range(len(ys)), 2):
        if weak_iso_curves(ys[a], ys[b]):
            raise IntegrityError(f"partners {a} and {b} coincide")
    if len(res) != family.config.g ** len(C.primes):
        raise IntegrityError(f"found {len(res)} partners, expected g^{len(C.primes)}")
    family.partners[i] = [(y, cert) for y, _, cert in res]
    return lhs, res


def partners(family: PairFamily, i: int, A, A_prime, jobs: int = 1) -> list[tuple[ModularPoint, WeakIsoCertificate]]:
    certified_partners(family, i, A, A_prime, jobs)
    return family.partners[i]


def reverse_contains(family: PairFamily, x: ModularPoint, y: ModularPoint, A, A_prime) -> bool:
    """Whether x is among the partners of y computed with the roles of A and A' swapped."""
    n = _ell_exponent(as_matrix(A), family.ell)
    m = _ell_exponent(as_matrix(A_prime), family.ell)
    C = x.origin[1]
    return any(sub.witness == C.witness for _, sub in partner_subgroups(family, y.origin[1], m, n))


def default_matrices(g: int, ell: int) -> tuple[SymPosDefIntMatrix, SymPosDefIntMatrix]:
    """diag(1,...,1,ell) and diag(1,...,1,ell,ell)."""
    A = SymPosDefIntMatrix.diag([1] * (g - 1) + [ell])
    A_prime = SymPosDefIntMatrix.diag([1] * (g - 2) + [ell, ell])
    return A, A_prime


def point_json(pt: ModularPoint) -> dict:
    return {
        "curve": pt.curve.lattice.to_json(),
        "conductor": pt.curve.conductor,
        "form": list(pt.curve.cls.form.as_tuple()),
        "level": pt.level,
        "kernel": pt.subgroup.witness.to_json(),
    }


def family_json(family: PairFamily, A, A_prime, cert_docs: dict[int, list[dict]]) -> dict:
    """The bundle body; certificates are passed in already serialized."""
    return {
        "field": family.field.d_K,
        "ell": family.ell,
        "alpha": [family.alpha.x, family.alpha.y],
        "g": family.config.g,
        "depth": family.config.depth,
        "qs": list(family.qs),
        "A": as_matrix(A).to_json(),
        "A_prime": as_matrix(A_prime).to_json(),
        "xs": {str(i): point_json(x) for i, x in sorted(family.xs.items())},
        "partners": {
            str(i): [{"point": point_json(y), "certificate": doc} for (y, _), doc in zip(family.partners[i], cert_docs[i])]
            for i in sorted(family.partners)
        },
        "partner_counts": [len(family.partners[i]) for i in sorted(family.partners)],
    }


def generate(cfg: GenConfig, A=None, A_prime=None, jobs: int = 1) -> tuple[PairFamily, dict]:
    family = make_family(cfg)
    dA, dAp = default_matrices(cfg.g, family.ell)
    A = dA if A is None else as_matrix(A)
    A_prime = dAp if A_prime is None else as_matrix(A_prime)
    for i in range(cfg.depth + 1):
        build_x(family, i, A)
    docs = {}
    for i in range(1, cfg.depth + 1):
        lhs, res = certified_partners(family, i, A, A_prime, jobs)
        docs[i] = [cert.to_json(lhs, rhs) for _, rhs, cert in res]
    xs = [family.xs[i].curve for i in range(cfg.depth + 1)]
    if len({(c.order, c.cls) for c in xs}) != len(xs):
        raise IntegrityError("two x_i are weakly isomorphic")
    return family, family_json(family, A, A_prime, docs)
