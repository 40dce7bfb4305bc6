"""Pair-family bundles: assembly and independent re-verification.

Verification trusts nothing recorded in the bundle except the lattices.
Verdicts come from the Steinitz oracle; the recorded torsor-criterion data
is recomputed from the factor lattices and compared, the psi products are
recomputed from the recorded points, and a digest over the whole bundle
catches edits to fields that carry no mathematical content.
"""

from __future__ import annotations

import itertools
from math import prod

from .cm_curves import CMCurve, Lattice, MarkedSubgroup, base_curve, coords_from_witness, weak_iso_curves
from .products import product_from_json, verify_certificate
from .psi_map import as_matrix, psi_general
from .serialize import SCHEMA_VERSION, digest


def make_bundle(family_doc: dict, manifest: dict) -> dict:
    body = {"schema_version": SCHEMA_VERSION, "manifest": manifest, "family": family_doc}
    return {**body, "bundle_digest": digest(body)}


def _ell_power(n: int, ell: int) -> int | None:
    k = 0
    while n % ell == 0:
        n //= ell
        k += 1
    return k if n == 1 else None


def _point(d_K: int, doc: dict, problems: list, where: str):
    E = CMCurve.from_lattice(Lattice.from_json(d_K, doc["curve"]))
    if E.conductor != doc["conductor"] or list(E.cls.form.as_tuple()) != doc["form"]:
        problems.append(f"{where}: recorded conductor/form do not match the lattice")
    K = Lattice.from_json(d_K, doc["kernel"])
    if not K.contains_lattice(E.lattice) or K.index_of(E.lattice) != doc["level"]:
        problems.append(f"{where}: kernel lattice does not have the recorded level")
        return E, None
    return E, MarkedSubgroup(E, doc["level"], (), K)


def _check_psi(E, C, A, factors_doc, d_K, problems, where):
    if C is None:
        return
    P = psi_general(E, C, A)
    recorded = product_from_json(d_K, factors_doc)
    if len(recorded.factors) != len(P.factors) or not all(
        weak_iso_curves(a, b) for a, b in zip(P.factors, recorded.factors)
    ):
        problems.append(f"{where}: certified product is not psi of the recorded point")


def _fast_record(base, factors_doc, primes, d_K):
    prods = {}
    for row in factors_doc:
        W = Lattice.from_json(d_K, row["lattice"])
        for q, t in coords_from_witness(base, W, primes):
            prods[q] = prods[q] * t if q in prods else t
    return [prods[q].index for q in primes]


def verify_bundle(doc: dict) -> dict:
    problems: list[str] = []
    counts = []
    n_certs = 0
    try:
        if doc.get("schema_version") != SCHEMA_VERSION:
            problems.append("schema version mismatch")
        body = {k: doc[k] for k in ("schema_version", "manifest", "family")}
        if digest(body) != doc.get("bundle_digest"):
            problems.append("bundle digest mismatch")
        fam = doc["family"]
        d_K, ell, g, qs = fam["field"], fam["ell"], fam["g"], fam["qs"]
        A, Ap = as_matrix(fam["A"]), as_matrix(fam["A_prime"])
        n, m = _ell_power(A.det, ell), _ell_power(Ap.det, ell)
        if n is None or m is None or A.g != g or Ap.g != g:
            problems.append("A and A' must be g x g with determinant a power of ell")
        base = base_curve(d_K)
        if fam["depth"] != len(qs):
            problems.append("depth does not match the number of torsor primes")
        xs = {}
        for key, pt in sorted(fam["xs"].items()):
            i = int(key)
            E, C = _point(d_K, pt, problems, f"x_{i}")
            if E.conductor != prod(qs[:i]) or pt["level"] != ell**n:
                problems.append(f"x_{i}: conductor or level is wrong")
            xs[i] = (E, C)
        for a, b in itertools.combinations(sorted(xs), 2):
            if weak_iso_curves(xs[a][0], xs[b][0]):
                problems.append(f"x_{a} and x_{b} are weakly isomorphic")
        for key, entries in sorted(fam["partners"].items()):
            i = int(key)
            counts.append(len(entries))
            if len(entries) != g**i:
                problems.append(f"partners of x_{i}: {len(entries)} != g^{i}")
            if i not in xs:
                problems.append(f"partners recorded for missing x_{i}")
                continue
            ys = []
            for j, e in enumerate(entries):
                where = f"partner {i}.{j}"
                cert = e["certificate"]
                n_certs += 1
                problems += [f"{where}: {p}" for p in verify_certificate(cert, d_K)]
                if cert.get("verdict") is not True:
                    problems.append(f"{where}: certificate does not assert weak isomorphism")
                E, C = _point(d_K, e["point"], problems, where)
                ys.append(E)
                if E.conductor != prod(qs[:i]) or e["point"]["level"] != ell**m:
                    problems.append(f"{where}: conductor or level is wrong")
                _check_psi(*xs[i], A, cert["lhs"], d_K, problems, where + " lhs")
                _check_psi(E, C, Ap, cert["rhs"], d_K, problems, where + " rhs")
                fast = cert["fast_path"]
                if fast["primes"] != qs[:i]:
                    problems.append(f"{where}: fast path primes differ from the family")
                else:
                    if fast["lhs"] != _fast_record(base, cert["lhs"], qs[:i], d_K):
                        problems.append(f"{where}: fast path lhs coordinates do not match the lattices")
                    if fast["rhs"] != _fast_record(base, cert["rhs"], qs[:i], d_K):
                        problems.append(f"{where}: fast path rhs coordinates do not match the lattices")
            for a, b in itertools.combinations(range(len(ys)), 2):
                if weak_iso_curves(ys[a], ys[b]):
                    problems.append(f"partners {i}.{a} and {i}.{b} coincide")
        depth = fam["depth"]
        if sorted(map(int, fam["xs"])) != list(range(depth + 1)):
            problems.append("points x_0..x_depth are not all present")
        if sorted(map(int, fam["partners"])) != list(range(1, depth + 1)):
            problems.append("partner lists for 1..depth are not all present")
        if fam.get("partner_counts") != counts:
            problems.append("recorded partner counts are wrong")
    except Exception as exc:  # any malformed field is a failed verification
        problems.append(f"malformed bundle: {type(exc).__name__}: {exc}")
    return {"valid": not problems, "problems": problems, "certificates": n_certs, "partner_counts": counts}
