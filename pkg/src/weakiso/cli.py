"""Command-line entry point.  Every command prints one JSON document.

Exit codes: 0 success, 1 usage or bad input, 2 search failure,
3 certificate or integrity failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from fractions import Fraction

from . import __version__
from .analytic import run_checks
from .bundle import make_bundle, verify_bundle
from .errors import IntegrityError, SearchFailure
from .pair_generator import GenConfig, generate
from .psi_map import as_matrix, smith_normal_form
from .qexp import FormalQExpansion, nonvanishing_witness, pullback
from .quad_orders import QuadInteger, find_field, find_split_principal
from .serialize import digest, dumps
from .torsor import find_q

EXIT_USAGE, EXIT_SEARCH, EXIT_INTEGRITY = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"{name} must be an integer, got {raw!r}") from None


def _read_json(path: str):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    return json.loads(raw), hashlib.sha256(raw).hexdigest()


def _manifest(args, config: dict, inputs: dict, result) -> dict:
    return {
        "command": args.command,
        "config": config,
        "seed": args.seed,
        "version": __version__,
        "input_digests": inputs,
        "output_digest": digest(result),
    }


def _alpha_arg(text: str, d_K: int) -> QuadInteger:
    try:
        x, y = (int(t) for t in text.split(","))
    except ValueError:
        raise UsageError("--alpha takes two integers x,y meaning x + y*w") from None
    return QuadInteger(x, y, d_K)


def cmd_find_field(args):
    d = find_field(args.split, args.inert, _env_int("WEAKISO_FIELD_BOUND", 10_000))
    return {"split": args.split, "inert": args.inert}, {}, {"d_K": d.d_K}


def cmd_find_primes(args):
    bound = _env_int("WEAKISO_FIELD_BOUND", 10_000)
    if args.alpha is None:
        ell, alpha = find_split_principal(args.d, bound)
    else:
        alpha = _alpha_arg(args.alpha, args.d)
        ell = alpha.norm()
    qs = find_q(args.d, args.g, alpha, args.count, _env_int("WEAKISO_PRIME_BOUND", 100_000))
    config = {"d": args.d, "g": args.g, "alpha": [alpha.x, alpha.y], "count": args.count}
    return config, {}, {"ell": ell, "alpha": [alpha.x, alpha.y], "qs": qs}


def cmd_gen_pairs(args):
    ell = None if args.ell == "auto" else int(args.ell)
    cfg = GenConfig(
        g=args.g,
        depth=args.depth,
        p=args.p,
        ell=ell,
        field_bound=_env_int("WEAKISO_FIELD_BOUND", 10_000),
        prime_bound=_env_int("WEAKISO_PRIME_BOUND", 100_000),
        seed=args.seed,
    )
    inputs = {}
    A = Ap = None
    if args.A:
        data, inputs["A"] = _read_json(args.A)
        A = as_matrix(data)
    if args.A_prime:
        data, inputs["A_prime"] = _read_json(args.A_prime)
        Ap = as_matrix(data)
    _, family_doc = generate(cfg, A, Ap, jobs=args.jobs)
    config = {"g": cfg.g, "depth": cfg.depth, "p": cfg.p, "ell": args.ell,
              "field_bound": cfg.field_bound, "prime_bound": cfg.prime_bound}
    bundle = make_bundle(family_doc, _manifest(args, config, inputs, family_doc))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(dumps(bundle, args.pretty))
        result = {"out": args.out, "bundle_digest": bundle["bundle_digest"],
                  "partner_counts": family_doc["partner_counts"]}
        return config, inputs, result
    return config, inputs, bundle


def cmd_check_weakiso(args):
    try:
        with open(args.bundle, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {args.bundle}: {exc.strerror}") from None
    inputs = {"bundle": hashlib.sha256(raw).hexdigest()}
    try:
        doc = json.loads(raw)
        report = verify_bundle(doc) if isinstance(doc, dict) else {"valid": False, "problems": ["not an object"]}
    except ValueError as exc:
        report = {"valid": False, "problems": [f"unreadable JSON: {exc}"]}
    return {"bundle": args.bundle}, inputs, report


def cmd_snf(args):
    data, h = _read_json(args.matrix)
    res = smith_normal_form(data)
    out = {"U": res.U, "D": res.D, "V": res.V, "divisors": res.divisors}
    return {"matrix": args.matrix}, {"matrix": h}, json.loads(json.dumps(out))


def _expansion(path: str, modulus):
    data, h = _read_json(path)
    return FormalQExpansion.from_json(data, modulus), h


def cmd_qexp_pullback(args):
    f, hf = _expansion(args.f, args.modulus)
    data, hA = _read_json(args.A)
    series = pullback(f, as_matrix(data))
    config = {"f": args.f, "A": args.A, "modulus": args.modulus}
    return config, {"f": hf, "A": hA}, {"terms": series.to_json()}


def cmd_qexp_witness(args):
    f, hf = _expansion(args.f, args.modulus)
    A, n, c0 = nonvanishing_witness(f, args.ell, seed=args.seed)
    config = {"f": args.f, "ell": args.ell, "modulus": args.modulus}
    return config, {"f": hf}, {"A": A.to_json(), "det": A.det, "n": n, "c0": str(Fraction(c0))}


def cmd_analytic_check(args):
    report = run_checks(args.trials, args.g, seed=args.seed, jobs=args.jobs)
    return {"trials": args.trials, "g": args.g}, {}, report


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--pretty", action="store_true")

    p = _Parser(prog="weakiso", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("find-field", parents=[common], help="smallest admissible imaginary quadratic field")
    s.add_argument("--split", type=int, default=None, help="prime that must split")
    s.add_argument("--inert", type=int, default=None, help="prime that must be inert")
    s.set_defaults(func=cmd_find_field)

    s = sub.add_parser("find-primes", parents=[common], help="inert primes q with alpha a g-th power")
    s.add_argument("--d", type=int, required=True)
    s.add_argument("--g", type=int, required=True)
    s.add_argument("--alpha", default=None, help="x,y for x + y*w; default: smallest split principal")
    s.add_argument("--count", type=int, default=3)
    s.set_defaults(func=cmd_find_primes)

    s = sub.add_parser("gen-pairs", parents=[common], help="points x_i with certified partners")
    s.add_argument("--g", type=int, required=True)
    s.add_argument("--depth", type=int, required=True)
    s.add_argument("--ell", default="auto")
    s.add_argument("--p", type=int, default=None, help="characteristic that must split in K")
    s.add_argument("--A", default=None, help="JSON matrix for the x side")
    s.add_argument("--A-prime", dest="A_prime", default=None, help="JSON matrix for the partner side")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_gen_pairs)

    s = sub.add_parser("check-weakiso", parents=[common], help="re-verify a bundle from gen-pairs")
    s.add_argument("bundle")
    s.set_defaults(func=cmd_check_weakiso)

    s = sub.add_parser("snf", parents=[common], help="Smith normal form of a symmetric PD matrix")
    s.add_argument("matrix")
    s.set_defaults(func=cmd_snf)

    s = sub.add_parser("qexp-pullback", parents=[common], help="pull a q-expansion back along A")
    s.add_argument("f")
    s.add_argument("A")
    s.add_argument("--modulus", type=int, default=None, help="work with coefficients mod this prime")
    s.set_defaults(func=cmd_qexp_pullback)

    s = sub.add_parser("qexp-witness", parents=[common], help="A with a nonvanishing leading pullback term")
    s.add_argument("f")
    s.add_argument("--ell", type=int, required=True)
    s.add_argument("--modulus", type=int, default=None)
    s.set_defaults(func=cmd_qexp_witness)

    s = sub.add_parser("analytic-check", parents=[common], help="random equivariance and Riemann-form checks")
    s.add_argument("--trials", type=int, default=100)
    s.add_argument("--g", type=int, default=None)
    s.set_defaults(func=cmd_analytic_check)
    return p


def _emit(obj, pretty: bool):
    sys.stdout.write(dumps(obj, pretty))


def main(argv=None) -> int:
    pretty = False
    try:
        args = build_parser().parse_args(argv)
        pretty = args.pretty
        if args.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        config, inputs, result = args.func(args)
        _emit({"manifest": _manifest(args, config, inputs, result), "result": result}, pretty)
        if args.command == "check-weakiso" and not result["valid"]:
            return EXIT_INTEGRITY
        if args.command == "analytic-check" and not result["pass"]:
            return EXIT_INTEGRITY
        return 0
    except UsageError as exc:
        _emit({"error": "usage", "message": str(exc)}, pretty)
        return EXIT_USAGE
    except SearchFailure as exc:
        _emit({"error": "search", "stage": exc.stage, "found": exc.found, "message": str(exc)}, pretty)
        return EXIT_SEARCH
    except IntegrityError as exc:
        _emit({"error": "integrity", "message": str(exc)}, pretty)
        return EXIT_INTEGRITY
    except (ValueError, TypeError, KeyError) as exc:
        _emit({"error": "usage", "message": f"{type(exc).__name__}: {exc}"}, pretty)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
