import pytest
from hypothesis import given, settings, strategies as st
from sympy import primerange

from oracles import class_number_formula, kronecker_by_roots, reduced_forms
from weakiso.errors import SearchFailure, UnitsError
from weakiso.quad_orders import (
    Discriminant,
    QuadInteger,
    QuadOrder,
    QuadraticForm,
    class_group,
    elements_of_norm,
    find_field,
    find_split_principal,
    is_fundamental,
    kronecker_symbol,
    principal_class,
    principal_form,
)

FIELDS = [-7, -8, -11, -15, -19, -20, -23, -24, -31, -35, -39, -40, -43, -47]


@pytest.mark.parametrize("p,expected", [(2, 1), (7, 0), (5, -1)])
def test_kronecker_minus7(p, expected):
    assert kronecker_symbol(-7, p) == expected


@pytest.mark.parametrize("d", FIELDS)
def test_kronecker_matches_root_count(d):
    for p in primerange(2, 60):
        assert kronecker_symbol(d, p) == kronecker_by_roots(d, p), (d, p)


def test_kronecker_rejects_composite():
    with pytest.raises(ValueError):
        kronecker_symbol(-7, 9)


def test_find_field_examples():
    assert find_field(None, 5).d_K == -7
    assert find_field(2, 5).d_K == -7
    with pytest.raises(ValueError):
        find_field(5, 5)


def test_find_field_result_is_admissible_and_smallest():
    for p, ell in [(3, 5), (5, 7), (11, 2), (13, None), (None, 3)]:
        d = find_field(p, ell).d_K
        if p is not None:
            assert kronecker_by_roots(d, p) == 1
        if ell is not None:
            assert kronecker_by_roots(d, ell) == -1
        for n in range(3, -d):
            if not is_fundamental(-n) or n in (3, 4):
                continue
            ok_p = p is None or kronecker_by_roots(-n, p) == 1
            ok_l = ell is None or kronecker_by_roots(-n, ell) == -1
            assert not (ok_p and ok_l), (p, ell, -n)


def test_find_field_bound_exhausted():
    with pytest.raises(SearchFailure):
        find_field(3, 2, search_bound=10)


def test_discriminant_validation():
    for bad in (-1, -12, -28, 5, 0, -16):
        with pytest.raises(ValueError):
            Discriminant(bad)
    with pytest.raises(UnitsError):
        Discriminant(-4).require_plain_units()


def test_find_split_principal_minus7():
    ell, alpha = find_split_principal(-7)
    assert ell == 2 and alpha.norm() == 2
    # (1 + sqrt(-7))/2
    assert alpha == QuadInteger.from_half_sqrt(1, 1, -7) == QuadInteger(4, 1, -7)
    with pytest.raises(SearchFailure):
        find_split_principal(-7, bound=1)
    ell, alpha = find_split_principal(-7, exclude={2})
    assert ell == 11 and alpha.norm() == 11
    assert alpha == QuadInteger.from_half_sqrt(4, 2, -7)


def test_elements_of_norm_by_scan():
    disc = Discriminant(-7)
    for n in range(1, 40):
        got = set(elements_of_norm(disc, n))
        scan = {
            QuadInteger(x, y, -7)
            for x in range(-25, 26)
            for y in range(-25, 26)
            if QuadInteger(x, y, -7).norm() == n
        }
        assert got == scan, n


@given(
    st.sampled_from(FIELDS),
    st.tuples(st.integers(-50, 50), st.integers(-50, 50)),
    st.tuples(st.integers(-50, 50), st.integers(-50, 50)),
)
def test_norm_is_multiplicative(d, a, b):
    x, y = QuadInteger(*a, d), QuadInteger(*b, d)
    assert (x * y).norm() == x.norm() * y.norm()
    assert (x * x.conj()).y == 0
    assert (x * x.conj()).x == x.norm()
    assert x.trace() == (x + x.conj()).x


@pytest.mark.parametrize("f,expected", [(1, 1), (5, 6)])
def test_class_group_minus7(f, expected):
    O = QuadOrder(Discriminant(-7), f)
    G = class_group(O)
    assert len(G) == expected
    assert sorted(c.form.as_tuple() for c in G) == sorted(reduced_forms(-7 * f * f))


@pytest.mark.parametrize("d", FIELDS)
def test_class_number_formula(d):
    h_K = len(reduced_forms(d))
    for f in range(1, 16):
        G = class_group(QuadOrder(Discriminant(d), f))
        assert len(G) == class_number_formula(d, h_K, f), (d, f)


def test_principal_is_identity():
    O = QuadOrder(Discriminant(-7), 1)
    one = principal_class(O)
    assert one * one == one
    assert one.is_principal


@pytest.mark.parametrize("d,f", [(-23, 1), (-7, 5), (-7, 13), (-15, 4), (-47, 1), (-31, 3)])
def test_class_group_axioms(d, f):
    O = QuadOrder(Discriminant(d), f)
    G = class_group(O)
    one = principal_class(O)
    elems = set(G)
    for a in G:
        assert a * one == a
        assert (a * a.inverse()).is_principal
        for b in G:
            assert a * b == b * a
            assert a * b in elems
    for a in G[:4]:
        for b in G[:4]:
            for c in G[:4]:
                assert (a * b) * c == a * (b * c)
    # Lagrange
    for a in G:
        p = one
        for _ in range(len(G)):
            p = p * a
        assert p == one


@settings(max_examples=200)
@given(st.integers(1, 60), st.integers(-80, 80), st.integers(1, 60))
def test_reduction_preserves_disc_and_is_reduced(a, b, c):
    F = QuadraticForm(a, b, c)
    if F.discriminant >= 0:
        return
    R = F.reduce()
    assert R.discriminant == F.discriminant
    assert R.is_reduced()
    assert R.reduce() == R


def test_principal_form_shapes():
    assert principal_form(-7).as_tuple() == (1, 1, 2)
    assert principal_form(-175).as_tuple() == (1, 1, 44)
    assert principal_form(-20).as_tuple() == (1, 0, 5)


def test_compose_rejects_mismatch():
    with pytest.raises(ValueError):
        QuadraticForm(1, 1, 2).compose(QuadraticForm(1, 0, 5))


def test_find_field_primes_checked():
    with pytest.raises(ValueError):
        find_field(4, None)
