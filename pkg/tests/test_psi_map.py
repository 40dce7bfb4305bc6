import pytest
from hypothesis import given, settings, strategies as st
from sympy import Matrix

from oracles import brute_detl, brute_kernel_count, determinantal_divisors
from weakiso.cm_curves import base_curve, basepoint, chain_kernel, descending_chain, quotient, weak_iso_curves
from weakiso.products import ProductVariety
from weakiso.psi_map import (
    SymPosDefIntMatrix,
    as_matrix,
    det_int,
    elementary_divisors,
    enumerate_detl,
    kernel_order,
    psi_diag,
    psi_general,
    smith_normal_form,
)

E0 = base_curve(-7)


@st.composite
def pd_matrices(draw, max_g=5, bound=6):
    g = draw(st.integers(1, max_g))
    B = [[draw(st.integers(-bound, bound)) for _ in range(g)] for _ in range(g)]
    shift = draw(st.integers(0, 3))
    # B^T B + I is positive definite
    return [
        [sum(B[k][i] * B[k][j] for k in range(g)) + (i == j) * (1 + shift) for j in range(g)]
        for i in range(g)
    ]


def matmul(A, B):
    return [[sum(A[i][k] * B[k][j] for k in range(len(B))) for j in range(len(B[0]))] for i in range(len(A))]


@settings(max_examples=150, deadline=None)
@given(pd_matrices())
def test_snf_properties(A):
    res = smith_normal_form(A)
    assert matmul(matmul(res.U, res.D), res.V) == A
    assert abs(det_int(res.U)) == 1 and abs(det_int(res.V)) == 1
    ds = res.divisors
    assert all(d > 0 for d in ds)
    assert all(ds[i + 1] % ds[i] == 0 for i in range(len(ds) - 1))
    for i in range(len(A)):
        for j in range(len(A)):
            if i != j:
                assert res.D[i][j] == 0


@settings(max_examples=60, deadline=None)
@given(pd_matrices(max_g=4, bound=4))
def test_divisors_match_minor_gcds(A):
    assert list(elementary_divisors(A)) == determinantal_divisors(A)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.lists(st.integers(-20, 20), min_size=5, max_size=5), min_size=5, max_size=5), st.integers(1, 5))
def test_det_int_matches_sympy(rows, g):
    M = [r[:g] for r in rows[:g]]
    assert det_int(M) == Matrix(M).det()


def test_snf_examples():
    assert elementary_divisors([[2, 1], [1, 2]]) == (1, 3)
    assert elementary_divisors([[1, 0, 0], [0, 1, 0], [0, 0, 1]]) == (1, 1, 1)
    assert elementary_divisors(SymPosDefIntMatrix.diag((1, 3, 9))) == (1, 3, 9)
    assert elementary_divisors(SymPosDefIntMatrix.diag((9, 1, 3))) == (1, 3, 9)
    assert elementary_divisors(SymPosDefIntMatrix.diag((2, 3))) == (1, 6)


def test_matrix_validation():
    for bad in ([[1, 2], [3, 4]], [[1, 2], [2, 1]], [[0]], [[1, 0]], []):
        with pytest.raises(ValueError):
            as_matrix(bad)


def test_kernel_order_examples():
    assert kernel_order([[2, 1], [1, 2]], 3) == 3 == brute_kernel_count([[2, 1], [1, 2]], 3)
    assert kernel_order([[1]], 1) == 1
    for ds in ((1, 3), (3, 3), (2, 5), (1, 2, 4), (3, 1, 3)):
        N = 1
        for d in ds:
            N *= d
        A = SymPosDefIntMatrix.diag(ds)
        assert kernel_order(A, N) == N == brute_kernel_count(A.entries, N)
    with pytest.raises(ValueError):
        kernel_order([[2, 1], [1, 2]], 9)


def test_enumerate_detl_examples():
    g1 = [A.entries for A in enumerate_detl(1, 3, 3)]
    assert g1 == [((1,),), ((3,),), ((9,),), ((27,),)]
    g2 = [A.entries for A in enumerate_detl(2, 3, 1)]
    assert ((1, 0), (0, 3)) in g2 and ((2, 1), (1, 2)) in g2
    for A in enumerate_detl(2, 3, 2):
        assert A.det in (1, 3, 9)


@pytest.mark.parametrize("g,ell,k,bound", [(2, 3, 2, 9), (2, 2, 3, 8), (3, 2, 1, 2), (3, 3, 1, 2)])
def test_enumerate_detl_matches_scan(g, ell, k, bound):
    got = [tuple(x for r in A.entries for x in r) for A in enumerate_detl(g, ell, k, bound)]
    assert len(got) == len(set(got))
    assert set(got) == brute_detl(g, ell, k, bound)
    keys = [(det_int([got_i[i * g:(i + 1) * g] for i in range(g)]), got_i) for got_i in got]
    assert keys == sorted(keys)


def test_psi_general_example():
    # a point of level 3: the first step of the descending 3-chain
    chain = descending_chain(E0, 3, 1)
    K = chain_kernel(chain)
    P = psi_general(E0, K, [[2, 1], [1, 2]])
    assert len(P.factors) == 2
    assert weak_iso_curves(P.factors[0], E0)
    assert weak_iso_curves(P.factors[1], chain[1])
    assert P.certificate == {"matrix": [[2, 1], [1, 2]], "elementary_divisors": [1, 3], "kernel_order": 3}


def test_psi_diag_examples():
    chain = descending_chain(E0, 3, 2)
    K = chain_kernel(chain)  # cyclic of order 9
    P = psi_diag(E0, K, [[9]])
    assert weak_iso_curves(P.factors[0], chain[2])
    P = psi_diag(E0, K, [[3, 0], [0, 3]])
    assert P.factors[0] == P.factors[1]
    assert weak_iso_curves(P.factors[0], chain[1])
    # agrees with psi_general up to factor order for diagonal A
    for ds in ((1, 9), (9, 1)):
        A = SymPosDefIntMatrix.diag(ds)
        a = psi_diag(E0, K, A)
        b = psi_general(E0, K, A)
        assert sorted(E.conductor for E in a.factors) == sorted(E.conductor for E in b.factors)
    assert weak_iso_curves(psi_diag(E0, K, [[1, 0], [0, 9]]).factors[0], E0)
    with pytest.raises(ValueError):
        psi_diag(E0, K, [[2, 1], [1, 2]])
    with pytest.raises(ValueError):
        psi_diag(E0, K, [[2]])


def test_psi_diag_follows_descending_chain():
    chain = descending_chain(E0, 3, 4)
    K = chain_kernel(chain)
    P = psi_diag(E0, K, SymPosDefIntMatrix.diag((1, 3, 9, 27, 81)))
    assert [E.conductor for E in P.factors] == [1, 3, 9, 27, 81]
    for E, F in zip(P.factors, chain):
        assert weak_iso_curves(E, F)


def test_psi_general_preconditions():
    K = chain_kernel(descending_chain(E0, 3, 1))
    with pytest.raises(ValueError):
        psi_general(E0, K, [[1, 0], [0, 9]])
    E5 = quotient(E0, basepoint(E0, [5]))
    with pytest.raises(ValueError):
        psi_general(E5, K, [[3]])
    assert isinstance(psi_general(E0, K, [[3]]), ProductVariety)
