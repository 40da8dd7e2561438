import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kmsbound.pauli import (
    PauliOperator,
    PauliString,
    adjoint,
    commutator,
    format_operator,
    from_dense,
    hs_inner,
    multiply,
    parse_operator,
    to_dense,
    translate,
)

SITES = [(0,), (1,), (2,)]


@st.composite
def operators(draw, max_terms=4):
    k = draw(st.integers(1, max_terms))
    terms = {}
    for _ in range(k):
        letters = draw(st.lists(st.sampled_from("IXYZ"), min_size=3, max_size=3))
        s = PauliString([((j,), l) for j, l in enumerate(letters)])
        re = draw(st.floats(-2, 2, allow_nan=False))
        im = draw(st.floats(-2, 2, allow_nan=False))
        terms[s] = terms.get(s, 0) + complex(round(re, 3), round(im, 3))
    return PauliOperator(terms)


def test_single_site_products():
    x, y, z = (parse_operator(t) for t in ("X0", "Y0", "Z0"))
    assert multiply(x, y) == parse_operator("(0,1) Z0")
    assert multiply(y, x) == parse_operator("(0,-1) Z0")
    assert multiply(x, x) == PauliOperator.identity()
    assert commutator(x, y) == parse_operator("(0,2) Z0")
    assert commutator(parse_operator("Z0 Z1"), parse_operator("Z1 Z2")).is_zero()


def test_commutator_of_disjoint_supports_vanishes():
    assert commutator(parse_operator("X0 Y1"), parse_operator("Z5")).is_zero()


def test_format_and_parse_round_trip():
    a = parse_operator("-0.7 Z0 Z1 + (0.5,0.25) X(0,1) Y(2,-3)")
    assert parse_operator(format_operator(a)) == a
    assert format_operator(PauliOperator()) == "(0,0) I"
    assert format_operator(parse_operator("Z-1")) == "(1,0) Z-1"


def test_parse_rejects_bad_tokens():
    with pytest.raises(ValueError):
        parse_operator("Q1")
    with pytest.raises(ValueError):
        parse_operator("X0 X0")
    with pytest.raises(ValueError):
        parse_operator("")


@given(operators(), operators())
def test_product_matches_dense(a, b):
    assert np.allclose(to_dense(a * b, SITES), to_dense(a, SITES) @ to_dense(b, SITES))


@given(operators(), operators(), operators())
def test_commutator_is_derivation(a, b, c):
    lhs = commutator(a, b * c)
    rhs = commutator(a, b) * c + b * commutator(a, c)
    assert lhs.close_to(rhs, 1e-9)


@given(operators())
def test_adjoint_and_dense_round_trip(a):
    assert np.allclose(to_dense(adjoint(a), SITES), to_dense(a, SITES).conj().T)
    assert from_dense(to_dense(a, SITES), SITES).close_to(a, 1e-12)
    h = a + adjoint(a)
    assert h.is_hermitian()


@given(operators(), operators())
def test_hs_inner_is_normalized_trace(a, b):
    ref = np.trace(to_dense(a, SITES).conj().T @ to_dense(b, SITES)) / 8
    assert hs_inner(a, b) == pytest.approx(ref, abs=1e-9)


def test_translation():
    a = parse_operator("Z0 X1")
    assert translate(a, 3) == parse_operator("Z3 X4")
    assert a.translate((-1,)).support == frozenset({(-1,), (0,)})
