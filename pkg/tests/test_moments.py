import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kmsbound.lattice import Window, tfising
from kmsbound.moments import CONST, ZERO, AffineMatrix, MomentFunctional
from kmsbound.oracles import ed_gibbs_marginal
from kmsbound.pauli import PauliOperator, parse_operator, to_dense

from conftest import random_density

W3 = Window.interval(-1, 1)


def _string(text):
    (s,) = list(parse_operator(text))
    return s


def test_identity_is_pinned():
    f = MomentFunctional(W3)
    e = f.evaluate(PauliOperator.identity())
    assert e.is_constant() and e.const == 1


def test_translation_canonicalization():
    f = MomentFunctional(W3)
    assert f.evaluate(parse_operator("Z0 Z1")) == f.evaluate(parse_operator("Z-1 Z0"))
    assert f.var_of(_string("X-1")) == f.var_of(_string("X1"))
    assert f.evaluate(parse_operator("Z-1 Z1")) != f.evaluate(parse_operator("Z0 Z1"))


def test_linearity_example():
    f = MomentFunctional(W3)
    e = f.evaluate(parse_operator("2 X0 + 3 I"))
    assert e.const == 3
    assert list(e.vars) == [f.var_of(_string("X0"))]
    assert e.coefs[0] == 2


def test_real_mode_pins_odd_y():
    f = MomentFunctional(W3, real=True)
    assert f.var_of(_string("Y0")) == ZERO
    assert f.var_of(_string("Y0 Y1")) >= 0
    assert f.var_of(_string("I")) == CONST
    assert f.n_vars < MomentFunctional(W3).n_vars


def test_evaluate_rejects_outside_support():
    with pytest.raises(ValueError):
        MomentFunctional(W3).evaluate(parse_operator("Z2"))


def test_moment_matrix_small_examples():
    f = MomentFunctional(Window.interval(0, 1))
    m = f.moment_matrix([PauliOperator.identity()])
    assert np.allclose(m.value(np.zeros(f.n_vars)), [[1]])
    m = f.moment_matrix([PauliOperator.identity(), parse_operator("Z0")])
    z = f.var_of(_string("Z0"))
    x = np.zeros(f.n_vars)
    x[z] = 0.3
    assert np.allclose(m.value(x), [[1, 0.3], [0.3, 1]])


def test_full_two_site_basis_maximally_mixed_is_psd():
    f = MomentFunctional(Window.interval(0, 1))
    from kmsbound.relaxation import basis_bits

    xs, zs = basis_bits(f, f.window.sites)
    g = f.string_gram(xs, zs, xs, zs)
    assert g.size == 16
    m = g.value(np.zeros(f.n_vars))
    assert np.allclose(m, np.eye(16))
    assert np.linalg.eigvalsh(m).min() > 0.99


@given(n=st.integers(1, 3), seed=st.integers(0, 2**31))
def test_state_moments_give_psd_moment_matrix(n, seed):
    rng = np.random.default_rng(seed)
    rho = random_density(rng, n, rank=1 + int(rng.integers(0, 1 << n)))
    w = Window.interval(0, n - 1)
    f = MomentFunctional(w)
    # identification averages over orbits, so feed a translation-invariant state
    rho_ti = sum(_shift_state(rho, k, n) for k in range(n)) / n if n > 1 else rho
    vals = f.values_from_state(rho_ti)
    from kmsbound.relaxation import basis_bits

    xs, zs = basis_bits(f, w.sites)
    m = f.string_gram(xs, zs, xs, zs).value(vals)
    assert np.allclose(m, m.conj().T)
    assert np.linalg.eigvalsh(m).min() > -1e-9
    d = f.density_matrix().value(vals) / (1 << n)
    assert np.linalg.eigvalsh(d).min() > -1e-9


def _shift_state(rho, k, n):
    # cyclic relabelling of qubits (a permutation, so still a state)
    t = rho.reshape((2,) * (2 * n))
    perm = [(i + k) % n for i in range(n)]
    t = np.transpose(t, perm + [p + n for p in perm])
    return t.reshape(1 << n, 1 << n)


def test_ed_moments_reproduce_expectations():
    w = W3
    rho, f = ed_gibbs_marginal(tfising(0.7), 8, 1.0, w)
    for text in ("Z0 Z1", "X0", "Z-1 X0 Z1", "0.5 X-1 + Z0 Z1"):
        a = parse_operator(text)
        ref = np.trace(rho @ to_dense(a, w.sites))
        assert f.expectation(a) == pytest.approx(ref, abs=1e-10)
    assert np.allclose(f.state(), rho, atol=1e-10)


def test_csv_round_trip():
    _, f = ed_gibbs_marginal(tfising(0.7), 8, 1.0, W3)
    text = f.to_csv()
    assert text.startswith("pauli_string,value\nI,1\n")
    g = MomentFunctional(W3).read_csv(text)
    assert np.array_equal(g.values, f.values)
    with pytest.raises(ValueError):
        MomentFunctional(W3).read_csv("pauli_string,value\nI,1\n")


def test_affine_matrix_realify_preserves_spectrum(rng):
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    h = a + a.conj().T
    m = AffineMatrix.constant(h)
    r = m.realify().value(np.zeros(0)).real
    ev = np.sort(np.linalg.eigvalsh(h))
    assert np.allclose(np.sort(np.linalg.eigvalsh(r)), np.sort(np.concatenate([ev, ev])))
