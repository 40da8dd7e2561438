import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kmsbound.conic import ProgramBuilder
from kmsbound.dop import (
    DopConfig,
    DopSupportError,
    dop_exact,
    dop_m_exact,
    emit_dop_m_constraint,
    h_m_error_bound,
    h_m_scalar,
    scalar_dop_m,
)
from kmsbound.moments import AffineMatrix
from kmsbound.solvers import solve


def rand_pd(rng, n, complex_=True, floor=0.05):
    g = rng.normal(size=(n, n)) + (1j * rng.normal(size=(n, n)) if complex_ else 0)
    return g @ g.conj().T / n + floor * np.eye(n)


def min_eig(m):
    return np.linalg.eigvalsh((m + m.conj().T) / 2).min()


def test_exact_examples():
    assert np.allclose(dop_exact(np.eye(3), np.eye(3)), 0)
    d = dop_exact(np.diag([1.0, 2.0]), np.eye(2))
    assert np.allclose(d, np.diag([0.0, 2 * math.log(2)]))


def test_homogeneity(rng):
    A, B = rand_pd(rng, 4), rand_pd(rng, 4)
    lam = 3.7
    assert np.allclose(dop_exact(lam * A, lam * B), lam * dop_exact(A, B))


def test_scalar_agreement(rng):
    x, y = 0.7, 0.2
    assert dop_exact(np.array([[x]]), np.array([[y]]))[0, 0] == pytest.approx(x * math.log(x / y))


def test_support_violation_reports_vector():
    A = np.diag([1.0, 1.0])
    B = np.diag([1.0, 0.0])
    with pytest.raises(DopSupportError) as exc:
        dop_exact(A, B)
    v = exc.value.vector
    assert abs(abs(v[1]) - 1) < 1e-12
    # A supported inside B is fine and stays on the support
    d = dop_exact(np.diag([0.5, 0.0]), B)
    assert np.allclose(d, np.diag([0.5 * math.log(0.5), 0.0]))


def test_joint_convexity(rng):
    for _ in range(10):
        A1, B1, A2, B2 = (rand_pd(rng, 3) for _ in range(4))
        avg = dop_exact((A1 + A2) / 2, (B1 + B2) / 2)
        mix = (dop_exact(A1, B1) + dop_exact(A2, B2)) / 2
        assert min_eig(mix - avg) >= -1e-9


def test_transformer_inequality(rng):
    for _ in range(10):
        A, B = rand_pd(rng, 4), rand_pd(rng, 4)
        K = rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))
        lhs = dop_exact(K.conj().T @ A @ K, K.conj().T @ B @ K)
        rhs = K.conj().T @ dop_exact(A, B) @ K
        assert min_eig(rhs - lhs) >= -1e-9


def test_h_m_examples():
    for m in range(6):
        assert h_m_scalar(1.0, m) == 0.0
    assert h_m_scalar(4.0, 1) == pytest.approx(2.0)
    assert h_m_scalar(2.5, 0) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        h_m_scalar(0.0, 2)
    with pytest.raises(ValueError):
        DopConfig(m=-1)


@given(x=st.floats(1e-3, 1e3), m=st.integers(0, 8))
def test_h_m_ladder_and_error_bound(x, m):
    lo = math.log(x)
    hm, hm1 = h_m_scalar(x, m), h_m_scalar(x, m + 1)
    tol = 1e-12 * max(1.0, abs(hm))
    assert lo - tol <= hm1 <= hm + tol
    assert -tol <= hm - lo <= h_m_error_bound(x, m) + tol


def test_matrix_ladder_increases_towards_dop(rng):
    # -h_m >= -log pointwise, so D^[m] <= D_op, and D^[m] grows with m
    for _ in range(10):
        X, Y = rand_pd(rng, 4), rand_pd(rng, 4)
        exact = dop_exact(X, Y)
        prev = None
        for m in range(6):
            cur = dop_m_exact(X, Y, m)
            assert min_eig(exact - cur) >= -1e-9
            if prev is not None:
                assert min_eig(cur - prev) >= -1e-9
            prev = cur


def _min_t(X, Y, m, hermitian):
    n = X.shape[0]
    pb = ProgramBuilder(1)
    T = AffineMatrix(n, np.arange(n), np.arange(n), np.zeros(n, np.int64), np.ones(n))
    em = emit_dop_m_constraint(AffineMatrix.constant(X), AffineMatrix.constant(Y), T, m, 1, hermitian=hermitian)
    pb.new_vars(em.n_new_vars)
    for blk in em.blocks:
        pb.add_psd(blk)
    pb.set_objective([0], [1.0])
    return solve(pb.build(), tol=1e-10)


def _feasible(X, Y, T, m):
    pb = ProgramBuilder(0)
    em = emit_dop_m_constraint(AffineMatrix.constant(X), AffineMatrix.constant(Y), AffineMatrix.constant(T), m, 0)
    pb.new_vars(em.n_new_vars)
    for blk in em.blocks:
        pb.add_psd(blk)
    return solve(pb.build(), tol=1e-9).status


@pytest.mark.parametrize("m", [0, 1, 2, 3])
@pytest.mark.parametrize("complex_", [False, True])
def test_emission_matches_exact_extremal_t(rng, m, complex_):
    X, Y = rand_pd(rng, 3, complex_), rand_pd(rng, 3, complex_)
    res = _min_t(X, Y, m, complex_)
    assert res.ok
    ref = np.linalg.eigvalsh(dop_m_exact(X, Y, m)).max()
    assert res.objective == pytest.approx(ref, abs=1e-6)


def test_emission_scalar_case():
    x, y = 0.6, 0.3
    for m in (1, 3):
        res = _min_t(np.array([[x]]), np.array([[y]]), m, False)
        assert res.objective == pytest.approx(scalar_dop_m(x, y, m), abs=1e-7)
    assert _min_t(np.array([[0.4]]), np.array([[0.4]]), 2, False).objective == pytest.approx(0, abs=1e-7)


def test_emission_thresholds_at_e_squared():
    I = np.eye(2)
    level = -8 * (math.exp(2 / 8) - 1)  # D^[3](I || e^2 I) ~ -2.272
    assert level == pytest.approx(-2.272, abs=5e-4)
    assert scalar_dop_m(1.0, math.e**2, 3) == pytest.approx(level, rel=1e-12)
    assert _feasible(I, math.e**2 * I, -2.2 * I, 3) in ("optimal", "near_optimal")
    assert _feasible(I, math.e**2 * I, -2.3 * I, 3) == "infeasible"
    assert _feasible(I, I, 0 * I, 3) in ("optimal", "near_optimal")


def test_emission_size_mismatch():
    with pytest.raises(ValueError):
        emit_dop_m_constraint(AffineMatrix.identity(2), AffineMatrix.identity(3), AffineMatrix.identity(2), 1, 0)
