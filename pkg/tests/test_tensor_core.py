"""Finite differences, symmetric factorisation and inverse/determinant."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from bundlereduce.errors import ChartExitError, NonFiniteFieldError, NotPositiveDefiniteError, SingularMatrixError
from bundlereduce.tensor_core import (
    CURVATURE_FD,
    DEFAULT_FD,
    FDConfig,
    SmoothField,
    curvature_fd,
    curvature_fd_override,
    derivative,
    fd_derivative,
    inverse_det,
    sym_factor,
)

finite = st.floats(-3.0, 3.0, allow_nan=False, allow_infinity=False)


# -- finite differences -----------------------------------------------------------


def test_first_derivative_of_square():
    f = SmoothField(lambda q: q[..., 0] ** 2, 1)
    assert fd_derivative(f, [3.0], 0) == pytest.approx(6.0, abs=1e-8)


def test_second_derivative_of_quartic():
    f = SmoothField(lambda q: q[..., 0] ** 4, 1)
    assert fd_derivative(f, [1.0], 0, order=2) == pytest.approx(12.0, abs=1e-6)


def test_fd_order_validation():
    f = SmoothField(lambda q: q[..., 0], 1)
    with pytest.raises(ValueError):
        fd_derivative(f, [1.0], 0, order=3)


@given(hnp.arrays(float, 3, elements=finite), finite)
def test_constant_field_has_zero_derivative(q, c):
    f = SmoothField(lambda x: np.full(x.shape[:-1] + (2,), c), 3, (2,))
    assert np.max(np.abs(f.derivative(q))) <= 1e-9


@given(hnp.arrays(float, 2, elements=finite))
def test_analytic_jacobian_preferred(q):
    f = SmoothField(lambda x: np.sin(x[..., 0]) * x[..., 1], 2,
                    jacobian=lambda x: np.stack([np.cos(x[..., 0]) * x[..., 1], np.sin(x[..., 0])], -1))
    fd = derivative(f.func, q, DEFAULT_FD)
    assert np.allclose(f.derivative(q), fd, atol=1e-8)


@settings(max_examples=30)
@given(st.lists(st.floats(-2, 2), min_size=5, max_size=5), st.floats(0.3, 2.0))
def test_second_order_convergence(coeffs, x0):
    """Halving h cuts the central-difference error by >= 3x on quartic polynomials."""
    c = np.asarray(coeffs)
    c[4] = 1.0 if abs(c[4]) < 0.1 else c[4]  # keep a genuine h^2 error term
    poly = np.polynomial.Polynomial(c)
    exact = poly.deriv()(x0)
    f = lambda q: poly(q[..., 0])
    errs = [abs(derivative(f, [x0], FDConfig(step=h))[0] - exact) for h in (1e-1, 5e-2)]
    assert errs[1] <= errs[0] / 3.0 + 1e-11


def test_richardson_is_fourth_order():
    f = lambda q: np.exp(q[..., 0])
    e1 = abs(derivative(f, [0.5], FDConfig(step=1e-2, richardson=True))[0] - np.exp(0.5))
    e2 = abs(derivative(f, [0.5], FDConfig(step=1e-2))[0] - np.exp(0.5))
    assert e1 < e2 / 100


def test_batched_derivative_shape():
    f = lambda q: np.stack([q[..., 0] * q[..., 1], q[..., 1] ** 2], -1)
    Q = np.random.default_rng(0).normal(size=(4, 5, 2))
    D = derivative(f, Q)
    assert D.shape == (4, 5, 2, 2)
    assert np.allclose(D[..., 0, 0], Q[..., 1], atol=1e-8)
    assert np.allclose(D[..., 1, 1], 2 * Q[..., 1], atol=1e-8)


def test_non_finite_stencil_reports_point():
    f = lambda q: 1.0 / (q[..., 0] - 1.0)
    with np.errstate(divide="ignore"), pytest.raises(NonFiniteFieldError) as exc:
        derivative(f, [0.0], FDConfig(step=1.0))
    assert "stencil point" in str(exc.value)


def test_stencil_leaving_chart():
    with pytest.raises(ChartExitError):
        derivative(lambda q: q[..., 0], [1e-7], DEFAULT_FD, domain=lambda q: q[..., 0] > 0)


def test_fd_config_validation():
    with pytest.raises(ValueError):
        FDConfig(step=0.0)


def test_curvature_fd_override_is_scoped():
    assert curvature_fd() is CURVATURE_FD
    with curvature_fd_override(FDConfig(step=1e-2)) as cfg:
        assert curvature_fd() is cfg
    assert curvature_fd() is CURVATURE_FD


# -- symmetric factorisation ------------------------------------------------------


def test_sym_factor_examples():
    assert np.allclose(sym_factor(np.eye(3)), np.eye(3))
    assert np.allclose(sym_factor(np.diag([4.0, 1.0])), np.diag([2.0, 1.0]))


@st.composite
def spd(draw, n=3):
    A = draw(hnp.arrays(float, (n, n), elements=st.floats(-2, 2)))
    return A @ A.T + (0.1 + draw(st.floats(0, 2))) * np.eye(n)


@given(spd())
def test_sym_factor_round_trip(M):
    X = sym_factor(M)
    assert np.allclose(X, np.tril(X))
    assert np.max(np.abs(X @ X.T - M)) <= 1e-12 * np.max(np.abs(M)) * 10


def test_sym_factor_errors():
    with pytest.raises(NotPositiveDefiniteError):
        sym_factor(np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        sym_factor(np.array([[1.0, 0.5], [0.0, 1.0]]))


# -- inverse and determinant -------------------------------------------------------


def test_inverse_det_examples():
    inv, det = inverse_det(np.eye(3))
    assert np.allclose(inv, np.eye(3)) and det == pytest.approx(1.0)
    inv, det = inverse_det(np.diag([2.0, 5.0]))
    assert np.allclose(inv, np.diag([0.5, 0.2])) and det == pytest.approx(10.0)


def test_inverse_det_singular_carries_condition():
    with pytest.raises(SingularMatrixError) as exc:
        inverse_det(np.array([[1.0, 2.0], [2.0, 4.0]]))
    assert exc.value.condition > 1e10


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@given(data=st.data())
def test_inverse_det_consistency(n, data):
    M = data.draw(spd(n))
    inv, det = inverse_det(M)
    assert np.allclose(M @ inv, np.eye(n), atol=1e-10 * np.linalg.cond(M))
    _, det_inv = inverse_det(inv)
    assert det * det_inv == pytest.approx(1.0, abs=1e-10 * np.linalg.cond(M))


def test_inverse_det_batched_matches_numpy():
    M = np.random.default_rng(1).normal(size=(6, 2, 2)) + 3 * np.eye(2)
    inv, det = inverse_det(M)
    assert np.allclose(inv, np.linalg.inv(M)) and np.allclose(det, np.linalg.det(M))
