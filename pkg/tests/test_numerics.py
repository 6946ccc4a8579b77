import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import simpson

from oqs.errors import DomainError, NoConvergence, SingularJacobian, ZeroPolynomial
from oqs.numerics import (
    Tolerance,
    bessel_j1,
    eig_dense,
    j1_over_x,
    newton2d,
    poly_roots,
    quad_adaptive,
)

complex_coef = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


# polynomial roots


def test_roots_of_z2_minus_1():
    r = poly_roots([1, 0, -1])
    assert np.allclose(sorted(r, key=lambda z: z.real), [-1, 1], atol=1e-14)


def test_roots_dimer_even_quadratic():
    r = sorted(poly_roots([0.75, -0.5, 1]), key=lambda z: z.imag)
    want = [(1 - 1j * np.sqrt(11)) / 3, (1 + 1j * np.sqrt(11)) / 3]
    assert np.allclose(r, want, atol=1e-14)


def test_roots_rebuild_coefficients():
    rng = np.random.default_rng(0)
    for deg in range(1, 9):
        for _ in range(40):
            c = rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1)
            r = np.array(poly_roots(c))
            assert r.size == deg
            assert np.max(np.abs(np.poly(r) * c[0] - c)) < 1e-10


def test_roots_match_numpy():
    c = [2.0, -3.0, 0.5, 7.0, -1.0]
    ours = np.sort_complex(np.array(poly_roots(c)))
    ref = np.sort_complex(np.roots(c))
    assert np.allclose(ours, ref, atol=1e-12)


def test_roots_multiple_root():
    r = poly_roots([1, -3, 3, -1])
    assert np.allclose(r, 1.0, atol=1e-4)


def test_roots_trailing_zeros_strip_leading():
    assert np.allclose(sorted(poly_roots([0, 0, 1, -2]), key=abs), [2.0])


def test_roots_zero_polynomial():
    with pytest.raises(ZeroPolynomial):
        poly_roots([0, 0, 0])


@settings(max_examples=60, deadline=None)
@given(st.lists(complex_coef, min_size=2, max_size=9).filter(lambda c: abs(c[0]) > 0.1))
def test_roots_vieta_sum_and_product(c):
    r = np.array(poly_roots(c))
    d = len(c) - 1
    scale = max(abs(x) for x in c) / abs(c[0])
    assert abs(r.sum() + c[1] / c[0]) <= 1e-9 * max(1.0, scale)
    assert abs(np.prod(r) - (-1) ** d * c[-1] / c[0]) <= 1e-9 * max(1.0, scale) ** d


# Newton in two dimensions


def test_newton_circle_line():
    x, y = newton2d(lambda x, y: (x * x + y * y - 1, x - y), (0.6, 0.6))
    assert abs(x - np.sqrt(0.5)) < 1e-12 and abs(y - np.sqrt(0.5)) < 1e-12


def test_newton_with_jacobian():
    f = lambda x, y: (x**3 - y, y - 8.0)  # noqa: E731
    jac = lambda x, y: np.array([[3 * x * x, -1.0], [0.0, 1.0]])  # noqa: E731
    x, y = newton2d(f, (1.5, 1.0), jac)
    assert abs(x - 2) < 1e-12 and abs(y - 8) < 1e-12


def test_newton_singular_jacobian():
    with pytest.raises(SingularJacobian):
        newton2d(lambda x, y: (x + y - 1, 2 * x + 2 * y - 3), (0.2, 0.1))


def test_newton_no_root():
    with pytest.raises(NoConvergence):
        newton2d(lambda x, y: (x * x + 1, y), (0.3, 0.0), tol=Tolerance(1e-12, 1e-10, 30))


# adaptive quadrature


def test_quad_sin():
    assert abs(quad_adaptive(np.sin, 0, np.pi) - 2) < 1e-12


def test_quad_sin_squared():
    assert abs(quad_adaptive(lambda k: np.sin(k) ** 2, -np.pi, np.pi) - np.pi) < 1e-12


def test_quad_bessel_representation():
    v = quad_adaptive(lambda k: np.sin(k) ** 2 * np.exp(2j * np.cos(k)), -np.pi, np.pi)
    assert abs(v - np.pi * bessel_j1(2.0)) < 1e-12


@pytest.mark.parametrize("t", [3.0, 17.0, 60.0])
def test_quad_against_simpson(t):
    f = lambda k: np.sin(k) * np.exp(2j * t * np.cos(k)) / (np.exp(-1j * k) - 0.3 - 0.2j)  # noqa: E731
    x = np.linspace(-np.pi, np.pi, 1_000_001)
    ref = simpson(f(x), x=x)
    assert abs(quad_adaptive(f, -np.pi, np.pi, Tolerance(1e-12, 0.0), panels=32) - ref) < 1e-7


def test_quad_vector_valued():
    ts = np.array([0.5, 1.0, 5.0])
    v = quad_adaptive(lambda k: np.sin(k)[:, None] ** 2 * np.exp(2j * np.cos(k)[:, None] * ts), -np.pi, np.pi)
    assert np.allclose(v, np.pi * bessel_j1(2 * ts) / ts, atol=1e-11, rtol=0)


def test_quad_budget_exhausted():
    with pytest.raises(NoConvergence), np.errstate(divide="ignore", invalid="ignore"):
        quad_adaptive(lambda x: 1 / np.sqrt(np.abs(x - 1 / np.pi)), 0, 1, Tolerance(1e-14, 0.0), max_panels=64)


def test_quad_bad_interval():
    with pytest.raises(DomainError):
        quad_adaptive(np.sin, 1.0, 0.0)


# Bessel J1


def test_j1_small_arguments():
    assert bessel_j1(0.0) == 0.0
    assert abs(bessel_j1(1e-4) - 5e-5) < 1e-12


@pytest.mark.parametrize("x", [1.0, 0.3, 2.5, 7.0, 31.4, 250.0, 9999.0])
def test_j1_against_mpmath(x):
    mpmath.mp.dps = 30
    assert abs(bessel_j1(x) - float(mpmath.besselj(1, x))) < 1e-12


def test_j1_value_at_one():
    assert abs(bessel_j1(1.0) - 0.44005058574493355) < 1e-15


def test_j1_out_of_range():
    with pytest.raises(DomainError):
        bessel_j1(2e6)


def test_j1_over_x_limit():
    assert j1_over_x(0.0) == 0.5
    xs = np.array([1e-6, 1e-4, 2e-4, 0.1])
    assert np.allclose(j1_over_x(xs), [float(mpmath.besselj(1, x) / x) for x in xs], atol=1e-15, rtol=0)


# dense eigensolver


def test_eig_identity_and_diagonal():
    mu, _ = eig_dense(np.eye(3))
    assert np.allclose(mu, 1)
    mu, _ = eig_dense(np.diag([1.0, 2.0, 3.0]))
    assert np.allclose(np.sort(mu.real), [1, 2, 3])


def test_eig_open_chain():
    n = 100
    M = -np.eye(n, k=1) - np.eye(n, k=-1)
    mu, V = eig_dense(M, hermitian=True)
    want = np.sort(-2 * np.cos(np.arange(1, n + 1) * np.pi / (n + 1)))
    assert np.allclose(np.sort(mu), want, atol=1e-12)
    assert np.linalg.norm(M @ V - V * mu) < 1e-9 * np.linalg.norm(M)


def test_eig_hermitian_real_spectrum():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    mu, _ = eig_dense(A + A.conj().T)
    assert np.max(np.abs(np.imag(mu))) < 1e-10


def test_eig_rejects_bad_input():
    with pytest.raises(DomainError):
        eig_dense(np.ones((2, 3)))
    with pytest.raises(DomainError):
        eig_dense(np.full((2, 2), np.nan))


def test_tolerance_validation():
    with pytest.raises(DomainError):
        Tolerance(0.0, 0.0)
    with pytest.raises(DomainError):
        Tolerance(max_iter=0)
