import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import special

from surplus_ruin import specfun
from surplus_ruin.errors import ConvergenceError, DomainError


# -- incomplete gamma -------------------------------------------------------

def test_upper_gamma_eta_one_is_exponential():
    assert specfun.upper_incomplete_gamma(2.0, 1.0) == pytest.approx(math.exp(-2.0), rel=1e-14)


def test_upper_gamma_from_zero_is_gamma():
    assert specfun.upper_incomplete_gamma(0.0, 3.0) == pytest.approx(2.0, rel=1e-14)


def test_upper_gamma_quadrature_oracle():
    oracle = 0.7357588823428847  # int_1^inf t e^-t dt = 2/e, by parts
    assert specfun.upper_incomplete_gamma(1.0, 2.0) == pytest.approx(oracle, rel=1e-13)


@given(st.floats(0.0, 60.0), st.floats(0.05, 30.0))
def test_upper_gamma_matches_scipy(x, eta):
    ref = special.gammaincc(eta, x) * special.gamma(eta)
    if ref < 1e-290:
        return
    assert specfun.upper_incomplete_gamma(x, eta) == pytest.approx(ref, rel=1e-11)


@pytest.mark.parametrize("x, eta", [(800.0, 3.0), (5.0, 0.01), (0.3, 0.5), (1e3, 50.0)])
def test_log_upper_gamma_mpmath(x, eta):
    ref = float(mpmath.log(mpmath.gammainc(eta, x)))
    assert specfun.log_upper_incomplete_gamma(x, eta) == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_exp1_scaled():
    for x in (1e-3, 0.5, 1.0, 7.0, 40.0, 1e4):
        assert specfun.exp1_scaled(x) == pytest.approx(float(mpmath.exp(x) * mpmath.e1(x)),
                                                       rel=1e-13)
    assert specfun.exp1(2.0) == pytest.approx(special.exp1(2.0), rel=1e-14)


def test_upper_gamma_domain():
    with pytest.raises(DomainError):
        specfun.upper_incomplete_gamma(-1.0, 2.0)
    with pytest.raises(DomainError):
        specfun.upper_incomplete_gamma(1.0, 0.0)


@given(st.floats(0.0, 50.0), st.floats(0.05, 20.0))
def test_upper_gamma_recurrence(x, eta):
    lhs = specfun.upper_incomplete_gamma(x, eta + 1.0)
    rhs = eta * specfun.upper_incomplete_gamma(x, eta) + x ** eta * math.exp(-x)
    assert lhs == pytest.approx(rhs, rel=1e-10)


@given(st.lists(st.floats(0.0, 100.0), min_size=2, max_size=8, unique=True), st.floats(0.1, 10))
def test_upper_gamma_decreasing(xs, eta):
    xs = sorted(xs)
    if min(np.diff(xs)) < 0.1:
        return
    vals = [specfun.log_upper_incomplete_gamma(x, eta) for x in xs]
    assert all(b < a for a, b in zip(vals, vals[1:]))


# -- Kummer ------------------------------------------------------------------

@given(st.floats(-3, 3), st.floats(0.2, 4))
def test_kummer_m_at_zero(a, b):
    assert specfun.kummer_m(a, b, 0.0) == 1.0


def test_kummer_m_closed_form():
    assert specfun.kummer_m(1.0, 2.0, 1.0) == pytest.approx(math.e - 1.0, rel=1e-14)


def test_kummer_m_large_argument_asymptote():
    val = specfun.kummer_m(2.0, 3.0, 30.0)
    asym = math.gamma(3.0) / math.gamma(2.0) * math.exp(30.0) / 30.0
    assert abs(val / asym - 1.0) < 0.05


@given(st.floats(-4, 4), st.floats(0.3, 5), st.floats(0, 60))
def test_kummer_m_matches_mpmath(a, b, z):
    ref = float(mpmath.hyp1f1(a, b, z))
    assert specfun.kummer_m(a, b, z) == pytest.approx(ref, rel=1e-10, abs=1e-12)


def test_kummer_u_integral_oracle():
    # U(1,1,z) = e^z E1(z)
    assert specfun.kummer_u(1.0, 1.0, 5.0) == pytest.approx(0.17042217628473224, rel=1e-12)
    quad = float(mpmath.quad(lambda t: mpmath.exp(-t) * t ** -0.5 / (1 + t), [0, mpmath.inf])
                 / mpmath.gamma(0.5))
    assert specfun.kummer_u(0.5, 0.5, 1.0) == pytest.approx(quad, abs=1e-8)


def test_kummer_u_large_z_asymptote():
    assert abs(specfun.kummer_u(2.0, 1.5, 200.0) * 200.0 ** 2 - 1.0) < 0.02


@given(st.floats(0.05, 6), st.floats(-3, 5), st.floats(0.01, 300))
def test_kummer_u_matches_mpmath(a, b, z):
    ref = float(mpmath.log(mpmath.hyperu(a, b, z)))
    assert specfun.log_kummer_u(a, b, z) == pytest.approx(ref, rel=1e-9, abs=1e-9)


@given(st.floats(0.1, 4), st.floats(-2, 3), st.floats(1, 200))
def test_kummer_u_decay_normalisation(a, b, z):
    # U z^a -> 1, and the monotone decrease in z
    assert specfun.kummer_u(a, b, z) > specfun.kummer_u(a, b, 1.5 * z) > 0


def _fd_residual(f, z, coeffs):
    # fourth-order central differences
    h = 1e-2 * min(1.0, z)
    w = [f(z + k * h) for k in (-2, -1, 0, 1, 2)]
    w0 = w[2]
    d1 = (w[0] - 8 * w[1] + 8 * w[3] - w[4]) / (12 * h)
    d2 = (-w[0] + 16 * w[1] - 30 * w[2] + 16 * w[3] - w[4]) / (12 * h * h)
    a2, a1, a0 = coeffs
    terms = [a2 * d2, a1 * d1, a0 * w0]
    return abs(sum(terms)) / max(abs(t) for t in terms)


@given(st.floats(0.2, 3), st.floats(0.5, 3), st.floats(0.5, 20))
def test_kummer_ode_residual(a, b, z):
    coeffs = (z, b - z, -a)
    assert _fd_residual(lambda t: specfun.kummer_m(a, b, t), z, coeffs) < 1e-6
    assert _fd_residual(lambda t: specfun.kummer_u(a, b, t), z, coeffs) < 1e-6


@given(st.floats(0, 6), st.floats(0.3, 40))
def test_bessel_ode_residual(nu, z):
    coeffs = (z * z, z, -(z * z + nu * nu))
    assert _fd_residual(lambda t: specfun.bessel_i(nu, t), z, coeffs) < 1e-6
    assert _fd_residual(lambda t: specfun.bessel_k(nu, t), z, coeffs) < 1e-6


def test_kummer_u_domain():
    with pytest.raises(DomainError):
        specfun.kummer_u(1.0, 1.0, 0.0)


# -- Bessel ------------------------------------------------------------------

def test_bessel_k_half_order():
    assert specfun.bessel_k(0.5, 2.0) == pytest.approx(math.sqrt(math.pi / 4) * math.exp(-2),
                                                       rel=1e-14)


def test_bessel_k_symmetric_in_order():
    assert specfun.bessel_k(-3.0, 1.7) == specfun.bessel_k(3.0, 1.7)


def test_bessel_i_large_argument():
    val = specfun.bessel_i(1.0, 50.0) * math.sqrt(2 * math.pi * 50.0) / math.exp(50.0)
    assert abs(val - 1.0) < 0.02


@given(st.floats(-8, 8), st.floats(1e-3, 700))
def test_bessel_against_scipy(nu, x):
    k_ref = special.kve(nu, x)
    i_ref = special.ive(nu, x)
    assert math.exp(specfun.log_bessel_k(nu, x) + x) == pytest.approx(k_ref, rel=1e-11)
    if nu >= 0:
        assert math.exp(specfun.log_bessel_i(nu, x) - x) == pytest.approx(
            float(mpmath.besseli(nu, x) * mpmath.exp(-x)), rel=1e-10)
    else:
        assert specfun.bessel_i(nu, x) * math.exp(-x) == pytest.approx(i_ref, rel=1e-9,
                                                                        abs=1e-12 * abs(k_ref))


@given(st.floats(0, 10), st.floats(0.01, 100))
def test_bessel_wronskian(nu, x):
    # I_nu K_{nu+1} + I_{nu+1} K_nu = 1/x
    lhs = (math.exp(specfun.log_bessel_i(nu, x) + specfun.log_bessel_k(nu + 1, x))
           + math.exp(specfun.log_bessel_i(nu + 1, x) + specfun.log_bessel_k(nu, x)))
    assert lhs * x == pytest.approx(1.0, rel=1e-11)


def test_bessel_ratios():
    assert specfun.bessel_ratio_k(2.0, 3.0) == pytest.approx(special.kv(3, 3) / special.kv(2, 3),
                                                              rel=1e-12)
    assert specfun.bessel_ratio_i(2.0, 3.0) == pytest.approx(special.iv(3, 3) / special.iv(2, 3),
                                                              rel=1e-12)


# -- quadrature --------------------------------------------------------------

def test_semi_infinite_examples():
    assert specfun.integrate_to_infinity(lambda t: np.exp(-t), 0.0).value == pytest.approx(1.0, abs=1e-10)
    assert specfun.integrate_to_infinity(lambda t: t * np.exp(-t), 1.0).value == pytest.approx(
        2 / math.e, abs=1e-10)
    assert specfun.integrate_to_infinity(lambda t: np.exp(-t * t), 0.0).value == pytest.approx(
        math.sqrt(math.pi) / 2, abs=1e-10)


def test_finite_interval_and_error_estimate():
    res = specfun.integrate(np.sin, 0.0, math.pi, tol=1e-12)
    assert res.value == pytest.approx(2.0, abs=1e-12)
    assert res.abs_error_estimate < 1e-10
    assert res.evaluations > 0


def test_quadrature_failures():
    with pytest.raises(ConvergenceError):
        specfun.integrate_to_infinity(lambda t: np.ones_like(t), 0.0, max_evals=2000)
    with pytest.raises(ConvergenceError):
        specfun.integrate(lambda t: np.full_like(t, np.nan), 0.0, 1.0)


@given(st.floats(0.0, 20.0))
def test_quadrature_split_consistency(b):
    f = lambda t: (1 + t) * np.exp(-0.7 * t)
    whole = specfun.integrate_to_infinity(f, 0.0, tol=1e-12)
    left = specfun.integrate(f, 0.0, b, tol=1e-12)
    right = specfun.integrate_to_infinity(f, b, tol=1e-12)
    slack = whole.abs_error_estimate + left.abs_error_estimate + right.abs_error_estimate
    assert abs(whole.value - left.value - right.value) <= slack + 1e-13


@given(st.floats(0.1, 20), st.floats(0, 10))
def test_exponential_integrand_property(rate, a):
    res = specfun.integrate_to_infinity(lambda t: np.exp(-rate * (t - a)), a, tol=1e-12,
                                        scale=1.0 / rate)
    assert res.value == pytest.approx(1.0 / rate, rel=1e-10)
