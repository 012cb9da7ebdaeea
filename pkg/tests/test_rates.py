import csv
import io
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vamrates.core import DomainError
from vamrates.moduli import Modulus, brute_cauchy_modulus, check_cauchy_modulus, check_rate_of_convergence
from vamrates.operators import affine_map, constant_map
from vamrates.rates import (
    LinearRateParams,
    RateCertificate,
    certificate_csv_text,
    derive_error_moduli,
    derive_gamma1,
    example2_kz,
    kz_bound,
    linear_rates_example1,
    linear_rates_example2,
    phi_rate,
    provenance_text,
    psi_rate,
    theta_m_rate,
    vam_phi_rate,
    vam_psi_rate,
    vam_rates,
)
from vamrates.schedules import example2

ident = Modulus(lambda k: k, "id", monotone=True)
zero = Modulus.constant(0, "0")


def cert(fn, kind="successive", name="Phi"):
    return RateCertificate(name, Modulus(fn, monotone=True), kind, "test")


# -- K_z -----------------------------------------------------------------------


def test_kz_bound_examples():
    z = np.zeros(2)
    assert kz_bound(z, z, affine_map(0.5, np.eye(2)), 0, "vam") == 1
    f = affine_map(0.5, np.eye(1), [1.0])
    assert kz_bound([2.0], [0.0], f, 0, "vame") == 3
    u = constant_map([3.0])
    assert kz_bound([1.0], [0.0], u, 0, "hppa") == 3
    assert kz_bound([1.0], [0.0], u, 2, "hppa", inexact=True) == 6


def test_kz_bound_rejects_hppa_with_contraction():
    with pytest.raises(DomainError):
        kz_bound([1.0], [0.0], affine_map(0.5, np.eye(1)), 0, "hppa")


def test_example2_kz():
    f = affine_map(0.0, np.eye(1), [0.0])
    assert example2_kz([1.0], [0.0], f, 0.0) == 1
    # J = 2: ceil(|e*|/(J-1)) = ceil(2.5) = 3
    assert example2_kz([1.0], [0.0], f, 2.5) == 4


# -- derivation lemmas -----------------------------------------------------------


def test_derive_error_moduli_zero():
    theta2, E = derive_error_moduli(zero, np.zeros(10))
    assert theta2.values(3) == [1, 1, 1, 1] and E == 1


def test_derive_error_moduli_geometric():
    en = 2.0 ** -np.arange(200)
    theta1 = brute_cauchy_modulus(np.cumsum(en))
    theta2, E = derive_error_moduli(theta1, en)
    t0 = theta1(0)
    assert t0 == 0  # S_m - S_0 = 2^-1 + ... + 2^-m < 1
    assert E == math.ceil(sum(2.0**-i for i in range(t0 + 1))) + 1 == 2
    assert check_rate_of_convergence(theta2, en, 0.0, 30, 199)


def test_derive_error_moduli_inverse_square():
    n = np.arange(10**5 + 1)
    en = 1 / (n + 2.0) ** 2
    theta1 = brute_cauchy_modulus(np.cumsum(en))
    theta2, E = derive_error_moduli(theta1, en)
    assert theta1(0) == 0 and E == 2
    assert check_rate_of_convergence(theta2, en, 0.0, 200, 10**5)
    assert en.sum() <= E


def test_derive_error_moduli_accepts_callables():
    _, E = derive_error_moduli(Modulus.constant(3), lambda i: 0.5)
    assert E == 3


def test_derive_gamma1_examples():
    assert derive_gamma1(zero, 1, 0).values(5) == [0] * 6
    g = derive_gamma1(ident, 2, 5)
    assert g(0) == 5 and g(3) == 7
    assert g.values(10) == [max(5, 2 * k + 1) for k in range(11)]


def test_derive_gamma1_on_example2_lambdas():
    sched = example2(0.0, [0.0])
    m = sched.moduli
    g = derive_gamma1(m.gamma3, m.Lambda, m.N_Lambda)
    la = sched.lambdas(10**4)
    assert check_cauchy_modulus(g, np.cumsum(np.abs(1 - la[1:] / la[:-1])), 500, 10**4 - 1)
    assert check_cauchy_modulus(g, np.cumsum(np.abs(1 - la[:-1] / la[1:])), 500, 10**4 - 1)


# -- general rates ------------------------------------------------------------------


def test_phi_examples():
    assert phi_rate(ident, zero, zero, zero, 2, 0.0)(0) == 5
    assert phi_rate(ident, zero, zero, zero, 1, 0.0)(0) == 4
    vals = phi_rate(ident, ident, ident, ident, 3, 0.7).modulus.values(40)
    assert vals == sorted(vals)


def test_psi_examples():
    phi = cert(lambda k: 5 * k + 5)
    psi = psi_rate(phi, ident, zero, 1)
    assert psi(0) == 15 and psi.residual_kind == "scheme"
    assert psi_rate(cert(lambda k: 0), zero, zero, 1).modulus.values(5) == [0] * 6
    assert all(psi(k) >= phi(3 * k + 2) for k in range(30))


def test_psi_needs_successive_parent():
    with pytest.raises(DomainError):
        psi_rate(cert(lambda k: k, "scheme"), zero, zero, 1)


def test_theta_examples():
    psi = cert(lambda k: k, "scheme", "Psi")
    th = theta_m_rate(psi, 1, 0, 1, 4)
    assert th.modulus.values(5) == [2 * k + 1 for k in range(6)]
    assert th.name == "Theta[m=4]" and th.m == 4 and th.kind_label == "fixed_m(4)"
    assert theta_m_rate(cert(lambda k: 0, "scheme", "Psi"), 1, 7, 1, 0).modulus.values(4) == [7] * 5
    wide = theta_m_rate(psi, 3, 2, 5, 1)
    assert all(wide(k) >= psi(2 * k + 1) for k in range(30))


def test_vam_examples():
    phi = vam_phi_rate(ident, zero, zero, 1, 0.0)
    assert phi(0) == 4
    psi = vam_psi_rate(phi, zero, 1)
    assert all(psi(k) == phi(2 * k + 1) for k in range(20))
    _, psi2, th = vam_rates(ident, zero, zero, zero, 1, 0.0, 1, 0, 1, 0)
    assert all(th(k) == psi2(2 * k + 1) for k in range(20))


# independent reference evaluation with exact rationals and a generous log
def _ref_phi(s1, s2, g1, t1, K, alpha, k, vam=False):
    c = 4 if vam else 6
    def chi(j):
        parts = [s2(c * K * (j + 1) - 1), g1(c * K * (j + 1) - 1)]
        if not vam:
            parts.append(t1(6 * j + 5))
        return max(parts)
    L = math.ceil(math.log(4 * K * (k + 1)) + 1e-12)
    P = Fraction(chi(2 * k + 1) + 1 + L)
    return s1(math.ceil(P / (1 - Fraction(alpha))) + 1)


def _poly(a, b):
    return Modulus(lambda k: a * k + b, monotone=True)


moduli = st.builds(_poly, st.integers(0, 5), st.integers(0, 20))


@settings(max_examples=100)
@given(moduli, moduli, moduli, moduli, moduli, st.integers(1, 50), st.sampled_from([0.0, 0.25, 0.5, 0.9]), st.integers(0, 30))
def test_phi_matches_reference(s1, s2, g1, t1, s3, K, alpha, k):
    phi = phi_rate(s1, s2, g1, t1, K, alpha)
    assert phi(k) == _ref_phi(s1, s2, g1, t1, K, alpha, k)
    star = vam_phi_rate(s1, s2, g1, K, alpha)
    assert star(k) == _ref_phi(s1, s2, g1, t1, K, alpha, k, vam=True)
    psi = psi_rate(phi, s3, t1, K)
    assert psi(k) == max(s3(6 * K * (k + 1) - 1), phi(3 * k + 2), t1(3 * k + 2))
    psi_s = vam_psi_rate(star, s3, K)
    assert psi_s(k) == max(s3(4 * K * (k + 1) - 1), star(2 * k + 1))
    th = theta_m_rate(psi, 2, 3, 4, 1)
    assert th(k) == max(3, psi(8 * (k + 1) - 1), psi(2 * k + 1))
    assert phi(k) <= phi(k + 1) and psi(k) <= psi(k + 1) and th(k) <= th(k + 1)


def test_huge_rates_saturate():
    exp = Modulus(lambda n: math.exp(n), monotone=True)
    phi = phi_rate(exp, ident, ident, ident, 10**6, 0.99)
    assert phi.modulus.is_saturated(0)
    assert psi_rate(phi, ident, ident, 10**6).modulus.is_saturated(5)


def test_input_validation():
    with pytest.raises(DomainError):
        phi_rate(ident, zero, zero, zero, 0, 0.0)
    with pytest.raises(DomainError):
        phi_rate(ident, zero, zero, zero, 1, 1.0)
    with pytest.raises(DomainError):
        theta_m_rate(cert(lambda k: k, "scheme"), 0, 0, 1, 0)
    with pytest.raises(DomainError):
        RateCertificate("x", ident, "fixed_m", "p")
    with pytest.raises(DomainError):
        RateCertificate("x", ident, "scheme", "")
    with pytest.raises(DomainError):
        RateCertificate("x", ident, "weird", "p")


# -- linear rates -------------------------------------------------------------------


def test_linear_params():
    assert LinearRateParams.from_alpha(0.5) == LinearRateParams(0.5, 2, 4)
    with pytest.raises(DomainError):
        LinearRateParams.from_alpha(-0.1)


def test_example1_rates():
    phi0, psi0 = linear_rates_example1(1, 0.0)
    assert phi0.modulus.values(4) == [4 * k + 2 for k in range(5)]
    assert psi0.modulus.values(4) == [8 * k + 6 for k in range(5)]
    phi0, psi0 = linear_rates_example1(1, 0.5)
    assert phi0.modulus.values(4) == [16 * (k + 1) - 4 for k in range(5)]
    assert all(phi0(k) <= psi0(k) for k in range(100))


def test_example2_rates():
    phi0, psi0, theta0, bound = linear_rates_example2(1, 0.0, 0.0)
    assert phi0.modulus.values(4) == [6 * k + 4 for k in range(5)]
    assert psi0.modulus.values(4) == [18 * (k + 1) - 2 for k in range(5)]
    assert theta0.modulus.values(4) == [36 * k + 34 for k in range(5)]
    assert bound(0) == 3.0
    assert theta0.for_m(7).m == 7 and theta0.for_m(7).name == "Theta0[m=7]"


def test_example2_error_terms_add_middle_term():
    _, psi0, theta0, _ = linear_rates_example2(2, 0.5, 3.2)
    c = 2
    assert psi0(0) == 18 * 2 * c * c + 3 * 4 * c - 2 * c
    assert theta0(1) == 2 * (36 * 2 * c * c + 6 * 4 * c) - 2 * c


@settings(max_examples=60)
@given(st.integers(1, 40), st.sampled_from([0.0, 0.3, 0.5, 0.75, 0.9]), st.floats(0, 50), st.integers(0, 200))
def test_example2_general_constructions_coincide(K, alpha, e_norm, k):
    phi0, psi0, theta0, _ = linear_rates_example2(K, alpha, e_norm)
    m = example2(alpha, [e_norm]).moduli
    psi = psi_rate(phi0, m.sigma3, m.theta2, K)
    assert psi(k) == psi0(k)
    th = theta_m_rate(psi, m.Lambda, m.N_Lambda, m.Lambda_m(0), 0)
    assert th(k) == theta0(k)


def test_theta0_for_m_keeps_modulus_but_derived_theta_does_not():
    phi0, *_ = linear_rates_example2(1, 0.0, 0.0)
    th = theta_m_rate(psi_rate(phi0, ident, zero, 1), 1, 0, 2, 0)
    with pytest.raises(DomainError):
        th.for_m(3)
    with pytest.raises(DomainError):
        phi0.as_fixed_m(1)


# -- export --------------------------------------------------------------------------


def test_certificate_csv():
    phi0, _ = linear_rates_example1(1, 0.0)
    rows = list(csv.reader(io.StringIO(certificate_csv_text(phi0, 3))))
    assert rows[0] == ["k", "modulus_value", "bound"]
    assert rows[1:] == [[str(k), str(4 * k + 2), repr(1 / (k + 1))] for k in range(4)]
    sat = RateCertificate("S", Modulus(lambda k: math.inf, monotone=True), "successive", "p")
    assert "saturated" in certificate_csv_text(sat, 1)


def test_provenance_lists_hypotheses():
    phi = phi_rate(ident, zero, zero, zero, 2, 0.0)
    text = provenance_text(psi_rate(phi, ident, zero, 2))
    for tag in ("rate:Phi", "H3alpha", "H2e", "Kz"):
        assert tag in text
    assert phi.preconditions == ("H1alpha", "H2alpha", "H1lambda", "H1e", "Kz")
