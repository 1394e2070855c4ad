import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from evostab.certify import positivity_constants_integro
from evostab.kernels import (
    SQRT_2PI,
    DiagExpSumKernel,
    ExpSumKernel,
    NotCertifiedError,
    SampledKernel,
    cannarsa_g,
    check_alabau,
    check_hypotheses,
    fourier_hat,
    g_lower_bound,
    kernel_est_constant,
    laplace_transform,
    phi_function,
    quadrature_transform_check,
    read_sampled_kernel_csv,
    weighted_l1_norm,
)

ZERO = ExpSumKernel((0.0,), (1.0,), alpha=0.25)


def sampled(kernel, T=30.0, dt=1e-3):
    t = np.arange(0.0, T + dt / 2, dt)
    return SampledKernel(t, kernel(t), tail_rate=kernel.min_rate)


def test_laplace_examples(kernel):
    assert laplace_transform(kernel, 0.0) == pytest.approx(0.5)
    assert laplace_transform(kernel, 1.0) == pytest.approx(0.25)
    assert laplace_transform(ZERO, 2.0 + 1j) == 0


def test_laplace_matches_quadrature(kernel):
    z = np.array([0.3 + 2j, -0.5 + 0.1j, 4.0])
    direct = []
    for zz in z:
        re = integrate.quad(lambda t: np.real(np.exp(-zz * t) * kernel(t)), 0, 60)[0]
        im = integrate.quad(lambda t: np.imag(np.exp(-zz * t) * kernel(t)), 0, 60)[0]
        direct.append(re + 1j * im)
    assert np.allclose(laplace_transform(kernel, z), direct, atol=1e-9)


def test_laplace_domain_violation(kernel):
    with pytest.raises(ValueError):
        laplace_transform(kernel, -1.0)


def test_weighted_norm_examples(kernel):
    assert weighted_l1_norm(kernel, 0.25) == pytest.approx(2 / 3)
    assert weighted_l1_norm(kernel, 0.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        weighted_l1_norm(kernel, 1.0)


def test_weighted_norm_mixed_sign_is_upper_bound():
    k = ExpSumKernel((1.0, -0.6), (1.0, 2.0))
    exact = integrate.quad(lambda t: abs(k(t)), 0, 60, limit=200)[0]
    assert weighted_l1_norm(k, 0.0) >= exact
    assert weighted_l1_norm(k, 0.0) == pytest.approx(1.3)


def test_diag_weighted_norm_by_quadrature():
    k = DiagExpSumKernel(([(0.3, 1.0)], [(0.2, 2.0), (0.1, 3.0)]), alpha=0.25)
    direct = integrate.quad(lambda t: math.exp(0.25 * t) * max(abs(float(c(t))) for c in k.channels),
                            0, 80, limit=400)[0]
    assert weighted_l1_norm(k, 0.25) == pytest.approx(direct, rel=1e-8)
    assert weighted_l1_norm(k, 0.25) >= direct


def test_hypotheses_examples(kernel):
    rep = check_hypotheses(kernel)
    assert rep.all_passed
    assert rep.weighted_norm == pytest.approx(2 / 3)
    bad = check_hypotheses(ExpSumKernel((0.9,), (1.0,), alpha=0.25))
    assert bad.failures() == ["c"]
    assert bad.weighted_norm == pytest.approx(1.2)
    diag = check_hypotheses(DiagExpSumKernel(([(0.3, 1.0)], [(0.2, 2.0)]), alpha=0.25))
    assert diag.passed["d"] and diag.passed["e"]


def test_g_examples(kernel):
    g = g_lower_bound(kernel, 0.5, 0.0)
    assert g == pytest.approx(0.5 * 0.25 / (SQRT_2PI * 1.25))
    assert g == pytest.approx(0.0399, abs=1e-4)
    assert g_lower_bound(kernel.scaled(2.0), 0.5, 0.0) == pytest.approx(2 * g)
    with pytest.raises(NotCertifiedError, match="not certified by this method"):
        g_lower_bound(ExpSumKernel((1.0, -0.6), (1.0, 2.0)), 0.5, 0.0)


def test_g_domain_errors(kernel):
    with pytest.raises(ValueError):
        g_lower_bound(kernel, 0.0, 0.0)
    with pytest.raises(ValueError):
        g_lower_bound(kernel, 0.5, -1.0)


def test_g_soundness(kernel, rng):
    delta = 0.125
    two = ExpSumKernel((0.3, 0.2), (1.0, 3.0), alpha=0.25)
    for k in (kernel, two):
        t = rng.uniform(delta, 50.0, 1000) * rng.choice([-1, 1], 1000)
        rho = rng.uniform(-0.2, 2.0, 1000)
        lhs = t * np.imag(fourier_hat(k, t - 1j * rho))
        g = np.array([g_lower_bound(k, delta, r) for r in rho])
        assert np.all(lhs <= -g + 1e-12)


def test_transform_symmetry(kernel):
    t = np.linspace(0.01, 20, 200)
    for rho in (0.0, 0.1, 1.0):
        a = np.imag(fourier_hat(kernel, -t - 1j * rho))
        b = np.imag(fourier_hat(kernel, t - 1j * rho))
        assert np.allclose(a, -b, atol=1e-15)


def test_alabau_examples(kernel):
    assert check_alabau(kernel, 0.8)
    assert check_alabau(kernel, 1.0)
    assert not check_alabau(ExpSumKernel((0.3, 0.2), (1.0, 3.0)), 2.0)
    with pytest.raises(TypeError):
        check_alabau(DiagExpSumKernel(([(0.3, 1.0)],)), 0.5)


@given(st.lists(st.tuples(st.floats(0.01, 1.0), st.floats(0.2, 5.0)), min_size=1, max_size=4),
       st.floats(0.05, 5.0))
def test_alabau_implies_derivative_bound(terms, a0):
    k = ExpSumKernel.from_terms(terms, 0.0)
    if check_alabau(k, a0):
        t = np.linspace(0, 30, 2001)
        assert np.all(k.derivative(t) + a0 * k(t) <= 1e-12)


def test_phi_and_kernel_constant(kernel):
    c = kernel_est_constant(kernel, 0.25)
    assert c == pytest.approx(0.5 / SQRT_2PI, abs=1e-12)
    assert c == pytest.approx(0.1995, abs=1e-4)
    assert phi_function(kernel, 0.25, 0.0) == pytest.approx(0.5 / (SQRT_2PI * 0.5625))
    assert phi_function(kernel, 0.25, 0.0) == pytest.approx(0.3546, abs=1e-4)
    # the t -> 0 limit equals (2 pi)^(-1/2) int s exp(alpha s) k(s) ds
    mom = integrate.quad(lambda s: s * math.exp(0.25 * s) * float(kernel(s)), 0, 200)[0]
    assert phi_function(kernel, 0.25, 0.0) == pytest.approx(mom / SQRT_2PI, rel=1e-8)
    t = np.linspace(1e-3, 100, 10_000)
    phi = phi_function(kernel, 0.25, t)
    direct = -(1 + t**2) / t * np.imag(fourier_hat(kernel, t + 0.25j))
    assert np.allclose(phi, direct, rtol=1e-10)
    assert np.all(phi >= c - 1e-14)


def test_kernel_estimate_inequality(kernel):
    c = kernel_est_constant(kernel, 0.25)
    t = np.linspace(1e-4, 200, 10_000)
    assert np.all(np.imag(fourier_hat(kernel, t + 0.25j)) <= -c * t / (1 + t**2) + 1e-12)


def test_kernel_constant_errors():
    with pytest.raises(ValueError):
        kernel_est_constant(ZERO, 0.25)
    with pytest.raises(ValueError):
        kernel_est_constant(ExpSumKernel((0.5,), (1.0,)), 1.0)
    with pytest.raises(NotCertifiedError):
        positivity_constants_integro(ZERO, 0.25, 0.125)


def test_cannarsa_g():
    assert cannarsa_g(1.0, 1.0, 1.0, 0.0) == pytest.approx(1 / (SQRT_2PI * 4) * 0.5)
    assert cannarsa_g(1.0, 1.0, 1.0, 0.0) == pytest.approx(0.0499, abs=1e-4)
    vals = [cannarsa_g(1.0, 1.0, 1.0, r) for r in np.linspace(0, 100, 50)]
    assert np.all(np.diff(vals) < 0)
    assert cannarsa_g(2.0, 0.5, 1e8, 0.3) == pytest.approx(2.0 / (SQRT_2PI * 1.8**2), rel=1e-12)


def test_sampled_oracle(kernel):
    s = sampled(kernel)
    assert quadrature_transform_check(s, 1.0).real == pytest.approx(0.25, abs=1e-6)
    assert quadrature_transform_check(s, 0.0).real == pytest.approx(0.5, abs=1e-6)
    z = np.array([0.5 + 3j, 2.0 - 1j])
    assert np.allclose(quadrature_transform_check(s, z), kernel.laplace(z), atol=1e-6)


def test_sampled_errors(tmp_path):
    with pytest.raises(ValueError):
        SampledKernel(np.array([]), np.array([]), tail_rate=1.0)
    with pytest.raises(ValueError):
        SampledKernel(np.array([0.0]), np.array([1.0]), tail_rate=1.0)
    p = tmp_path / "k.csv"
    p.write_text("t,k\n")
    with pytest.raises(ValueError):
        read_sampled_kernel_csv(p, 1.0)


def test_sampled_csv_roundtrip(tmp_path, kernel):
    t = np.arange(0, 30.0005, 1e-3)
    p = tmp_path / "k.csv"
    np.savetxt(p, np.column_stack([t, kernel(t)]), delimiter=",", header="t,k", comments="")
    s = read_sampled_kernel_csv(p, 1.0)
    assert laplace_transform(s, 1.0).real == pytest.approx(0.25, abs=1e-6)
