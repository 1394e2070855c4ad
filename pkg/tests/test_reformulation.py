import numpy as np
import pytest

from evostab.laws import (
    Const,
    ConvResolvent,
    DelayFactor,
    Scale,
    SecondOrderLaw,
    eval_law,
    eval_symbol,
    law_sup_bound,
)
from evostab.linalg import herm_min_eig, op_norm
from evostab.reformulation import K_of_d, build_Md, lemma_lower_bound, nd_norm_factor, recover_u, split_Md
from evostab.spatial import dirichlet_1d, from_matrix
from evostab.timedomain import relative_l2, solve_frequency


def direct_Md(law, Cinv, d, s):
    """Independent transcription of the block law at frequency ``s`` (``w = 1/s``)."""
    w = 1.0 / s
    M0 = eval_law(law.M0, s)
    M1 = eval_law(law.M1, s)
    n = M0.shape[0]
    I = np.eye(n)
    M = M0 + w * M1
    top = np.hstack([M - d * w * M0, d * w * (d * M0 - M1) @ Cinv])
    bottom = np.hstack([np.zeros((n, n)), (1 + d * w) * I])
    return np.vstack([top, bottom])


def families(kernel, n=5, seed=0):
    """Damped wave, memory law and a non-normal affine law on dirichlet_1d(n)."""
    rng = np.random.default_rng(seed)
    C = dirichlet_1d(n)
    I = np.eye(n)
    B = rng.normal(size=(n, n))
    P = B @ B.T / n
    S = rng.normal(size=(n, n))
    Q = 0.5 * (S - S.T) + 0.8 * I
    R = ConvResolvent(kernel, n)
    return C, [
        ("damped", SecondOrderLaw(Const(I), Const(0.2 * I), 5.0), 0.1),
        ("memory", SecondOrderLaw(R, Scale(0.3, R), 2.0), 0.2),
        ("affine", SecondOrderLaw(Const(P), Const(Q), 1.0), 0.3),
    ]


def test_md_scalar_example():
    C = from_matrix(np.array([[2.0]]))
    law = SecondOrderLaw(Const(np.eye(1)), Const(0.2 * np.eye(1)), 5.0)
    sys = build_Md(law, C, 0.1)
    # M_d at w = 1, i.e. frequency 1: symbol equals 1 * M_d
    assert np.allclose(sys.symbol(1.0), [[1.1, -0.005], [0.0, 1.1]], atol=1e-15)


def test_md_d_zero_is_block_diagonal(kernel, rng):
    C, fams = families(kernel)
    for _, law, _ in fams:
        sys = build_Md(law, C, 0.0)
        s = 0.3 + rng.uniform(-4, 4, 10) * 1j
        sym = sys.symbol(s)
        n = C.n
        assert np.allclose(sym[:, :n, :n], eval_symbol(law, s))
        assert np.allclose(sym[:, :n, n:], 0)
        assert np.allclose(sym[:, n:, n:], s[:, None, None] * np.eye(n))


def test_md_matches_direct_formula(kernel, rng):
    C, fams = families(kernel)
    for _, law, _ in fams:
        for d in (0.05, 0.4):
            sys = build_Md(law, C, d)
            for s in 0.1 + rng.uniform(0, 2, 20) + 1j * rng.uniform(-10, 10, 20):
                assert np.max(np.abs(sys.symbol(s) - s * direct_Md(law, C.inverse, d, s))) <= 1e-12


def test_split_recomposes(kernel, rng):
    C, fams = families(kernel)
    for _, law, _ in fams:
        sys = build_Md(law, C, 0.2)
        s = 0.1 + rng.uniform(0, 2, 50) + 1j * rng.uniform(-10, 10, 50)
        # s (Mt + N/s) = s Mt + N
        recomposed = eval_symbol(sys.tilde, s) + eval_law(sys.N, s)
        assert np.max(np.abs(recomposed - sys.symbol(s))) <= 1e-10


def test_split_zero_m1(kernel):
    C = dirichlet_1d(4)
    law = SecondOrderLaw(ConvResolvent(kernel, 4), Const(np.zeros((4, 4))), 2.0)
    _, N = split_Md(law, C, 0.3)
    assert np.all(eval_law(N, np.array([0.5, 1 + 2j])) == 0)


def test_nd_norm_bound_for_delay(kernel, rng):
    C = dirichlet_1d(7)
    R = ConvResolvent(kernel, 7)
    delay = Scale(0.1, DelayFactor(1.0, R))
    d = 0.3
    _, N = split_Md(SecondOrderLaw(R, delay, 2.0), C, d)
    s = -0.2 + rng.uniform(0, 2, 100) + 1j * rng.uniform(-20, 20, 100)
    lhs = op_norm(eval_law(N, s))
    rhs = nd_norm_factor(d, C.c_inv_norm) * op_norm(eval_law(delay, s))
    assert np.all(lhs <= rhs * (1 + 1e-12))


def test_K_of_d_examples():
    assert K_of_d(0.01, 3.0, 0.0, 0.3266) == pytest.approx(3.0009)
    assert K_of_d(0.09, 1.0, 0.2, 0.3266) == pytest.approx(1 + (0.09 + 0.2 * 0.3266) ** 2)
    assert K_of_d(0.09, 1.0, 0.2, 0.3266) == pytest.approx(1.0241, abs=1e-4)


def test_lemma_lower_bound(kernel):
    """Positivity transfers from ``M`` to ``M_d`` on 1000 random ``(z, d)``."""
    rng = np.random.default_rng(7)
    C, fams = families(kernel)
    checked = 0
    for _, law, rho in fams:
        m0, m1 = law_sup_bound(law.M0, rho), law_sup_bound(law.M1, rho)
        for _ in range(334):
            s = complex(-rho + rng.exponential(0.5), rng.normal(0, 5))
            if abs(s) < 0.05:
                continue
            d = float(np.exp(rng.uniform(np.log(1e-3), 0.0)))
            c = herm_min_eig(eval_symbol(law, s))
            if not c > 0:
                continue
            checked += 1
            lhs = herm_min_eig(build_Md(law, C, d).symbol(s))
            bound = lemma_lower_bound(c, d, s.real, m0, m1, C.c_inv_norm)
            assert lhs >= bound - 1e-10
    assert checked >= 600


def test_recover_u_examples():
    C = from_matrix(np.array([[2.0]]))
    u, du = recover_u(np.full((4, 1), 5.0), np.full((4, 1), 6.0), C, 1.0)
    assert np.allclose(u, 3.0) and np.allclose(du, 2.0)
    v = np.arange(4.0)[:, None]
    u, du = recover_u(v, np.zeros((4, 1)), C, 0.7)
    assert np.allclose(u, 0) and np.allclose(du, v)
    with pytest.raises(ValueError, match="mismatch"):
        recover_u(np.zeros((4, 1)), np.zeros((3, 1)), C, 1.0)


@pytest.fixture(scope="module")
def freq_damped(damped):
    return solve_frequency(damped, 0.5, 20.0, 20_000, d=0.05)


def test_recovered_velocity_is_derivative(freq_damped):
    u, du = freq_damped
    fd = np.gradient(u.values, u.dt, axis=0)
    assert relative_l2(du.values, fd) <= 1e-2


def test_first_order_solution_solves_second_order(damped, freq_damped):
    u, du = freq_damped
    ddu = np.gradient(du.values, u.dt, axis=0)
    L = damped.C.laplacian.real
    f = damped.source_samples(u.t)
    res = ddu + 0.2 * du.values + u.values @ L.T - f
    inner = slice(2, -2)
    assert np.linalg.norm(res[inner]) <= 1e-2 * np.linalg.norm(f)
