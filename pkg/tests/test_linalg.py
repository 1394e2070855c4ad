import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from evostab.linalg import (
    SingularMatrixError,
    as_cmatrix,
    herm_min_eig,
    inv_norm,
    op_norm,
    smallest_sv,
    solve,
)
from evostab.spatial import gradient_1d

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def cmat(n):
    return st.builds(lambda a, b: a + 1j * b, arrays(float, (n, n), elements=finite),
                     arrays(float, (n, n), elements=finite))


def test_herm_min_eig_examples():
    assert herm_min_eig(np.eye(2)) == pytest.approx(1.0)
    assert herm_min_eig(np.array([[0.0, 1.0], [-1.0, 0.0]])) == pytest.approx(0.0, abs=1e-15)
    assert herm_min_eig(np.diag([2.0, -3.0])) == pytest.approx(-3.0)


def test_herm_min_eig_rejects_non_square():
    with pytest.raises(ValueError):
        herm_min_eig(np.ones((2, 3)))


def test_op_norm_examples():
    assert op_norm(np.eye(3)) == pytest.approx(1.0)
    assert op_norm(np.diag([3.0, 1.0])) == pytest.approx(3.0)
    assert op_norm(np.zeros((2, 2))) == 0.0


def test_smallest_sv_examples():
    assert smallest_sv(np.diag([3.0, 1.0])) == pytest.approx(1.0)
    assert smallest_sv(np.zeros((2, 2))) == 0.0
    # tridiagonal Laplacian with h = 1/4: lambda_min = (4/h^2) sin^2(pi/8)
    G = gradient_1d(3)
    L = G.T @ G
    assert smallest_sv(np.linalg.cholesky(L).T) == pytest.approx(3.0615, abs=1e-4)


def test_solve_examples():
    b = np.array([1.0 + 2j, -3.0])
    assert np.allclose(solve(np.eye(2), b), b)
    assert np.allclose(solve(np.diag([2.0, 4.0]), np.array([2.0, 4.0])), [1.0, 1.0])
    with pytest.raises(SingularMatrixError):
        solve(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2))
    with pytest.raises(SingularMatrixError):
        solve(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2), check="residual")
    with pytest.raises(ValueError):
        solve(np.eye(2), np.ones(2), check="none")


def test_solve_batched_matches_loop(rng):
    S = rng.normal(size=(5, 4, 4)) + 1j * rng.normal(size=(5, 4, 4)) + 4 * np.eye(4)
    b = rng.normal(size=(5, 4))
    x = solve(S, b, check="residual")
    for k in range(5):
        assert np.allclose(S[k] @ x[k], b[k])


def test_as_cmatrix_rejects_nan():
    with pytest.raises(ValueError):
        as_cmatrix(np.array([[np.nan]]))


def test_inv_norm_singular_is_inf():
    assert inv_norm(np.zeros((2, 2))) == np.inf
    assert inv_norm(np.diag([2.0, 4.0])) == pytest.approx(0.5)


@given(cmat(4))
def test_herm_min_eig_lower_bounds_quadratic_form(S):
    lam = herm_min_eig(S)
    rng = np.random.default_rng(0)
    x = rng.normal(size=(100, 4)) + 1j * rng.normal(size=(100, 4))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    q = np.real(np.einsum("ki,ij,kj->k", x.conj(), S, x))
    assert np.all(q >= lam - 1e-10)
    # attained by the eigenvector of the Hermitian part
    w, V = np.linalg.eigh(0.5 * (S + S.conj().T))
    v = V[:, 0]
    assert np.real(v.conj() @ S @ v) == pytest.approx(lam, abs=1e-9)


@given(cmat(3))
def test_op_norm_adjoint_invariant(S):
    assert op_norm(S) == pytest.approx(op_norm(S.conj().T), rel=1e-12, abs=1e-12)


@given(cmat(3))
def test_smallest_sv_times_inverse_norm(S):
    S = S + 12 * np.eye(3)
    assert smallest_sv(S) * op_norm(np.linalg.inv(S)) == pytest.approx(1.0, abs=1e-8)


@given(cmat(3), st.floats(0.1, 5.0))
def test_positive_herm_part_bounds_inverse(S, c):
    # shift so that herm_min_eig(S) = c exactly
    S = S - (herm_min_eig(S) - c) * np.eye(3)
    assert op_norm(np.linalg.inv(S)) <= 1.0 / c + 1e-8


def test_accuracy_on_200x200(rng):
    Q, _ = np.linalg.qr(rng.normal(size=(200, 200)))
    s = np.linspace(1.0, 10.0, 200)
    S = (Q * s) @ Q.T
    assert op_norm(S) == pytest.approx(10.0, rel=1e-10)
    assert smallest_sv(S) == pytest.approx(1.0, rel=1e-10)
    assert herm_min_eig(S) == pytest.approx(1.0, rel=1e-10)
