import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evostab.linalg import herm_min_eig, op_norm, smallest_sv
from evostab.spatial import (
    block_A,
    dirichlet_1d,
    from_matrix,
    gradient_1d,
    parse_complex,
    poincare_constant_1d,
    read_matrix_csv,
    validate_accretive_invertible,
)


def laplacian_1d(n):
    h = 1.0 / (n + 1)
    return (2 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)) / h**2


def test_dirichlet_small_examples():
    C3 = dirichlet_1d(3)
    assert C3.sigma_min == pytest.approx(3.0615, abs=1e-4)
    assert C3.c_inv_norm == pytest.approx(0.3266, abs=1e-4)
    assert C3.sigma_min**2 == pytest.approx(9.3726, abs=1e-4)
    C1 = dirichlet_1d(1)
    assert np.allclose(C1.laplacian, [[8.0]])
    assert C1.sigma_min == pytest.approx(2 * math.sqrt(2))


def test_dirichlet_large_n_approaches_pi():
    C = dirichlet_1d(200)
    assert abs(C.sigma_min - math.pi) / math.pi < 1e-3


@pytest.mark.parametrize("n", [1, 2, 3, 10, 31, 200])
def test_dirichlet_laplacian_and_sigma(n):
    C = dirichlet_1d(n)
    assert np.allclose(C.laplacian, laplacian_1d(n), rtol=1e-10, atol=1e-8 * (n + 1) ** 2)
    assert C.sigma_min == pytest.approx(poincare_constant_1d(n), rel=1e-10)
    assert smallest_sv(C.C) == pytest.approx(C.sigma_min, rel=1e-10)
    assert C.c_inv_norm * C.sigma_min == pytest.approx(1.0, abs=1e-10)


def test_gradient_shape():
    G = gradient_1d(4)
    assert G.shape == (5, 4)
    with pytest.raises(ValueError):
        gradient_1d(0)


def test_block_A_examples():
    A = block_A(from_matrix(np.array([[2.0]])))
    assert A.inv_norm == pytest.approx(0.5)
    assert op_norm(np.linalg.inv(A.A)) == pytest.approx(0.5)
    A3 = block_A(dirichlet_1d(3))
    assert A3.inv_norm == pytest.approx(0.3266, abs=1e-4)
    assert op_norm(np.linalg.inv(A3.A)) == pytest.approx(A3.inv_norm, abs=1e-10)
    assert herm_min_eig(A3.A) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("n", [1, 5, 31])
def test_block_A_skew_and_inverse(n, rng):
    A = block_A(dirichlet_1d(n))
    assert np.array_equal(A.A.T, -A.A)
    x = rng.normal(size=(20, 2 * n)) + 1j * rng.normal(size=(20, 2 * n))
    q = np.real(np.einsum("ki,ij,kj->k", x.conj(), A.A, x))
    assert np.all(np.abs(q) <= 1e-12 * np.sum(np.abs(x) ** 2, axis=1) * op_norm(A.A))
    assert 1.0 / A.inv_norm == pytest.approx(smallest_sv(A.A), rel=1e-10)
    assert np.allclose(A.A @ A.apply_inverse(x).T, x.T)


@given(st.integers(2, 6), st.integers(0, 4), st.integers(0, 2**31 - 1))
def test_from_matrix_range_reduction(cols, extra, seed):
    rng = np.random.default_rng(seed)
    M = rng.normal(size=(cols + extra, cols)) + 1j * rng.normal(size=(cols + extra, cols))
    C = from_matrix(M)
    assert C.C.shape == (cols, cols)
    assert np.allclose(C.laplacian, M.conj().T @ M)
    assert C.sigma_min == pytest.approx(smallest_sv(M), rel=1e-10)


def test_from_matrix_errors():
    with pytest.raises(ValueError):
        from_matrix(np.ones((2, 3)))
    with pytest.raises(ValueError):
        from_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(ValueError):
        from_matrix(np.array([[1.0, 1.0], [1.0, 1.0], [1.0, 1.0]]))


def test_validate_user_A():
    ok = validate_accretive_invertible(np.array([[1.0, 2.0], [-2.0, 0.5]]))
    assert ok.inv_norm > 0
    with pytest.raises(ValueError, match="accretive"):
        validate_accretive_invertible(np.diag([1.0, -1.0]))
    with pytest.raises(ValueError, match="invertible"):
        validate_accretive_invertible(np.array([[0.0, 1.0], [-1.0, 0.0]]) * 0)


def test_parse_complex():
    assert parse_complex("1+2i") == 1 + 2j
    assert parse_complex(" 3 ") == 3
    assert parse_complex("-i") == -1j
    assert parse_complex("2.5-0.5j") == 2.5 - 0.5j
    with pytest.raises(ValueError):
        parse_complex("")


def test_read_matrix_csv(tmp_path):
    p = tmp_path / "C.csv"
    p.write_text("2,1+i\n0,3\n")
    M = read_matrix_csv(p)
    assert M.shape == (2, 2)
    assert M[0, 1] == 1 + 1j
    bad = tmp_path / "bad.csv"
    bad.write_text("1,2\n3\n")
    with pytest.raises(ValueError, match="ragged"):
        read_matrix_csv(bad)
