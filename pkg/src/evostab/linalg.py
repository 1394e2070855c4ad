"""Dense complex linear algebra used throughout the package.

Every function accepts either a single ``(n, m)`` matrix or a stack of
matrices with shape ``(..., n, m)``; stacked inputs return arrays of
results, which is how frequency grids are evaluated in one call.
"""

import numpy as np

__all__ = [
    "RANK_RTOL",
    "SingularMatrixError",
    "as_cmatrix",
    "herm_part",
    "herm_min_eig",
    "op_norm",
    "smallest_sv",
    "inv_norm",
    "solve",
]

# sigma_min <= RANK_RTOL * op_norm counts as singular
RANK_RTOL = 1e-12


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a matrix is numerically singular."""


def as_cmatrix(S, square=False):
    """Return `S` as a finite complex array with at least two dimensions."""
    S = np.asarray(S, dtype=complex)
    if S.ndim == 0:
        S = S.reshape(1, 1)
    if S.ndim < 2:
        raise ValueError(f"expected a matrix, got shape {S.shape}")
    if S.shape[-1] == 0 or S.shape[-2] == 0:
        raise ValueError("matrix must have positive dimensions")
    if square and S.shape[-1] != S.shape[-2]:
        raise ValueError(f"expected a square matrix, got shape {S.shape[-2:]}")
    if not np.all(np.isfinite(S)):
        raise ValueError("matrix has non-finite entries")
    return S


def herm_part(S):
    """Hermitian part ``(S + S*)/2``."""
    S = as_cmatrix(S, square=True)
    return 0.5 * (S + np.conj(np.swapaxes(S, -1, -2)))


def herm_min_eig(S):
    """Smallest eigenvalue of the Hermitian part of `S`.

    This is the best constant ``c`` with ``Re <Sx|x> >= c |x|^2``.
    """
    lam = np.linalg.eigvalsh(herm_part(S))[..., 0]
    return float(lam) if lam.ndim == 0 else lam


def _singular_values(S):
    return np.linalg.svd(as_cmatrix(S), compute_uv=False)


def op_norm(S):
    """Spectral norm (largest singular value)."""
    s = _singular_values(S)[..., 0]
    return float(s) if s.ndim == 0 else s


def smallest_sv(S):
    """Smallest singular value; zero for rank-deficient input."""
    s = _singular_values(S)[..., -1]
    return float(s) if s.ndim == 0 else s


def inv_norm(S):
    """Spectral norm of the inverse, ``1/sigma_min``; ``inf`` if singular."""
    s = _singular_values(S)
    smin, smax = s[..., -1], s[..., 0]
    with np.errstate(divide="ignore"):
        out = np.where(smin > RANK_RTOL * smax, 1.0 / np.where(smin > 0, smin, 1.0), np.inf)
    return float(out) if out.ndim == 0 else out


def solve(S, b, check="svd"):
    """Solve ``S x = b`` for a square, numerically invertible `S`.

    Parameters
    ----------
    check : {"svd", "residual"}
        ``"svd"`` rejects ``sigma_min(S) <= RANK_RTOL * ||S||`` up front;
        ``"residual"`` solves first and rejects non-finite solutions or a
        backward error above ``1e-8``, which is much cheaper for large stacks.

    Raises
    ------
    SingularMatrixError
        If `S` is singular within tolerance.
    """
    S = as_cmatrix(S, square=True)
    if check == "svd":
        s = _singular_values(S)
        if np.any(s[..., -1] <= RANK_RTOL * s[..., 0]):
            raise SingularMatrixError("matrix is singular within tolerance")
    elif check != "residual":
        raise ValueError(f"unknown check {check!r}")
    b = np.asarray(b, dtype=complex)
    vec = b.ndim == S.ndim - 1
    rhs = b[..., None] if vec else b
    try:
        x = np.linalg.solve(S, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError(str(exc)) from exc
    if check == "residual":
        if not np.all(np.isfinite(x)):
            raise SingularMatrixError("solution is not finite")
        r = np.linalg.norm(S @ x - rhs, axis=-2)
        scale = np.abs(S).sum(axis=(-2, -1))[..., None] * np.linalg.norm(x, axis=-2) + np.linalg.norm(rhs, axis=-2)
        if np.any(r > 1e-8 * np.maximum(scale, np.finfo(float).tiny)):
            raise SingularMatrixError("backward error too large; matrix nearly singular")
    return x[..., 0] if vec else x
