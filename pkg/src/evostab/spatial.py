"""Discrete spatial operators: the invertible gradient core ``C`` and the
skew block operator ``A = [[0, C*], [-C, 0]]``.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .linalg import RANK_RTOL, as_cmatrix, herm_min_eig, op_norm, smallest_sv

__all__ = [
    "SpatialC",
    "BlockA",
    "dirichlet_1d",
    "gradient_1d",
    "from_matrix",
    "block_A",
    "validate_accretive_invertible",
    "read_matrix_csv",
    "parse_complex",
    "poincare_constant_1d",
]


@dataclass(frozen=True, eq=False)
class SpatialC:
    """Square invertible operator ``C`` with cached inverse and norms.

    Attributes
    ----------
    C : ndarray, shape (n, n)
    sigma_min : float
        Smallest singular value; ``||C^{-1}|| = 1/sigma_min``.
    provenance : str
        Human-readable origin, e.g. ``"dirichlet_1d(31)"``.
    """

    C: np.ndarray
    sigma_min: float
    provenance: str = "matrix"

    def __post_init__(self):
        C = as_cmatrix(self.C, square=True)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "_Cinv", np.linalg.inv(C))

    @property
    def n(self):
        return self.C.shape[0]

    @property
    def c_inv_norm(self):
        return 1.0 / self.sigma_min

    @property
    def is_real(self):
        return bool(np.all(self.C.imag == 0))

    @property
    def adjoint(self):
        return self.C.conj().T

    @property
    def inverse(self):
        return self._Cinv

    @property
    def laplacian(self):
        """``C* C``."""
        return self.adjoint @ self.C


def gradient_1d(n):
    """Forward-difference gradient ``(n+1) x n`` with zero boundary values."""
    if n < 1:
        raise ValueError("n must be at least 1")
    h = 1.0 / (n + 1)
    G = np.zeros((n + 1, n))
    idx = np.arange(n)
    G[idx, idx] = 1.0 / h
    G[idx + 1, idx] = -1.0 / h
    return G


def _reduce(M):
    """Square core ``Sigma V*`` of a full-column-rank matrix ``M = U Sigma V*``.

    ``core* core = M* M`` so norms and ``||C^{-1}||`` are preserved.
    """
    U, s, Vh = np.linalg.svd(M, full_matrices=False)
    if s[-1] <= RANK_RTOL * s[0]:
        raise ValueError("matrix does not have full column rank")
    core = s[:, None] * Vh
    # fix the sign so that the core has a positive-real diagonal where possible
    d = np.diag(core)
    phase = np.where(np.abs(d) > 0, np.conj(d) / np.where(np.abs(d) > 0, np.abs(d), 1.0), 1.0)
    return phase[:, None] * core, float(s[-1])


def dirichlet_1d(n):
    """Reduced gradient on ``(0, 1)`` with Dirichlet conditions on `n` nodes.

    ``C* C = tridiag(-1, 2, -1) / h^2`` with ``h = 1/(n+1)`` and
    ``sigma_min(C) = (2/h) sin(pi / (2(n+1)))``.
    """
    G = gradient_1d(n)
    core, smin = _reduce(G)
    if np.all(np.abs(core.imag) == 0):
        core = core.real
    return SpatialC(core, smin, provenance=f"dirichlet_1d({n})")


def from_matrix(M, provenance="matrix"):
    """Build :class:`SpatialC` from a square invertible or tall full-rank matrix."""
    M = as_cmatrix(M)
    rows, cols = M.shape
    if rows < cols:
        raise ValueError("C must have at least as many rows as columns")
    if rows == cols:
        smin = smallest_sv(M)
        if smin <= RANK_RTOL * op_norm(M):
            raise ValueError("C is singular")
        core = M
    else:
        core, smin = _reduce(M)
    if np.all(core.imag == 0):
        core = core.real
    return SpatialC(core, float(smin), provenance=provenance)


@dataclass(frozen=True, eq=False)
class BlockA:
    """Skew block operator ``[[0, C*], [-C, 0]]``, or a user-supplied ``A``."""

    A: np.ndarray
    C: SpatialC = None

    @property
    def dim(self):
        return self.A.shape[0]

    @property
    def inv_norm(self):
        """``||A^{-1}||``; equals ``||C^{-1}||`` in block form."""
        if self.C is not None:
            return self.C.c_inv_norm
        return 1.0 / smallest_sv(self.A)

    @property
    def norm(self):
        return op_norm(self.A)

    def apply_inverse(self, x):
        """``A^{-1}(f, g) = (-C^{-1} g, C^{-*} f)``."""
        x = np.asarray(x, dtype=complex)
        if self.C is None:
            return np.linalg.solve(self.A, x)
        n = self.C.n
        f, g = x[..., :n], x[..., n:]
        top = -(g @ self.C.inverse.T)
        bottom = f @ self.C.inverse.conj()
        return np.concatenate([top, bottom], axis=-1)


def block_A(C):
    """Assemble ``A = [[0, C*], [-C, 0]]`` for a :class:`SpatialC`."""
    n = C.n
    A = np.zeros((2 * n, 2 * n), dtype=C.C.dtype)
    A[:n, n:] = C.adjoint
    A[n:, :n] = -C.C
    return BlockA(A, C)


def validate_accretive_invertible(A, tol=1e-12):
    """Accept a general ``A`` if ``Re A >= -tol`` and ``A`` is invertible.

    Raises
    ------
    ValueError
        If either hypothesis fails.
    """
    A = as_cmatrix(A, square=True)
    lam = herm_min_eig(A)
    if lam < -tol:
        raise ValueError(f"A is not accretive: min eig of Re A = {lam:.3e}")
    smin = smallest_sv(A)
    if smin <= RANK_RTOL * op_norm(A):
        raise ValueError("A is not invertible")
    return BlockA(A.real if np.all(A.imag == 0) else A, None)


def parse_complex(text):
    """Parse ``"a+bi"``, ``"a-bj"``, ``"3"`` or ``"2i"`` into a complex."""
    s = text.strip().replace(" ", "").replace("i", "j")
    if not s:
        raise ValueError("empty matrix entry")
    if s.endswith("j") and s[:-1] in ("", "+", "-"):
        s = s[:-1] + "1j"
    return complex(s)


def read_matrix_csv(path):
    """Read a complex matrix from CSV; dimensions are inferred."""
    with open(path, newline="") as fh:
        rows = [[parse_complex(x) for x in row] for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError(f"{path}: empty matrix file")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError(f"{path}: ragged rows")
    M = np.array(rows, dtype=complex)
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{path}: non-finite entries")
    return M


def poincare_constant_1d(n):
    """Closed form ``(2/h) sin(pi/(2(n+1)))`` of ``sigma_min`` for :func:`dirichlet_1d`."""
    h = 1.0 / (n + 1)
    return (2.0 / h) * math.sin(math.pi / (2 * (n + 1)))
