"""Analytic operator-valued material laws evaluated in the frequency variable.

A law ``M`` is a function of ``w = 1/z``; everything here is evaluated at
the frequency ``z = i t + rho`` directly, so ``law.evaluate(z)`` returns
``M(1/z)``.  Evaluation is vectorised: a scalar `z` gives an ``(n, n)``
array, an array of shape ``s`` gives ``s + (n, n)``.

Laws are immutable trees built from :class:`Const`, :class:`AffineInW`,
:class:`ConvResolvent`, :class:`DelayFactor`, :class:`Scale`, :class:`Sum`,
:class:`Product`, :class:`TimesW` and :class:`Block`.  Each node knows the
half-plane ``Re z > -alpha_dom`` on which it is analytic and can produce a
certified upper bound of its norm on ``Re z >= -rho`` (:func:`law_sup_bound`).
"""

import math
from dataclasses import dataclass

import numpy as np

from .kernels import DiagExpSumKernel, weighted_l1_norm
from .linalg import as_cmatrix, op_norm

__all__ = [
    "DomainError",
    "Law",
    "Const",
    "AffineInW",
    "ConvResolvent",
    "DelayFactor",
    "Scale",
    "Sum",
    "Product",
    "TimesW",
    "Block",
    "SecondOrderLaw",
    "BallSup",
    "eval_law",
    "eval_symbol",
    "law_sup_bound",
    "sup_symbol_on_ball",
    "default_delta",
]


class DomainError(ValueError):
    """Evaluation outside the half-plane where a law is analytic."""


def _z(z):
    z = np.asarray(z, dtype=complex)
    return z


def _bcast(mat, z):
    """Broadcast a constant ``(n, n)`` matrix over the shape of `z`."""
    return np.broadcast_to(mat, z.shape + mat.shape).copy()


class Law:
    """Base class of material-law expressions."""

    dim: int

    @property
    def alpha_dom(self):
        """Laws are analytic on ``Re z > -alpha_dom``."""
        return math.inf

    @property
    def is_real(self):
        """True if ``M(conj z) = conj M(z)`` (real coefficients)."""
        return True

    @property
    def needs_inverse_frequency(self):
        """True if evaluation at ``z = 0`` is undefined."""
        return False

    def evaluate(self, z):
        raise NotImplementedError

    def freq_times(self, z):
        """``z * M(1/z)`` with the analytic limit at ``z = 0`` where it exists."""
        z = _z(z)
        return z[..., None, None] * self.evaluate(z)

    def sup_bound(self, rho):
        """Certified bound of ``||M(1/z)||`` on ``Re z >= -rho``."""
        raise NotImplementedError

    def _check_domain(self, z):
        if np.any(z.real <= -self.alpha_dom):
            raise DomainError(f"Re z must exceed {-self.alpha_dom:g}")
        if self.needs_inverse_frequency and np.any(z == 0):
            raise DomainError("law is singular at z = 0")

    def __call__(self, z):
        return eval_law(self, z)

    def __add__(self, other):
        return Sum((self, other))

    def __matmul__(self, other):
        return Product((self, other))

    def __rmul__(self, factor):
        return Scale(float(factor), self)


@dataclass(frozen=True, eq=False)
class Const(Law):
    """``M(w) = P``."""

    P: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "P", as_cmatrix(self.P, square=True))

    @property
    def dim(self):
        return self.P.shape[0]

    @property
    def is_real(self):
        return bool(np.all(self.P.imag == 0))

    def evaluate(self, z):
        return _bcast(self.P, _z(z))

    def sup_bound(self, rho):
        return op_norm(self.P)


@dataclass(frozen=True, eq=False)
class AffineInW(Law):
    """``M(w) = P + w Q``; at frequency `z` this is ``P + Q/z``."""

    P: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        P = as_cmatrix(self.P, square=True)
        Q = as_cmatrix(self.Q, square=True)
        if P.shape != Q.shape:
            raise ValueError("P and Q must have the same shape")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "Q", Q)

    @property
    def dim(self):
        return self.P.shape[0]

    @property
    def is_real(self):
        return bool(np.all(self.P.imag == 0) and np.all(self.Q.imag == 0))

    @property
    def needs_inverse_frequency(self):
        return bool(np.any(self.Q != 0))

    def evaluate(self, z):
        z = _z(z)
        self._check_domain(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where(z == 0, 0.0, 1.0 / np.where(z == 0, 1.0, z))
        return self.P + w[..., None, None] * self.Q

    def freq_times(self, z):
        z = _z(z)
        return z[..., None, None] * self.P + _bcast(self.Q, z)

    def sup_bound(self, rho):
        q = op_norm(self.Q)
        if q == 0:
            return op_norm(self.P)
        if rho >= 0:
            return math.inf
        return op_norm(self.P) + q / (-rho)


@dataclass(frozen=True, eq=False)
class ConvResolvent(Law):
    """``(1 - K(z))^{-1}`` with ``K`` the Laplace transform of a kernel.

    This is the law of ``(1 - k*)^{-1}``.  Scalar kernels act as multiples
    of the identity of size `dim`; diagonal kernels fix `dim` themselves.
    """

    kernel: object
    dim: int = 0

    def __post_init__(self):
        kern = self.kernel
        if isinstance(kern, DiagExpSumKernel):
            if self.dim not in (0, kern.dim):
                raise ValueError("dim does not match the diagonal kernel")
            object.__setattr__(self, "dim", kern.dim)
        elif self.dim <= 0:
            raise ValueError("dim must be given for scalar kernels")
        if not (0 < kern.alpha < kern.min_rate):
            raise ValueError(
                f"kernel alpha={kern.alpha} must lie in (0, min rate {kern.min_rate})"
            )
        norm = weighted_l1_norm(kern, kern.alpha)
        if norm >= 1.0:
            raise ValueError(f"|k|_(1,-alpha) = {norm:.6g} must be < 1")

    @property
    def alpha_dom(self):
        return self.kernel.alpha

    def evaluate(self, z):
        z = _z(z)
        self._check_domain(z)
        K = np.asarray(self.kernel.laplace(z))
        if isinstance(self.kernel, DiagExpSumKernel):
            den = 1.0 - K
            if np.any(den == 0):
                raise DomainError("1 - K(z) is not invertible")
            out = np.zeros(z.shape + (self.dim, self.dim), dtype=complex)
            idx = np.arange(self.dim)
            out[..., idx, idx] = 1.0 / den
            return out
        den = 1.0 - K
        if np.any(den == 0):
            raise DomainError("1 - K(z) is not invertible")
        return (1.0 / den)[..., None, None] * np.eye(self.dim)

    def sup_bound(self, rho):
        if rho >= self.alpha_dom:
            raise DomainError(f"need rho < alpha = {self.alpha_dom:g}")
        norm = weighted_l1_norm(self.kernel, rho)
        if norm >= 1.0:
            return math.inf
        return 1.0 / (1.0 - norm)


@dataclass(frozen=True, eq=False)
class DelayFactor(Law):
    """``inner(z) * exp(-h z)``, the law of a backward shift by `h`."""

    h: float
    inner: Law

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("delay h must be positive")

    @property
    def dim(self):
        return self.inner.dim

    @property
    def alpha_dom(self):
        return self.inner.alpha_dom

    @property
    def is_real(self):
        return self.inner.is_real

    @property
    def needs_inverse_frequency(self):
        return self.inner.needs_inverse_frequency

    def evaluate(self, z):
        z = _z(z)
        return self.inner.evaluate(z) * np.exp(-self.h * z)[..., None, None]

    def freq_times(self, z):
        z = _z(z)
        return self.inner.freq_times(z) * np.exp(-self.h * z)[..., None, None]

    def sup_bound(self, rho):
        return math.exp(self.h * rho) * self.inner.sup_bound(rho)


@dataclass(frozen=True, eq=False)
class Scale(Law):
    factor: float
    inner: Law

    @property
    def dim(self):
        return self.inner.dim

    @property
    def alpha_dom(self):
        return self.inner.alpha_dom

    @property
    def is_real(self):
        return self.inner.is_real and np.imag(self.factor) == 0

    @property
    def needs_inverse_frequency(self):
        return self.inner.needs_inverse_frequency

    def evaluate(self, z):
        return self.factor * self.inner.evaluate(z)

    def freq_times(self, z):
        return self.factor * self.inner.freq_times(z)

    def sup_bound(self, rho):
        if self.factor == 0:
            return 0.0
        return abs(self.factor) * self.inner.sup_bound(rho)


class _Composite(Law):
    def _init_parts(self, parts):
        parts = tuple(parts)
        if not parts:
            raise ValueError("need at least one term")
        dims = {p.dim for p in parts}
        if len(dims) != 1:
            raise ValueError(f"dimension mismatch: {sorted(dims)}")
        object.__setattr__(self, "parts", parts)

    @property
    def dim(self):
        return self.parts[0].dim

    @property
    def alpha_dom(self):
        return min(p.alpha_dom for p in self.parts)

    @property
    def is_real(self):
        return all(p.is_real for p in self.parts)

    @property
    def needs_inverse_frequency(self):
        return any(p.needs_inverse_frequency for p in self.parts)


@dataclass(frozen=True, eq=False)
class Sum(_Composite):
    parts: tuple

    def __post_init__(self):
        self._init_parts(self.parts)

    def evaluate(self, z):
        z = _z(z)
        out = self.parts[0].evaluate(z)
        for p in self.parts[1:]:
            out = out + p.evaluate(z)
        return out

    def freq_times(self, z):
        z = _z(z)
        out = self.parts[0].freq_times(z)
        for p in self.parts[1:]:
            out = out + p.freq_times(z)
        return out

    def sup_bound(self, rho):
        return float(sum(p.sup_bound(rho) for p in self.parts))


@dataclass(frozen=True, eq=False)
class Product(_Composite):
    """Matrix product ``parts[0](z) @ parts[1](z) @ ...``."""

    parts: tuple

    def __post_init__(self):
        self._init_parts(self.parts)

    def evaluate(self, z):
        z = _z(z)
        out = self.parts[0].evaluate(z)
        for p in self.parts[1:]:
            out = out @ p.evaluate(z)
        return out

    def freq_times(self, z):
        z = _z(z)
        out = self.parts[0].freq_times(z)
        for p in self.parts[1:]:
            out = out @ p.evaluate(z)
        return out

    def sup_bound(self, rho):
        bounds = [p.sup_bound(rho) for p in self.parts]
        if any(b == 0 for b in bounds):
            return 0.0
        return float(np.prod(bounds))


@dataclass(frozen=True, eq=False)
class TimesW(Law):
    """``w * inner(w)``; at frequency `z` this is ``inner(1/z) / z``."""

    inner: Law

    @property
    def dim(self):
        return self.inner.dim

    @property
    def alpha_dom(self):
        return self.inner.alpha_dom

    @property
    def is_real(self):
        return self.inner.is_real

    @property
    def needs_inverse_frequency(self):
        return True

    def evaluate(self, z):
        z = _z(z)
        self._check_domain(z)
        return self.inner.evaluate(z) / z[..., None, None]

    def freq_times(self, z):
        return self.inner.evaluate(_z(z))

    def sup_bound(self, rho):
        if rho >= 0:
            return math.inf
        return self.inner.sup_bound(rho) / (-rho)


@dataclass(frozen=True, eq=False)
class Block(Law):
    """Block law ``[[L_00, L_01, ...], ...]``; ``None`` marks a zero block.

    Block sizes are read off the diagonal entries, which must be present.
    """

    blocks: tuple

    def __post_init__(self):
        rows = tuple(tuple(row) for row in self.blocks)
        m = len(rows)
        if m == 0 or any(len(r) != m for r in rows):
            raise ValueError("blocks must form a square grid")
        sizes = []
        for i in range(m):
            if rows[i][i] is None:
                raise ValueError("diagonal blocks must be given")
            sizes.append(rows[i][i].dim)
        for i in range(m):
            for j in range(m):
                b = rows[i][j]
                if b is not None and b.dim != sizes[i]:
                    raise ValueError("only square blocks of matching size are supported")
                if b is not None and sizes[i] != sizes[j]:
                    raise ValueError("off-diagonal blocks need equal row/column sizes")
        object.__setattr__(self, "blocks", rows)
        object.__setattr__(self, "_sizes", tuple(sizes))

    @property
    def dim(self):
        return sum(self._sizes)

    def _entries(self):
        return [b for row in self.blocks for b in row if b is not None]

    @property
    def alpha_dom(self):
        return min(b.alpha_dom for b in self._entries())

    @property
    def is_real(self):
        return all(b.is_real for b in self._entries())

    @property
    def needs_inverse_frequency(self):
        return any(b.needs_inverse_frequency for b in self._entries())

    def _assemble(self, z, method):
        z = _z(z)
        out = np.zeros(z.shape + (self.dim, self.dim), dtype=complex)
        offs = np.concatenate([[0], np.cumsum(self._sizes)])
        for i, row in enumerate(self.blocks):
            for j, b in enumerate(row):
                if b is not None:
                    out[..., offs[i]:offs[i + 1], offs[j]:offs[j + 1]] = getattr(b, method)(z)
        return out

    def evaluate(self, z):
        return self._assemble(z, "evaluate")

    def freq_times(self, z):
        return self._assemble(z, "freq_times")

    def sup_bound(self, rho):
        m = len(self.blocks)
        bounds = np.zeros((m, m))
        for i, row in enumerate(self.blocks):
            for j, b in enumerate(row):
                if b is not None:
                    bounds[i, j] = b.sup_bound(rho)
        if np.any(np.isinf(bounds)):
            return math.inf
        # ||[[B_ij]]|| <= ||[[ ||B_ij|| ]]||
        return op_norm(bounds)


def zeros_law(n):
    return Const(np.zeros((n, n)))


def identity_law(n):
    return Const(np.eye(n))


# --------------------------------------------------------------------------


def eval_law(law, z):
    """``M(1/z)`` for a law `law` at frequency `z` (vectorised)."""
    z = _z(z)
    law._check_domain(z)
    out = law.evaluate(z)
    if not np.all(np.isfinite(out)):
        raise DomainError("law evaluation produced non-finite values")
    return out


@dataclass(frozen=True)
class SecondOrderLaw:
    """``M(w) = M0(w) + w M1(w)`` on the complement of ``B[-r, r]``.

    In the frequency variable the admissible half-plane is
    ``Re z > -1/(2r)`` intersected with the analyticity domains of `M0`
    and `M1`.
    """

    M0: Law
    M1: Law
    r: float

    def __post_init__(self):
        if self.M0.dim != self.M1.dim:
            raise ValueError("M0 and M1 must have the same dimension")
        if not self.r > 0:
            raise ValueError("r must be positive")

    @property
    def dim(self):
        return self.M0.dim

    @property
    def alpha_dom(self):
        return min(self.M0.alpha_dom, self.M1.alpha_dom)

    @property
    def rate_limit(self):
        """Upper limit for stability rates: ``min(1/(2r), alpha_dom)``."""
        return min(0.5 / self.r, self.alpha_dom)

    @property
    def is_real(self):
        return self.M0.is_real and self.M1.is_real

    @property
    def is_affine(self):
        return isinstance(self.M0, Const) and isinstance(self.M1, Const)

    def symbol(self, z):
        return eval_symbol(self, z)

    def full_law(self):
        """The law ``M`` itself, as ``M0 + w M1``."""
        return Sum((self.M0, TimesW(self.M1)))


def eval_symbol(law, z, flag=False):
    """Frequency symbol ``z M(1/z) = z M0(1/z) + M1(1/z)``.

    At ``z = 0`` the analytic limit is returned (``M1(inf)`` for bounded
    `M0`); with ``flag=True`` a boolean telling whether any entry was such
    a limit is returned as well.
    """
    z = _z(z)
    if np.any(z.real <= -law.alpha_dom):
        raise DomainError(f"Re z must exceed {-law.alpha_dom:g}")
    out = law.M0.freq_times(z) + law.M1.evaluate(z)
    if not np.all(np.isfinite(out)):
        raise DomainError("symbol evaluation produced non-finite values")
    if flag:
        return out, bool(np.any(z == 0))
    return out


def law_sup_bound(law, rho):
    """Certified bound of ``||M(1/z)||`` on the half-plane ``Re z >= -rho``.

    Closed forms per node: constants give their norm, a convolution
    resolvent gives ``(1 - |k|_{1,-rho})^{-1}``, a delay multiplies by
    ``exp(h rho)``; sums, products, scalings and blocks compose.

    Raises
    ------
    DomainError
        If ``rho >= alpha_dom``.
    """
    if rho >= law.alpha_dom:
        raise DomainError(f"need rho < alpha_dom = {law.alpha_dom:g}")
    return float(law.sup_bound(rho))


@dataclass(frozen=True)
class BallSup:
    """Grid value and analytic bound of ``sup_{|z|<=delta} ||z M(1/z)||``."""

    delta: float
    grid: float
    bound: float
    argmax: complex

    @property
    def K(self):
        return self.bound


def _ball_points(delta, density):
    m = max(int(math.ceil(density * 2 * delta)), 32)
    x = np.linspace(-delta, delta, m + 1)
    X, Y = np.meshgrid(x, x)
    Z = (X + 1j * Y).ravel()
    Z = Z[(np.abs(Z) <= delta) & (Z != 0)]
    # the norm of an analytic function peaks on the boundary circle
    circle = delta * np.exp(2j * np.pi * np.arange(8 * m) / (8 * m))
    return np.concatenate([Z, circle])


def sup_symbol_on_ball(law, delta, density=64):
    """Estimate and bound the constant ``K = sup_{0<|z|<=delta} ||z M(1/z)||``.

    The grid (`density` points per unit length, plus the boundary circle,
    refined four-fold around the maximiser) is diagnostic.  The certified
    value is ``bound = delta * sup||M0|| + sup||M1||`` with both suprema
    taken from :func:`law_sup_bound` on ``Re z >= -delta``.
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if delta >= law.alpha_dom:
        raise DomainError(f"delta={delta:g} must be below alpha_dom={law.alpha_dom:g}")
    if delta == 0:
        return BallSup(0.0, 0.0, 0.0, 0j)
    pts = _ball_points(delta, density)
    vals = op_norm(eval_symbol(law, pts))
    i = int(np.argmax(vals))
    z0 = pts[i]
    h = 2 * delta / max(int(math.ceil(density * 2 * delta)), 32)
    loc = np.linspace(-h, h, 9)
    X, Y = np.meshgrid(loc, loc)
    fine = (z0 + X + 1j * Y).ravel()
    fine = fine[(np.abs(fine) <= delta) & (fine != 0)]
    if fine.size:
        fv = op_norm(eval_symbol(law, fine))
        j = int(np.argmax(fv))
        if fv[j] > vals[i]:
            z0, vals_max = fine[j], float(fv[j])
        else:
            vals_max = float(vals[i])
    else:
        vals_max = float(vals[i])
    bound = delta * law_sup_bound(law.M0, delta) + law_sup_bound(law.M1, delta)
    return BallSup(delta=float(delta), grid=vals_max, bound=float(bound), argmax=complex(z0))


def default_delta(law, a_inv_norm, rho=0.0):
    """``min(alpha_dom/2, 0.9 / (||A^{-1}|| * sup||M0||))``."""
    m0 = law_sup_bound(law.M0, rho)
    cap = 0.9 / (a_inv_norm * m0) if m0 > 0 else math.inf
    return float(min(law.alpha_dom / 2.0, cap))
