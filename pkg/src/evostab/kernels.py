"""Memory kernels, their transforms and the hypotheses they must satisfy.

Transforms come in two normalisations:

* ``laplace_transform(k, z) = int_0^inf exp(-z t) k(t) dt`` which is the
  quantity the material law consumes, and
* ``fourier_hat(k, s) = (2 pi)^(-1/2) int_0^inf exp(-i s t) k(t) dt`` for
  complex ``s``, used in the positivity hypotheses.  The two are related
  by ``fourier_hat(k, s) = laplace_transform(k, i s) / sqrt(2 pi)``.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

__all__ = [
    "SQRT_2PI",
    "NotCertifiedError",
    "ExpSumKernel",
    "DiagExpSumKernel",
    "SampledKernel",
    "HypothesisReport",
    "laplace_transform",
    "fourier_hat",
    "weighted_l1_norm",
    "check_hypotheses",
    "g_lower_bound",
    "check_alabau",
    "phi_function",
    "kernel_est_constant",
    "cannarsa_g",
    "quadrature_transform_check",
    "read_sampled_kernel_csv",
]

SQRT_2PI = math.sqrt(2.0 * math.pi)


class NotCertifiedError(ValueError):
    """A kernel property could not be certified by the available method."""


@dataclass(frozen=True)
class ExpSumKernel:
    """Scalar kernel ``k(t) = sum_j coeffs[j] * exp(-rates[j] * t)``.

    `alpha` is the declared exponential weight for which the weighted
    norm ``int exp(alpha t) |k(t)| dt`` is supposed to stay below one.
    It is validated where it matters (laws, hypothesis checks), not here,
    so that failing kernels can still be reported on.
    """

    coeffs: tuple = ()
    rates: tuple = ()
    alpha: float = 0.0

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        rates = tuple(float(b) for b in self.rates)
        if len(coeffs) != len(rates):
            raise ValueError("coeffs and rates must have equal length")
        if any(b <= 0 or not math.isfinite(b) for b in rates):
            raise ValueError("decay rates must be positive and finite")
        if not all(math.isfinite(c) for c in coeffs):
            raise ValueError("coefficients must be finite")
        if self.alpha < 0:
            raise ValueError("alpha must be non-negative")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "alpha", float(self.alpha))

    @classmethod
    def from_terms(cls, terms, alpha):
        terms = list(terms)
        return cls(tuple(k for k, _ in terms), tuple(b for _, b in terms), alpha)

    @property
    def terms(self):
        return list(zip(self.coeffs, self.rates))

    @property
    def min_rate(self):
        return min(self.rates, default=math.inf)

    @property
    def nonnegative(self):
        return all(c >= 0 for c in self.coeffs)

    @property
    def is_zero(self):
        return all(c == 0 for c in self.coeffs)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for k, b in self.terms:
            out = out + k * np.exp(-b * t)
        return out

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for k, b in self.terms:
            out = out - b * k * np.exp(-b * t)
        return out

    def scaled(self, factor):
        return ExpSumKernel(tuple(factor * c for c in self.coeffs), self.rates, self.alpha)

    def laplace(self, z):
        z = np.asarray(z, dtype=complex)
        if np.any(z.real <= -self.min_rate):
            raise ValueError(f"Laplace transform needs Re z > {-self.min_rate}")
        out = np.zeros_like(z)
        for k, b in self.terms:
            out = out + k / (b + z)
        return out if out.ndim else complex(out)

    def weighted_norm(self, alpha):
        if alpha >= self.min_rate:
            raise ValueError(
                f"weighted norm diverges: alpha={alpha} >= min rate {self.min_rate}"
            )
        # exact for non-negative coefficients, a term-wise upper bound otherwise
        return float(sum(abs(k) / (b - alpha) for k, b in self.terms))


@dataclass(frozen=True)
class DiagExpSumKernel:
    """Diagonal operator-valued kernel, one :class:`ExpSumKernel` per channel.

    Diagonal values are selfadjoint and commute, so hypotheses (d) and (e)
    hold by construction.
    """

    channels: tuple
    alpha: float = 0.0

    def __post_init__(self):
        chans = tuple(
            ch if isinstance(ch, ExpSumKernel) else ExpSumKernel.from_terms(ch, self.alpha)
            for ch in self.channels
        )
        if not chans:
            raise ValueError("need at least one channel")
        object.__setattr__(self, "channels", chans)
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def dim(self):
        return len(self.channels)

    @property
    def min_rate(self):
        return min(ch.min_rate for ch in self.channels)

    @property
    def nonnegative(self):
        return all(ch.nonnegative for ch in self.channels)

    @property
    def is_zero(self):
        return all(ch.is_zero for ch in self.channels)

    def __call__(self, t):
        """Channel values, shape ``t.shape + (dim,)``."""
        return np.stack([ch(t) for ch in self.channels], axis=-1)

    def derivative(self, t):
        return np.stack([ch.derivative(t) for ch in self.channels], axis=-1)

    def laplace(self, z):
        """Diagonal entries of the transform, shape ``z.shape + (dim,)``."""
        return np.stack([np.asarray(ch.laplace(z)) for ch in self.channels], axis=-1)

    def weighted_norm(self, alpha):
        """``int exp(alpha t) max_c |k_c(t)| dt`` by adaptive quadrature."""
        if alpha >= self.min_rate:
            raise ValueError(
                f"weighted norm diverges: alpha={alpha} >= min rate {self.min_rate}"
            )
        if self.dim == 1:
            return self.channels[0].weighted_norm(alpha)

        def integrand(t):
            return math.exp(alpha * t) * max(abs(float(ch(t))) for ch in self.channels)

        # past t_cut every term is below 1e-14 of its initial size
        t_cut = 32.0 / (self.min_rate - alpha)
        val, _ = integrate.quad(integrand, 0.0, t_cut, limit=400, epsabs=1e-13, epsrel=1e-12)
        tail = sum(
            sum(abs(k) * math.exp(-(b - alpha) * t_cut) / (b - alpha) for k, b in ch.terms)
            for ch in self.channels
        )
        # the tail term over-estimates, keeping the result an upper bound
        return float(val + tail)


@dataclass(frozen=True)
class SampledKernel:
    """Kernel given as a table ``(t_i, k(t_i))`` with an exponential tail.

    Beyond the last node the kernel is continued as
    ``k(t_N) exp(-tail_rate (t - t_N))``.  Only used to cross-check the
    closed-form transforms.
    """

    t: np.ndarray
    values: np.ndarray
    tail_rate: float
    alpha: float = 0.0

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise ValueError("t and values must be 1-d arrays of equal length")
        if t.size == 0:
            raise ValueError("empty kernel table")
        if t.size < 2:
            raise ValueError("insufficient sampling: need at least two nodes")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise ValueError("t must start at 0 and increase strictly")
        if self.tail_rate <= 0:
            raise ValueError("tail_rate must be positive")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)

    @property
    def min_rate(self):
        return float(self.tail_rate)

    @property
    def nonnegative(self):
        return bool(np.all(self.values >= 0))

    @property
    def is_zero(self):
        return bool(np.all(self.values == 0))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        inside = np.interp(t, self.t, self.values)
        tail = self.values[-1] * np.exp(-self.tail_rate * (t - self.t[-1]))
        return np.where(t <= self.t[-1], inside, tail)

    def laplace(self, z):
        return quadrature_transform_check(self, z)

    def weighted_norm(self, alpha):
        if alpha >= self.tail_rate:
            raise ValueError("weighted norm diverges beyond the tail rate")
        w = np.abs(self.values) * np.exp(alpha * self.t)
        tail = abs(self.values[-1]) * math.exp(alpha * self.t[-1]) / (self.tail_rate - alpha)
        return float(integrate.trapezoid(w, self.t) + tail)


# --------------------------------------------------------------------------
# transforms and norms


def laplace_transform(kernel, z):
    """``int_0^inf exp(-z t) k(t) dt``.

    Exact for exponential sums (``sum_j k_j / (beta_j + z)``); diagonal
    kernels return the diagonal entries; sampled kernels use tail-corrected
    trapezoidal quadrature.
    """
    return kernel.laplace(z)


def fourier_hat(kernel, s):
    """``(2 pi)^(-1/2) int_0^inf exp(-i s t) k(t) dt`` for complex `s`."""
    return np.asarray(kernel.laplace(1j * np.asarray(s, dtype=complex))) / SQRT_2PI


def weighted_l1_norm(kernel, alpha):
    """Weighted norm ``|k|_{1,-alpha} = int_0^inf exp(alpha t) ||k(t)|| dt``.

    Exact for exponential sums with non-negative coefficients; for mixed
    signs the value is the term-wise upper bound ``sum |k_j|/(beta_j - alpha)``.
    `alpha` may be negative, which gives the norm relevant on half-planes
    to the right of the imaginary axis.

    Raises
    ------
    ValueError
        If ``alpha >= min beta_j`` (the integral diverges).
    """
    return kernel.weighted_norm(alpha)


# --------------------------------------------------------------------------
# hypotheses


@dataclass
class HypothesisReport:
    """Outcome of :func:`check_hypotheses` for hypotheses (a)-(e)."""

    alpha: float
    weighted_norm: float
    norm_exact: bool
    passed: dict = field(default_factory=dict)
    notes: dict = field(default_factory=dict)

    @property
    def all_passed(self):
        return all(self.passed.values())

    def failures(self):
        return [key for key, ok in self.passed.items() if not ok]

    def as_dict(self):
        return {
            "alpha": self.alpha,
            "weighted_norm": self.weighted_norm,
            "norm_exact": self.norm_exact,
            "passed": dict(self.passed),
            "notes": dict(self.notes),
            "all_passed": self.all_passed,
        }


def check_hypotheses(kernel, alpha=None):
    """Check hypotheses (a)-(e) for `kernel` at weight `alpha`.

    (a), (b) hold for every supported family (continuous kernels);
    (c) is ``|k|_{1,-alpha} < 1``; (d), (e) hold for scalar and diagonal
    kernels, whose commutators vanish identically.  Failures are recorded
    in the report instead of raised.
    """
    alpha = kernel.alpha if alpha is None else float(alpha)
    report = HypothesisReport(alpha=alpha, weighted_norm=math.inf, norm_exact=False)
    report.passed["a"] = True
    report.passed["b"] = True
    report.notes["a"] = report.notes["b"] = "continuous kernel family"
    if alpha <= 0:
        report.passed["c"] = False
        report.notes["c"] = "alpha must be positive"
    else:
        try:
            norm = weighted_l1_norm(kernel, alpha)
        except ValueError as exc:
            report.passed["c"] = False
            report.notes["c"] = str(exc)
        else:
            report.weighted_norm = norm
            report.norm_exact = kernel.nonnegative or isinstance(kernel, SampledKernel)
            report.passed["c"] = norm < 1.0
            report.notes["c"] = f"|k|_(1,-alpha) = {norm:.12g}" + (
                "" if report.norm_exact else " (conservative upper bound)"
            )
    report.passed["d"] = True
    report.passed["e"] = True
    report.notes["d"] = "real scalar or diagonal values are selfadjoint"
    report.notes["e"] = "commutator k(t)k(s) - k(s)k(t) = 0 exactly (diagonal)"
    return report


def _exp_sum_channels(kernel):
    if isinstance(kernel, ExpSumKernel):
        return [kernel]
    if isinstance(kernel, DiagExpSumKernel):
        return list(kernel.channels)
    raise TypeError(f"{type(kernel).__name__} is not an exponential-sum kernel")


def g_lower_bound(kernel, delta, rho):
    """Certified ``g(rho)`` with ``t Im khat(t - i rho) <= -g(rho)`` for ``|t| > delta``.

    Per term, ``t Im khat(t - i rho) = -k_j t^2 / (sqrt(2 pi) ((beta_j+rho)^2 + t^2))``,
    monotone in ``t^2``.  Positive terms are bounded at ``|t| = delta``,
    negative terms by their ``t -> inf`` limit ``-k_j/sqrt(2 pi)``.  For a
    diagonal kernel the smallest channel value is returned.

    Raises
    ------
    NotCertifiedError
        If the term-wise bound is not positive.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    if rho <= -kernel.min_rate:
        raise ValueError("rho must exceed -min(beta_j)")
    values = []
    for ch in _exp_sum_channels(kernel):
        g = 0.0
        for k, b in ch.terms:
            if k >= 0:
                g += k * delta**2 / ((b + rho) ** 2 + delta**2)
            else:
                g += k
        values.append(g / SQRT_2PI)
    g = min(values)
    if g <= 0:
        raise NotCertifiedError(
            f"not certified by this method: term-wise bound gives g = {g:.6g} <= 0"
        )
    return g


def check_alabau(kernel, alpha0):
    """True iff ``k'(t) <= -alpha0 k(t)`` for all ``t >= 0``.

    For ``k = sum k_j exp(-beta_j t)`` with ``k_j >= 0`` this holds exactly
    when every active rate satisfies ``beta_j >= alpha0``: sufficiency is
    term-wise, necessity follows from the slowest mode dominating as
    ``t -> inf``.
    """
    if not isinstance(kernel, ExpSumKernel):
        raise TypeError("check_alabau needs a scalar ExpSumKernel")
    if not kernel.nonnegative:
        raise ValueError("check_alabau needs non-negative coefficients")
    if sum(kernel.coeffs) <= 0:
        raise ValueError("check_alabau needs k(0) > 0")
    active = [b for k, b in kernel.terms if k > 0]
    return min(active) >= alpha0


def _require_alabau(kernel, alpha):
    if not isinstance(kernel, ExpSumKernel) or not kernel.nonnegative:
        raise ValueError("needs a scalar ExpSumKernel with non-negative coefficients")
    if kernel.is_zero:
        return
    active = min(b for k, b in kernel.terms if k > 0)
    # k' <= -alpha0 k holds with alpha0 = min active rate; need alpha < alpha0
    if not (0 < alpha < active) or not check_alabau(kernel, active):
        raise ValueError(f"Alabau condition not verified for alpha={alpha}")


def phi_function(kernel, alpha, t):
    """``Phi(t) = -(1+t^2)/t * Im khat(t + i alpha)`` for ``t > 0``.

    Closed form: ``sum_j k_j (1+t^2) / (sqrt(2 pi) ((beta_j-alpha)^2 + t^2))``.
    At ``t = 0`` the limit ``(2 pi)^(-1/2) int s exp(alpha s) k(s) ds`` is
    returned.
    """
    _require_alabau(kernel, alpha)
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for k, b in kernel.terms:
        a2 = (b - alpha) ** 2
        out = out + k * (1.0 + t**2) / (a2 + t**2)
    out = out / SQRT_2PI
    return float(out) if out.ndim == 0 else out


def kernel_est_constant(kernel, alpha):
    """Largest ``c`` with ``Im khat(t + i alpha) <= -c t/(1+t^2)`` for all ``t > 0``.

    Each term ``(1+t^2)/(a^2+t^2)`` is monotone with infimum ``min(1, 1/a^2)``;
    summing these gives a certified lower bound of ``inf Phi``, exact when
    all terms are monotone in the same direction.

    Raises
    ------
    NotCertifiedError
        If the constant is not positive (e.g. the zero kernel).
    """
    _require_alabau(kernel, alpha)
    c = sum(k * min(1.0, 1.0 / (b - alpha) ** 2) for k, b in kernel.terms) / SQRT_2PI
    if c <= 0:
        raise NotCertifiedError("kernel estimate constant is not positive")
    return float(c)


def cannarsa_g(c, alpha, delta, rho):
    """``c / (sqrt(2 pi) (alpha+rho+1)^2) * delta^2/(1+delta^2)``."""
    if c <= 0:
        raise ValueError("c must be positive")
    if rho <= -alpha:
        raise ValueError("rho must exceed -alpha")
    return c / (SQRT_2PI * (alpha + rho + 1.0) ** 2) * delta**2 / (1.0 + delta**2)


# --------------------------------------------------------------------------
# sampled kernels


def quadrature_transform_check(kernel, z):
    """Tail-corrected trapezoidal Laplace transform of a sampled kernel.

    Independent of the closed forms; used as their oracle.
    """
    if not isinstance(kernel, SampledKernel):
        raise TypeError("quadrature_transform_check needs a SampledKernel")
    z = np.asarray(z, dtype=complex)
    if np.any(z.real <= -kernel.tail_rate):
        raise ValueError("Re z must exceed -tail_rate")
    t, v = kernel.t, kernel.values
    zz = z.reshape(-1, 1)
    body = integrate.trapezoid(np.exp(-zz * t) * v, t, axis=-1)
    tail = v[-1] * np.exp(-zz[:, 0] * t[-1]) / (kernel.tail_rate + zz[:, 0])
    out = (body + tail).reshape(z.shape)
    return out if out.ndim else complex(out)


def read_sampled_kernel_csv(path, tail_rate, alpha=0.0):
    """Read a two-column ``t,k`` CSV with a header row."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    data = [r for r in rows[1:] if r and any(cell.strip() for cell in r)]
    if any(len(r) < 2 for r in data):
        raise ValueError(f"{path}: expected two columns")
    t = [float(r[0]) for r in data]
    k = [float(r[1]) for r in data]
    return SampledKernel(np.array(t), np.array(k), tail_rate=tail_rate, alpha=alpha)
