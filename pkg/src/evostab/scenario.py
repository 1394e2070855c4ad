"""Wave-type scenarios shared by the certifier, the solvers and the CLI.

A scenario describes

    u'' + gamma u' + (1 - k*) C*C u + kappa u'(t - h) = f,   u = 0 for t <= 0,

on the space discretised by ``C``.  Applying ``R = (1 - k*)^{-1}`` gives
the second-order material-law form ``(M0 u)'' + (M1 u)' + C*C u = R f`` with

    M0 = R,    M1 = gamma R + kappa R exp(-h z).
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .kernels import DiagExpSumKernel, ExpSumKernel
from .laws import Const, ConvResolvent, DelayFactor, Scale, SecondOrderLaw, Sum
from .spatial import SpatialC

__all__ = ["BumpSource", "SampledSource", "WaveScenario"]


@dataclass(frozen=True)
class BumpSource:
    """``amplitude * sin^2`` pulse on ``[t0, t1]`` times a Gaussian in space.

    The spatial profile is evaluated at the interior nodes ``x_i = i/(n+1)``.
    """

    t0: float = 0.0
    t1: float = 1.0
    amplitude: float = 1.0
    center: float = 0.5
    width: float = 0.1

    def __post_init__(self):
        if not self.t1 > self.t0 >= 0:
            raise ValueError("bump needs 0 <= t0 < t1")
        if not self.width > 0:
            raise ValueError("bump width must be positive")

    @property
    def t_end(self):
        return self.t1

    def profile(self, n):
        x = np.arange(1, n + 1) / (n + 1)
        return np.exp(-0.5 * ((x - self.center) / self.width) ** 2)

    def envelope(self, t):
        t = np.asarray(t, dtype=float)
        s = (t - self.t0) / (self.t1 - self.t0)
        inside = (s >= 0) & (s <= 1)
        return np.where(inside, self.amplitude * np.sin(np.pi * s) ** 2, 0.0)

    def sample(self, t, n):
        """Source values, shape ``(len(t), n)``."""
        return self.envelope(t)[:, None] * self.profile(n)[None, :]


@dataclass(frozen=True, eq=False)
class SampledSource:
    """Source given on its own grid; linearly interpolated, zero outside."""

    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if t.ndim != 1 or v.shape[0] != t.size or t.size < 2:
            raise ValueError("source table needs at least two rows matching t")
        if t[0] < 0 or np.any(np.diff(t) <= 0):
            raise ValueError("source times must be non-negative and increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)

    @property
    def t_end(self):
        nz = np.nonzero(np.any(self.values != 0, axis=1))[0]
        return float(self.t[nz[-1]]) if nz.size else 0.0

    def sample(self, t, n):
        if self.values.shape[1] != n:
            raise ValueError(f"source has {self.values.shape[1]} components, expected {n}")
        t = np.asarray(t, dtype=float)
        out = np.empty((t.size, n))
        for j in range(n):
            out[:, j] = np.interp(t, self.t, self.values[:, j], left=0.0, right=0.0)
        return out


@dataclass(frozen=True, eq=False)
class WaveScenario:
    """Damped/viscoelastic/delayed wave equation on a discrete domain.

    Attributes
    ----------
    C : SpatialC
    gamma : float
        Viscous damping coefficient.
    kernel : ExpSumKernel, DiagExpSumKernel or None
        Memory kernel ``k``.
    kappa, h : float
        Delay feedback gain and delay length.
    r : float
        Exclusion radius of the material law; ignored when a kernel is
        present, where ``r = 1/(2 alpha)``.
    source : BumpSource or SampledSource
    """

    C: SpatialC
    gamma: float = 0.0
    kernel: object = None
    kappa: float = 0.0
    h: float = 1.0
    r: float = 5.0
    source: object = field(default_factory=BumpSource)

    def __post_init__(self):
        if self.kappa != 0 and not self.h > 0:
            raise ValueError("delay h must be positive")
        if isinstance(self.kernel, DiagExpSumKernel) and self.kernel.dim != self.C.n:
            raise ValueError("diagonal kernel size does not match the spatial dimension")
        if self.kernel is not None and not isinstance(
            self.kernel, (ExpSumKernel, DiagExpSumKernel)
        ):
            raise TypeError("time stepping needs an exponential-sum kernel")

    @property
    def n(self):
        return self.C.n

    @property
    def has_memory(self):
        return self.kernel is not None and not self.kernel.is_zero

    @property
    def has_delay(self):
        return self.kappa != 0

    @property
    def radius(self):
        if self.has_memory:
            return 0.5 / self.kernel.alpha
        return self.r

    def with_kappa(self, kappa):
        return replace(self, kappa=float(kappa))

    def resolvent_law(self):
        """``R = (1 - k*)^{-1}``, or the identity without memory."""
        if self.has_memory:
            return ConvResolvent(self.kernel, self.n)
        return Const(np.eye(self.n))

    def delay_part(self):
        """``kappa R exp(-h z)``, the perturbation ``M1`` of the delay split."""
        if not self.has_delay:
            return Const(np.zeros((self.n, self.n)))
        return Scale(self.kappa, DelayFactor(self.h, self.resolvent_law()))

    def second_order_law(self, include_delay=True):
        """``M0 = R`` and ``M1 = gamma R + kappa R exp(-h z)``."""
        R = self.resolvent_law()
        parts = []
        if self.gamma != 0:
            parts.append(Scale(self.gamma, R))
        if include_delay and self.has_delay:
            parts.append(self.delay_part())
        if not parts:
            M1 = Const(np.zeros((self.n, self.n)))
        elif len(parts) == 1:
            M1 = parts[0]
        else:
            M1 = Sum(tuple(parts))
        return SecondOrderLaw(R, M1, self.radius)

    def source_samples(self, t):
        return self.source.sample(t, self.n)

    @property
    def source_end(self):
        return float(self.source.t_end)

    def memory_terms(self):
        """Per-channel ``(coeffs, rates)`` arrays of shape ``(J, n)``, zero-padded."""
        if not self.has_memory:
            return np.zeros((0, self.n)), np.ones((0, self.n))
        if isinstance(self.kernel, ExpSumKernel):
            k = np.array(self.kernel.coeffs)[:, None] * np.ones(self.n)
            b = np.array(self.kernel.rates)[:, None] * np.ones(self.n)
            return k, b
        J = max(len(ch.coeffs) for ch in self.kernel.channels)
        k = np.zeros((J, self.n))
        b = np.ones((J, self.n))
        for c, ch in enumerate(self.kernel.channels):
            m = len(ch.coeffs)
            k[:m, c] = ch.coeffs
            b[:m, c] = ch.rates
        return k, b

    def describe(self):
        kind = "damped_wave"
        if self.has_memory:
            kind = "integro_delay" if self.has_delay else "integro"
        return {
            "family": kind,
            "n": self.n,
            "spatial": self.C.provenance,
            "gamma": self.gamma,
            "kappa": self.kappa,
            "h": self.h if self.has_delay else None,
            "r": self.radius,
            "c_inv_norm": self.C.c_inv_norm,
        }
