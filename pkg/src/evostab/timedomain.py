"""Time-domain validation: two independent solvers, weighted norms and
decay-rate fitting.

:func:`simulate` advances the wave equation with the implicit trapezoidal
rule, carrying one auxiliary state per exponential memory term and reading
the delayed velocity from the stored history.  :func:`solve_frequency`
solves the same problem through the first-order system by damping, Fourier
transforming, solving ``(z M_d(1/z) + A) X = (R(z) f, 0)`` per frequency
and transforming back.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg as sla

from .laws import eval_law
from .linalg import solve
from .reformulation import build_Md, recover_u

__all__ = [
    "Trajectory",
    "SimulationResult",
    "DecayFit",
    "PointwiseCheck",
    "SimulationError",
    "time_grid",
    "weighted_norm",
    "causal_antiderivative",
    "simulate",
    "solve_frequency",
    "solve_evolutionary",
    "fit_decay_rate",
    "pointwise_bound_check",
    "relative_l2",
]


class SimulationError(RuntimeError):
    """The time stepper lost accuracy (factorisation residual too large)."""


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Samples ``values[i]`` at the uniform times ``t[i] = t[0] + i dt``."""

    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        v = np.asarray(self.values)
        if t.ndim != 1 or v.shape[0] != t.size:
            raise ValueError("values must have one row per time node")
        if t.size > 2:
            dt = np.diff(t)
            if np.max(np.abs(dt - dt[0])) > 1e-9 * max(1.0, abs(dt[0])):
                raise ValueError("time grid must be uniform")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "values", v)

    @property
    def dt(self):
        return float(self.t[1] - self.t[0])

    def norms(self):
        """Pointwise Euclidean norms."""
        v = self.values
        return np.abs(v) if v.ndim == 1 else np.linalg.norm(v, axis=1)

    def restrict(self, t_max):
        keep = self.t <= t_max + 1e-12
        return Trajectory(self.t[keep], self.values[keep])


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit ``log ||x||_window ~ a - nu t``."""

    nu: float
    residual: float
    intercept: float
    centers: np.ndarray = field(repr=False)
    norms: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class PointwiseCheck:
    """``sup_t e^{nu t}|u(t)|`` against ``|u'|_{H_{-nu}}`` with and without ``1/sqrt(2 nu)``."""

    nu: float
    lhs: float
    rhs_plain: float
    rhs_scaled: float

    @property
    def holds_scaled(self):
        return self.lhs <= self.rhs_scaled

    @property
    def holds_plain(self):
        return self.lhs <= self.rhs_plain


@dataclass(frozen=True, eq=False)
class SimulationResult:
    """Trajectories of a wave simulation plus the decay fit."""

    t: np.ndarray
    u: np.ndarray
    du: np.ndarray
    memory: np.ndarray
    energy: np.ndarray
    fit: DecayFit = None
    pointwise: PointwiseCheck = None

    @property
    def nu_hat(self):
        return None if self.fit is None else self.fit.nu

    def trajectory(self, name="u"):
        return Trajectory(self.t, getattr(self, name))


def time_grid(T, dt):
    """Nodes ``0, dt, ..., T``; `dt` must divide `T`."""
    m = T / dt
    steps = int(round(m))
    if steps < 1 or abs(m - steps) > 1e-9 * max(1.0, m):
        raise ValueError(f"dt={dt} does not divide T={T}")
    return np.arange(steps + 1) * dt


# --------------------------------------------------------------------------
# norms and antiderivatives


def weighted_norm(traj, rho):
    """``(sum_i |f(t_i)|^2 exp(-2 rho t_i) dt)^(1/2)``."""
    w = np.exp(-2.0 * rho * traj.t)
    return float(math.sqrt(np.sum(traj.norms() ** 2 * w) * traj.dt))


def causal_antiderivative(traj, causal=True):
    """Antiderivative that vanishes at ``-inf`` (causal) or ``+inf`` (anticausal).

    The trajectory must be zero outside its grid.  Uses the trapezoidal rule.
    """
    F = integrate.cumulative_trapezoid(traj.values, traj.t, axis=0, initial=0)
    if causal:
        return Trajectory(traj.t, F)
    return Trajectory(traj.t, F - F[-1])


# --------------------------------------------------------------------------
# time stepping


def _system_matrix(scenario):
    """Linear part ``J`` of the state equation for ``x = (u, w, m_1..m_J)``."""
    n = scenario.n
    L = np.real_if_close(scenario.C.laplacian)
    kc, kb = scenario.memory_terms()
    J_terms = kc.shape[0]
    N = (2 + J_terms) * n
    Jm = np.zeros((N, N), dtype=L.dtype)
    Jm[:n, n:2 * n] = np.eye(n)
    Jm[n:2 * n, :n] = -L
    Jm[n:2 * n, n:2 * n] = -scenario.gamma * np.eye(n)
    for j in range(J_terms):
        s = slice((2 + j) * n, (3 + j) * n)
        Jm[n:2 * n, s] = np.eye(n)
        Jm[s, s] = -np.diag(kb[j])
        Jm[s, :n] = np.diag(kc[j]) @ L
    return Jm


def simulate(scenario, T, dt, fit=True, window=2.0):
    """Integrate the scenario on ``[0, T]`` with the trapezoidal rule.

    Parameters
    ----------
    scenario : WaveScenario
    T, dt : float
        Horizon and step; `dt` must divide `T`, and the delay `h` when
        ``kappa != 0``.
    fit : bool
        Fit the decay rate of ``(u', C u)`` after the source has stopped.

    Returns
    -------
    SimulationResult
        ``memory`` holds ``sum_j m_j = (k * C*C u)``; ``energy`` is
        ``|u'|^2 + |C u|^2``.
    """
    t = time_grid(T, dt)
    n = scenario.n
    lag = 0
    if scenario.has_delay:
        ratio = scenario.h / dt
        lag = int(round(ratio))
        if lag < 1 or abs(ratio - lag) > 1e-9 * ratio:
            raise ValueError(f"dt={dt} must divide the delay h={scenario.h}")

    Jm = _system_matrix(scenario)
    N = Jm.shape[0]
    a = 0.5 * dt
    lhs = np.eye(N) - a * Jm
    lu = sla.lu_factor(lhs)
    P = sla.lu_solve(lu, np.eye(N) + a * Jm)
    Q = sla.lu_solve(lu, np.eye(N)[:, n:2 * n]) * a
    res = np.linalg.norm(lhs @ P - (np.eye(N) + a * Jm)) / max(1.0, np.linalg.norm(P))
    if not res < 1e-8:
        raise SimulationError(f"implicit solve degraded: residual {res:.2e}")

    f = scenario.source_samples(t)
    steps = t.size
    X = np.zeros((steps, N), dtype=P.dtype)
    x = np.zeros(N, dtype=P.dtype)
    kappa = scenario.kappa
    g_prev = f[0].astype(P.dtype)
    for k in range(steps - 1):
        g_next = f[k + 1].astype(P.dtype)
        if lag and k + 1 - lag >= 0:
            g_next = g_next - kappa * X[k + 1 - lag, n:2 * n]
        x = P @ x + Q @ (g_prev + g_next)
        X[k + 1] = x
        g_prev = g_next

    u = X[:, :n]
    du = X[:, n:2 * n]
    mem = X[:, 2 * n:].reshape(steps, -1, n).sum(axis=1) if N > 2 * n else np.zeros_like(u)
    Cu = u @ scenario.C.C.T
    energy = np.sum(np.abs(du) ** 2, axis=1) + np.sum(np.abs(Cu) ** 2, axis=1)
    result = SimulationResult(t, u, du, mem, energy)
    if fit:
        t_skip = scenario.source_end + (2 * scenario.h if scenario.has_delay else 0.0) + 5 * dt
        state = Trajectory(t, np.hstack([du, Cu]))
        dec = fit_decay_rate(state, window=window, t_start=t_skip)
        pw = None
        if dec.nu > 0:
            pw = pointwise_bound_check(Trajectory(t, u), Trajectory(t, du), 0.9 * dec.nu)
        result = SimulationResult(t, u, du, mem, energy, dec, pw)
    return result


# --------------------------------------------------------------------------
# frequency route


def solve_evolutionary(law, A, F, rho, dt, transform=None, chunk=2048, real=None):
    """Solve ``(d/dt M(d/dt^{-1}) + A) x = F`` by the damped Fourier transform.

    Parameters
    ----------
    law : SecondOrderLaw
        Material law written as ``M0 + w M1``; its symbol is ``z M(1/z)``.
    A : ndarray, shape (m, m)
    F : ndarray, shape (N, m)
        Right-hand side at ``t_k = k dt``; zero history before ``t = 0``.
    rho : float
        Damping weight, above the growth bound.
    transform : callable, optional
        ``(z, Fhat) -> rhs`` applied to the transformed samples.
    real : bool, optional
        Use real FFTs; defaults to whether `law`, `A` and `F` are real.

    Returns
    -------
    ndarray, shape (N, m)
        Solution at the nodes of the periodic window ``[0, N dt)``.
    """
    F = np.asarray(F)
    if F.ndim == 1:
        F = F[:, None]
    A = np.atleast_2d(np.asarray(A))
    Nt, m = F.shape
    if A.shape != (m, m) or law.dim != m:
        raise ValueError("law, A and F dimensions disagree")
    if real is None:
        real = law.is_real and np.isrealobj(A) and np.isrealobj(F)
    t = np.arange(Nt) * dt
    damp = np.exp(-rho * t)[:, None]
    if real:
        Fh = np.fft.rfft(F * damp, axis=0) * dt
        xi = np.fft.rfftfreq(Nt, dt)
    else:
        Fh = np.fft.fft(F * damp, axis=0) * dt
        xi = np.fft.fftfreq(Nt, dt)
    z = rho + 2j * np.pi * xi
    Xh = np.zeros((z.size, m), dtype=complex)
    for s in range(0, z.size, chunk):
        zz = z[s:s + chunk]
        rhs = Fh[s:s + chunk]
        if transform is not None:
            rhs = transform(zz, rhs)
        S = law.symbol(zz) + A
        Xh[s:s + chunk] = solve(S, rhs, check="residual")
    if real:
        X = np.fft.irfft(Xh, n=Nt, axis=0) / dt
    else:
        X = np.fft.ifft(Xh, axis=0) / dt
    return X / damp


def solve_frequency(scenario, rho, T, n_freq, d=0.0, t_max=None):
    """Second-order solution ``u`` via the first-order frequency solve.

    The source must vanish on the second half of ``[0, T)``.  Results are
    returned on ``[0, T/2]`` (or ``[0, t_max]``): undamping multiplies the
    round-off of the periodic solve by ``exp(rho t)``, and the wrap-around
    leakage is of size ``exp(-rho T/2)`` there.

    Returns
    -------
    u, du : Trajectory
    """
    if not rho > 0:
        raise ValueError("rho must be positive (causal branch)")
    dt = T / n_freq
    t = np.arange(n_freq) * dt
    f = scenario.source_samples(t)
    late = t >= 0.5 * T
    if np.any(np.abs(f[late]) > 0):
        raise ValueError("source must vanish on the second half of [0, T)")
    law = scenario.second_order_law()
    system = build_Md(law, scenario.C, d)
    R = scenario.resolvent_law()

    n = scenario.n

    def transform(zz, Fh):
        top = Fh[:, :n]
        if scenario.has_memory:
            top = np.einsum("kij,kj->ki", eval_law(R, zz), top)
        return np.concatenate([top, Fh[:, n:]], axis=1)

    F = np.concatenate([f, np.zeros_like(f)], axis=1)
    X = solve_evolutionary(system.law, system.A.A, F, rho, dt, transform=transform)
    u, du = recover_u(X[:, :n], X[:, n:], scenario.C, d)
    t_max = 0.5 * T if t_max is None else t_max
    keep = t <= t_max + 1e-12
    return Trajectory(t[keep], u[keep]), Trajectory(t[keep], du[keep])


# --------------------------------------------------------------------------
# decay


def fit_decay_rate(traj, window=2.0, t_start=0.0):
    """Fit an exponential decay rate to windowed L2 norms.

    Non-overlapping windows of length `window` starting at `t_start`; the
    rate is minus the least-squares slope of ``log`` of the window norms
    against the window centres.  Windows with zero norm are dropped.
    """
    t = traj.t
    dt = traj.dt
    per = max(int(round(window / dt)), 1)
    start = int(np.searchsorted(t, t_start - 1e-12))
    sq = traj.norms() ** 2
    count = (t.size - start) // per
    if count < 2:
        raise ValueError("need at least two windows after t_start")
    blocks = sq[start:start + count * per].reshape(count, per)
    norms = np.sqrt(blocks.sum(axis=1) * dt)
    centers = t[start] + (np.arange(count) + 0.5) * per * dt
    ok = norms > 0
    if ok.sum() < 2:
        return DecayFit(math.inf, 0.0, -math.inf, centers, norms)
    A = np.vstack([np.ones(ok.sum()), centers[ok]]).T
    coef, *_ = np.linalg.lstsq(A, np.log(norms[ok]), rcond=None)
    pred = A @ coef
    resid = float(np.sqrt(np.mean((np.log(norms[ok]) - pred) ** 2)))
    return DecayFit(float(-coef[1]), resid, float(coef[0]), centers, norms)


def pointwise_bound_check(u, du, nu):
    """Compare ``sup e^{nu t}|u(t)|`` with ``|u'|_{H_{-nu}}`` and ``|u'|_{H_{-nu}}/sqrt(2 nu)``."""
    if not nu > 0:
        raise ValueError("nu must be positive")
    lhs = float(np.max(u.norms() * np.exp(nu * u.t)))
    w = weighted_norm(du, -nu)
    return PointwiseCheck(float(nu), lhs, w, w / math.sqrt(2.0 * nu))


def relative_l2(a, b):
    """``||a - b|| / ||b||`` over all samples."""
    a = np.asarray(a)
    b = np.asarray(b)
    den = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / den) if den > 0 else float(np.linalg.norm(a))
