"""Stability certificates from frequency-domain positivity and boundedness.

The central check (:func:`check_bounded_positive`) verifies, for a law ``M`` and an
accretive invertible ``A``,

* ``K = sup_{0<|z|<=delta} ||z M(1/z)|| < 1/||A^{-1}||`` and
* ``Re z M(1/z) >= c > 0`` on ``Re z >= -rho`` outside ``B[0, delta]``,

which bounds ``(z M(1/z) + A)^{-1}`` by ``max(1/c, ||A^{-1}||/(1 - K||A^{-1}||))``
on the half-plane.  Second-order problems are first reformulated with
:func:`~evostab.reformulation.build_Md`; the parameter ``d`` is chosen by
:func:`find_d0`.  Delays enter as a perturbation ``N_d`` whose size is
bounded by :func:`perturbation_margin`, giving the gain threshold of
:func:`kappa_threshold`.

Positivity on the unbounded half-plane is certified by a truncated grid
together with an analytic bound on the remaining region.  All constants
carry a 0.9 safety factor.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from .kernels import NotCertifiedError, check_hypotheses, g_lower_bound, weighted_l1_norm
from .laws import (
    Block,
    Const,
    Law,
    Product,
    Scale,
    SecondOrderLaw,
    Sum,
    eval_symbol,
    law_sup_bound,
    sup_symbol_on_ball,
)
from .linalg import herm_min_eig, inv_norm, op_norm, smallest_sv
from .reformulation import K_of_d, build_Md, nd_norm_factor, split_Md
from .spatial import BlockA, validate_accretive_invertible

__all__ = [
    "SAFETY",
    "BISECT_ITERS",
    "CounterexampleError",
    "GridSpec",
    "GridEvidence",
    "BoundedPositiveResult",
    "StabilityCertificate",
    "constant_value",
    "affine_tail_bound",
    "check_bounded_positive",
    "global_positivity_constant",
    "positivity_constants_integro",
    "integro_right_tail",
    "G_of_d",
    "find_d0",
    "resolvent_sup_grid",
    "estimate_growth_bound",
    "perturbation_margin",
    "kappa_threshold",
    "certify_scenario",
    "with_delay_constants",
    "certify_kappa",
    "default_integro_delta",
]

SAFETY = 0.9
BISECT_ITERS = 40
# right edge of the truncated positivity grid
RE_MAX = 2.0


class CounterexampleError(NotCertifiedError):
    """The symbol plus ``A`` is singular at a grid point ``z``."""

    def __init__(self, z, message=None):
        self.z = complex(z)
        super().__init__(message or f"z M(1/z) + A is singular at z = {self.z:.6g}")


# --------------------------------------------------------------------------
# grids


@dataclass(frozen=True)
class GridSpec:
    """Truncated frequency grid ``Re z in [-rho, re_max]``, ``|Im z| <= t_max``.

    Imaginary parts are spaced geometrically from `im_min` to `t_max`
    (plus zero and mirrored), so that low frequencies, where the symbol
    varies fastest, are resolved without an excessive number of points.
    ``t_max = None`` means ``50 (1 + ||A||)``.
    """

    n_re: int = 9
    n_im: int = 241
    im_min: float = 1e-3
    t_max: float = None
    re_max: float = RE_MAX
    refine: int = 4
    chunk: int = 512

    def __post_init__(self):
        if self.n_re < 2 or self.n_im < 3:
            raise ValueError("grid needs at least 2 real and 3 imaginary points")

    def imag_axis(self, t_max):
        half = max((self.n_im - 1) // 2, 1)
        pos = np.geomspace(self.im_min, t_max, half)
        return np.concatenate([-pos[::-1], [0.0], pos])

    def points(self, re_lo, t_max, re_hi=None):
        re_hi = self.re_max if re_hi is None else re_hi
        re = np.linspace(re_lo, re_hi, self.n_re)
        X, Y = np.meshgrid(re, self.imag_axis(t_max), indexing="ij")
        Z = (X + 1j * Y).ravel()
        return Z[np.abs(Z) > 1e-14]

    def resolve_t_max(self, A):
        return self.t_max if self.t_max is not None else 50.0 * (1.0 + op_norm(A))


@dataclass(frozen=True, eq=False)
class GridEvidence:
    """Symbol samples: ``z``, ``min eig Re(z M(1/z))`` and ball membership."""

    z: np.ndarray
    herm_min: np.ndarray
    inside_ball: np.ndarray

    def summary(self):
        out = {"points": int(self.z.size), "ball_points": int(self.inside_ball.sum())}
        outside = ~self.inside_ball
        if outside.any():
            i = int(np.argmin(np.where(outside, self.herm_min, np.inf)))
            out["herm_min"] = float(self.herm_min[i])
            out["herm_argmin"] = [float(self.z[i].real), float(self.z[i].imag)]
        return out


def _chunked(fn, Z, chunk):
    return np.concatenate([np.atleast_1d(fn(Z[s:s + chunk])) for s in range(0, Z.size, chunk)])


def _as_block_A(A):
    if isinstance(A, BlockA):
        if A.C is None:
            validate_accretive_invertible(A.A)
        return A
    return validate_accretive_invertible(A)


# --------------------------------------------------------------------------
# closed forms


def constant_value(law):
    """Matrix value of a frequency-independent law, else ``None``."""
    if isinstance(law, Const):
        return law.P
    if isinstance(law, Scale):
        inner = constant_value(law.inner)
        return None if inner is None else law.factor * inner
    if isinstance(law, Sum):
        vals = [constant_value(p) for p in law.parts]
        return None if any(v is None for v in vals) else sum(vals)
    if isinstance(law, Product):
        vals = [constant_value(p) for p in law.parts]
        if any(v is None for v in vals):
            return None
        out = vals[0]
        for v in vals[1:]:
            out = out @ v
        return out
    if isinstance(law, Block):
        return law.evaluate(np.array(1.0))[()] if all(
            constant_value(b) is not None for row in law.blocks for b in row if b is not None
        ) else None
    return None


def affine_tail_bound(law, rho):
    """``min eig(Re M1 - rho M0)`` for constant ``M0 = M0* >= 0`` and constant ``M1``.

    This is the exact infimum of ``Re z M(1/z)`` over ``Re z >= -rho``.
    Returns ``None`` when the law is not of that form.
    """
    P = constant_value(law.M0)
    Q = constant_value(law.M1)
    if P is None or Q is None:
        return None
    if np.max(np.abs(P - P.conj().T)) > 1e-12 * max(1.0, op_norm(P)):
        return None
    if np.linalg.eigvalsh(P)[0] < -1e-12:
        return None
    return float(herm_min_eig(Q - rho * P))


# --------------------------------------------------------------------------
# the core check


@dataclass(frozen=True, eq=False)
class BoundedPositiveResult:
    """Outcome of :func:`check_bounded_positive`."""

    certified: bool
    reason: str
    delta: float
    rho: float
    K: float
    K_grid: float
    a_inv_norm: float
    c: float
    c_grid: float
    c_tail: float
    binding: str
    resolvent_bound: float
    evidence: GridEvidence = field(repr=False, default=None)

    def as_dict(self):
        return {
            "certified": self.certified,
            "reason": self.reason,
            "delta": self.delta,
            "rho": self.rho,
            "K": self.K,
            "K_grid": self.K_grid,
            "a_inv_norm": self.a_inv_norm,
            "c": self.c,
            "c_grid": self.c_grid,
            "c_tail": self.c_tail,
            "binding": self.binding,
            "resolvent_bound": self.resolvent_bound,
            "grid": self.evidence.summary() if self.evidence is not None else None,
        }


def check_bounded_positive(law, A, delta, rho, grid=None, tail=None):
    """Check boundedness near zero and positivity away from it.

    Parameters
    ----------
    law : SecondOrderLaw
    A : BlockA or ndarray
        Must be accretive and invertible (checked).
    delta : float
        Radius of the excluded ball, ``0 <= delta < alpha_dom``.
    rho : float
        Positivity is required on ``Re z >= -rho``.
    grid : GridSpec, optional
    tail : float, optional
        Lower bound of ``Re z M(1/z)`` on the part of the half-plane the
        grid does not cover.  Defaults to the exact affine value when the
        law is affine with ``M0 >= 0``; otherwise positivity cannot be
        certified.

    Returns
    -------
    BoundedPositiveResult
    """
    grid = grid or GridSpec()
    Ablk = _as_block_A(A)
    a_inv = Ablk.inv_norm
    if delta > 0:
        ball = sup_symbol_on_ball(law, delta)
        K, K_grid = ball.bound, ball.grid
    else:
        K = K_grid = 0.0
    t_max = grid.resolve_t_max(Ablk.A)
    Z = grid.points(-rho, t_max)
    if delta > 0:
        # densify the ball so the Neumann estimate is exercised
        r = np.linspace(-delta, delta, 9)
        X, Y = np.meshgrid(r, r)
        ball_pts = (X + 1j * Y).ravel()
        ball_pts = ball_pts[(np.abs(ball_pts) <= delta) & (np.abs(ball_pts) > 1e-14) & (ball_pts.real >= -rho)]
        Z = np.concatenate([Z, ball_pts])
    hmin = _chunked(lambda zz: herm_min_eig(eval_symbol(law, zz)), Z, grid.chunk)
    inside = np.abs(Z) <= delta
    outside = ~inside
    c_grid = float(hmin[outside].min()) if outside.any() else math.inf

    affine = affine_tail_bound(law, rho)
    if tail is None:
        tail = affine if affine is not None else -math.inf
    elif affine is not None:
        tail = max(tail, affine)
    c = min(c_grid, tail)
    binding = "grid" if c_grid <= tail else "tail"

    reasons = []
    if not K * a_inv < 1.0:
        reasons.append(f"boundedness fails: K*||A^-1|| = {K * a_inv:.6g} >= 1")
    if not c > 0:
        which = "no analytic tail bound" if tail == -math.inf else f"{binding} minimum {c:.6g}"
        reasons.append(f"positivity fails: {which} <= 0")
    certified = not reasons
    if certified:
        bound = 1.0 / c
        if delta > 0:
            bound = max(bound, a_inv / (1.0 - K * a_inv))
    else:
        bound = math.inf
    return BoundedPositiveResult(
        certified=certified,
        reason="; ".join(reasons) if reasons else "ok",
        delta=float(delta),
        rho=float(rho),
        K=float(K),
        K_grid=float(K_grid),
        a_inv_norm=float(a_inv),
        c=float(c),
        c_grid=c_grid,
        c_tail=float(tail),
        binding=binding,
        resolvent_bound=float(bound),
        evidence=GridEvidence(Z, np.asarray(hmin), inside),
    )


# --------------------------------------------------------------------------
# positivity constants of the second-order law


def global_positivity_constant(law):
    """``(rho0, c)`` with ``Re z M(1/z) >= c`` on ``Re z >= -rho0 = -1/(2r)``.

    Needs constant ``M0 = M0* >= 0`` and constant ``M1``.

    Raises
    ------
    NotCertifiedError
        If ``c <= 0`` or the law is not of that form.
    """
    rho0 = 0.5 / law.r
    c = affine_tail_bound(law, rho0)
    if c is None:
        raise NotCertifiedError("global positivity needs constant M0 >= 0 and constant M1")
    if not c > 0:
        raise NotCertifiedError(f"positivity violated: min eig(Re M1 - M0/(2r)) = {c:.6g} <= 0")
    return rho0, c


def _integro_first(rho, knorm, kernel, delta):
    # inf over [-rho, rho] of g; g is decreasing for non-negative kernels
    nodes = np.linspace(-rho, rho, 11)
    ginf = min(g_lower_bound(kernel, delta, r) for r in nodes)
    return (-rho * (1.0 + knorm) + math.sqrt(2 * math.pi) * ginf) / (1.0 + knorm) ** 2


def _integro_second(rho, knorm):
    return rho * (1.0 - knorm) / (1.0 + knorm) ** 2


def positivity_constants_integro(kernel, alpha, delta):
    """``(rho0, c)`` for ``M = (1 - k*)^{-1}`` outside ``|Im z| <= delta``.

    ``rho0`` is 0.9 times the root in ``(0, alpha)`` of

        F(rho) = (-rho (1+|k|) + sqrt(2 pi) inf_{[-rho, rho]} g) / (1+|k|)^2

    (found by bisection), and ``c = min(F(rho0), rho0 (1-|k|)/(1+|k|)^2)``
    with ``|k| = |k|_{1,-alpha}``.

    Raises
    ------
    NotCertifiedError
        If the hypotheses fail or ``g`` is not certified positive.
    """
    report = check_hypotheses(kernel, alpha)
    if not report.all_passed:
        raise NotCertifiedError(f"kernel hypotheses fail: {report.failures()}")
    if kernel.is_zero:
        raise NotCertifiedError("zero kernel: g vanishes, no positivity margin")
    knorm = report.weighted_norm
    if not _integro_first(0.0, knorm, kernel, delta) > 0:
        raise NotCertifiedError("g(0) is not positive")
    lo, hi = 0.0, float(alpha)
    if _integro_first(hi * (1 - 1e-12), knorm, kernel, delta) > 0:
        root = hi
    else:
        for _ in range(BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            if _integro_first(mid, knorm, kernel, delta) > 0:
                lo = mid
            else:
                hi = mid
        root = lo
    rho0 = SAFETY * root
    c = min(_integro_first(rho0, knorm, kernel, delta), _integro_second(rho0, knorm))
    if not c > 0:
        raise NotCertifiedError(f"integro positivity constant {c:.6g} <= 0")
    return rho0, c


def integro_right_tail(kernel, alpha, delta, re_min):
    """Lower bound of ``Re z (1 - K(z))^{-1}`` for ``Re z >= re_min``, ``|Im z| <= delta``."""
    knorm = weighted_l1_norm(kernel, alpha)
    return (re_min * (1.0 - knorm) - delta * knorm) / (1.0 + knorm) ** 2


# --------------------------------------------------------------------------
# choice of d


def G_of_d(d, m0_sup, m1_sup, c_inv_norm):
    """Bound of ``sup ||d [[-M0, (d M0 - M1) C^{-1}], [0, 1]]||``."""
    blocks = np.array([[m0_sup, (d * m0_sup + m1_sup) * c_inv_norm], [0.0, 1.0]])
    return d * op_norm(blocks)


@dataclass(frozen=True)
class D0Choice:
    d0: float
    rho1: float
    K_d0: float
    binding: str
    budget: float = None

    def as_dict(self):
        return {"d0": self.d0, "rho1": self.rho1, "K_d0": self.K_d0,
                "rho1_binding": self.binding, "budget": self.budget}


def find_d0(law, C, c, rho0, mode="global", delta=0.0):
    """Largest ``d`` in ``[1e-6, 1]`` with ``d K(d) < 0.9 c`` (log bisection).

    In ``mode="integro"`` the boundedness budget

        max(delta ||M0|| + sup_{|z|<=delta} ||M1||, delta) + G(d) < 1/||C^{-1}||

    is enforced as well.  Then ``rho1 = 0.9 min(0.75 d0, rho0, 1/(2r), alpha)``.

    Raises
    ------
    NotCertifiedError
        If no admissible ``d`` exists.
    """
    if not c > 0:
        raise NotCertifiedError("positivity constant must be positive")
    cinv = C.c_inv_norm
    m0 = law_sup_bound(law.M0, rho0)
    m1 = law_sup_bound(law.M1, rho0)
    budget = None
    if mode == "integro":
        if not delta > 0:
            raise ValueError("integro mode needs delta > 0")
        m0b = law_sup_bound(law.M0, delta)
        m1b = law_sup_bound(law.M1, delta)
        budget = max(delta * m0b + m1b, delta)
    elif mode != "global":
        raise ValueError(f"unknown mode {mode!r}")

    def ok(d):
        if not d * K_of_d(d, m0, m1, cinv) < SAFETY * c:
            return False
        if budget is not None:
            return budget + G_of_d(d, m0b, m1b, cinv) < 1.0 / cinv
        return True

    lo, hi = math.log(1e-6), 0.0
    if ok(1.0):
        d0 = 1.0
    elif not ok(1e-6):
        raise NotCertifiedError("no admissible d in [1e-6, 1]: budget exhausted")
    else:
        for _ in range(BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            if ok(math.exp(mid)):
                lo = mid
            else:
                hi = mid
        d0 = math.exp(lo)
    caps = {
        "0.75*d0": 0.75 * d0,
        "rho0": rho0,
        "1/(2r)": 0.5 / law.r,
        "alpha": law.alpha_dom,
    }
    binding = min(caps, key=caps.get)
    rho1 = SAFETY * caps[binding]
    return D0Choice(d0, rho1, K_of_d(d0, m0, m1, cinv), binding, budget)


# --------------------------------------------------------------------------
# resolvent validation


def _resolvent_norms(law, Amat, Z, chunk=512):
    return _chunked(lambda zz: inv_norm(eval_symbol(law, zz) + Amat), Z, chunk)


def resolvent_sup_grid(law, A, rho, grid=None):
    """Grid maximum of ``||(z M(1/z) + A)^{-1}||`` over ``Re z >= -rho``.

    Returns
    -------
    sup : float
    argmax : complex

    Raises
    ------
    CounterexampleError
        At a numerically singular grid point.
    """
    grid = grid or GridSpec()
    Amat = A.A if isinstance(A, BlockA) else np.asarray(A)
    t_max = grid.resolve_t_max(Amat)
    Z = grid.points(-rho, t_max)
    vals = _resolvent_norms(law, Amat, Z, grid.chunk)
    bad = ~np.isfinite(vals)
    if bad.any():
        raise CounterexampleError(Z[np.argmax(bad)])
    i = int(np.argmax(vals))
    z0 = Z[i]
    re_step = (grid.re_max + rho) / (grid.n_re - 1)
    im_step = max(abs(z0.imag) * 0.05, grid.im_min)
    loc_re = np.linspace(-re_step, re_step, 2 * grid.refine + 1)
    loc_im = np.linspace(-im_step, im_step, 2 * grid.refine + 1)
    X, Y = np.meshgrid(loc_re, loc_im)
    fine = (z0 + X + 1j * Y).ravel()
    fine = fine[(fine.real >= -rho) & (fine.real <= grid.re_max) & (np.abs(fine) > 1e-14)]
    fv = _resolvent_norms(law, Amat, fine, grid.chunk)
    if not np.all(np.isfinite(fv)):
        raise CounterexampleError(fine[np.argmax(~np.isfinite(fv))])
    j = int(np.argmax(fv))
    if fv[j] > vals[i]:
        return float(fv[j]), complex(fine[j])
    return float(vals[i]), complex(z0)


def estimate_growth_bound(law, A, lo=None, hi=1.0, tol=1e-7, n_re=41, n_im=401, candidates=12):
    """Heuristic estimate of the growth bound ``omega_0``.

    Locates singular points of ``z M(1/z) + A`` in ``lo <= Re z <= hi``:
    ``sigma_min`` is sampled on a grid, the deepest local candidates are
    polished by a Nelder-Mead search, and the largest real part among
    points with ``sigma_min <= tol (1 + ||A||)`` is returned (`lo` if none
    is found).  This is grid evidence, not a proof.
    """
    Amat = A.A if isinstance(A, BlockA) else np.asarray(A)
    scale = 1.0 + op_norm(Amat)
    if lo is None:
        lo = -min(law.alpha_dom, 10.0) * (1 - 1e-6)
    t_max = 50.0 * scale
    pos = np.geomspace(1e-4, t_max, n_im // 2)
    ts = np.concatenate([-pos[::-1], [0.0], pos])
    re = np.linspace(lo, hi, n_re)
    X, Y = np.meshgrid(re, ts, indexing="ij")
    Z = (X + 1j * Y).ravel()
    Z = Z[np.abs(Z) > 1e-14]
    sv = _chunked(lambda zz: smallest_sv(eval_symbol(law, zz) + Amat), Z, 512) / scale

    def f(p):
        z = complex(p[0], p[1])
        if not lo <= z.real <= hi or abs(z) < 1e-14:
            return math.inf
        return float(smallest_sv(eval_symbol(law, np.array([z]))[0] + Amat)) / scale

    poles = []
    for i in np.argsort(sv)[:candidates]:
        z0 = Z[i]
        step = max((hi - lo) / (n_re - 1), abs(z0.imag) * 0.05, 1e-3)
        res = optimize.minimize(f, [z0.real, z0.imag], method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": tol * 1e-3, "maxiter": 2000,
                                         "initial_simplex": [[z0.real, z0.imag],
                                                             [z0.real + step, z0.imag],
                                                             [z0.real, z0.imag + step]]})
        if res.fun <= tol:
            poles.append(float(res.x[0]))
    return float(max(poles)) if poles else float(lo)


# --------------------------------------------------------------------------
# perturbations and delays


def perturbation_margin(C_const, N, rho):
    """``C / (1 - ||N|| C)`` with ``||N||`` bounded on ``Re z >= -rho``.

    `N` may be a :class:`Law` or an already computed norm bound.

    Raises
    ------
    NotCertifiedError
        If ``||N|| C >= 1``.
    """
    nrm = float(N) if not isinstance(N, Law) else law_sup_bound(N, rho)
    prod = nrm * C_const
    if not prod < 1.0:
        raise NotCertifiedError(
            f"perturbation too large: ||N||*C = {prod:.6g} >= 1 (excess {prod - 1.0:.3g})"
        )
    return C_const / (1.0 - prod)


def kappa_threshold(kernel, C, h, d, rho1, C_const):
    """Largest delay gain certified by the perturbation argument.

    ``kappa0 = 0.9 (1 - |k|_{1,-rho1}) exp(-h rho1) / (C_const sqrt(1 + d^2 ||C^{-1}||^2))``.
    """
    knorm = 0.0 if kernel is None else weighted_l1_norm(kernel, rho1)
    if not knorm < 1.0:
        raise NotCertifiedError(f"|k|_(1,-rho1) = {knorm:.6g} >= 1")
    cinv = C.c_inv_norm if hasattr(C, "c_inv_norm") else float(C)
    return SAFETY * (1.0 - knorm) * math.exp(-h * rho1) / (C_const * nd_norm_factor(d, cinv))


# --------------------------------------------------------------------------
# pipeline


@dataclass(frozen=True, eq=False)
class StabilityCertificate:
    """Constants certifying exponential stability with rate ``rho1``."""

    certified: bool
    mode: str
    reason: str
    delta: float = None
    rho0: float = None
    c: float = None
    K: float = None
    d0: float = None
    rho1: float = None
    resolvent_bound: float = None
    growth_bound_estimate: float = None
    C_const: float = None
    kappa0: float = None
    perturbation_bound: float = None
    details: dict = field(default_factory=dict)
    first_order: BoundedPositiveResult = field(default=None, repr=False)
    system: object = field(default=None, repr=False)

    def as_dict(self):
        out = {
            "certified": self.certified,
            "mode": self.mode,
            "reason": self.reason,
            "delta": self.delta,
            "rho0": self.rho0,
            "c": self.c,
            "K": self.K,
            "d0": self.d0,
            "rho1": self.rho1,
            "resolvent_bound": self.resolvent_bound,
            "growth_bound_estimate": self.growth_bound_estimate,
            "C_const": self.C_const,
            "kappa0": self.kappa0,
            "perturbation_bound": self.perturbation_bound,
            "details": self.details,
        }
        if self.first_order is not None:
            out["first_order_check"] = self.first_order.as_dict()
        return out


def _fail(mode, reason, **kw):
    return StabilityCertificate(False, mode, reason, **kw)


def certify_scenario(scenario, delta=None, grid=None, estimate_growth=False):
    """Certify a :class:`~evostab.scenario.WaveScenario`.

    Memory-free scenarios use the global positivity constant of the affine
    law; scenarios with memory use the integro constants and the
    boundedness budget.  A delay term is treated as a perturbation of the
    delay-free certificate and is accepted iff ``|kappa| < kappa0``.

    Returns
    -------
    StabilityCertificate
        ``certified`` is False with a `reason` when a step fails.
    """
    grid = grid or GridSpec()
    base = scenario.second_order_law(include_delay=False)
    C = scenario.C
    mode = "integro" if scenario.has_memory else "global"
    details = {"scenario": scenario.describe()}
    try:
        if mode == "global":
            rho0, c = global_positivity_constant(base)
            delta = 0.0
            choice = find_d0(base, C, c, rho0, mode="global")
        else:
            kern = scenario.kernel
            alpha = kern.alpha
            if delta is None:
                delta = default_integro_delta(base, C.c_inv_norm)
            if not 0 < delta < alpha:
                raise NotCertifiedError(f"delta={delta} must lie in (0, alpha={alpha})")
            rho0, c = positivity_constants_integro(kern, alpha, delta)
            choice = find_d0(base, C, c, rho0, mode="integro", delta=delta)
    except NotCertifiedError as exc:
        return _fail(mode, str(exc), delta=delta, details=details)

    d0, rho1 = choice.d0, choice.rho1
    details["d_choice"] = choice.as_dict()
    system = build_Md(base, C, d0)
    # lemma lower bound for Re z M_d(1/z) from the positivity of the second-order law
    lemma_c = min(c - d0 * choice.K_d0, 0.75 * d0 - rho1)
    tail = lemma_c
    if mode == "integro":
        right = integro_right_tail(scenario.kernel, scenario.kernel.alpha, delta, grid.re_max)
        m0 = law_sup_bound(base.M0, 0.0)
        m1 = law_sup_bound(base.M1, 0.0)
        right_d = min(right - d0 * K_of_d(d0, m0, m1, C.c_inv_norm), 0.75 * d0 + grid.re_max)
        details["tails"] = {"lemma": lemma_c, "right": right_d}
        tail = min(lemma_c, right_d)
    else:
        details["tails"] = {"lemma": lemma_c}
    fo = check_bounded_positive(system.law, system.A, delta, rho1, grid=grid, tail=tail)
    common = dict(delta=float(delta), rho0=rho0, c=fo.c, K=fo.K, d0=d0, rho1=rho1,
                  details=details, first_order=fo, system=system)
    details["second_order_c"] = c
    if not fo.certified:
        return _fail(mode, fo.reason, **common)

    growth = None
    if estimate_growth:
        growth = estimate_growth_bound(system.law, system.A)
    common["growth_bound_estimate"] = growth

    base_cert = StabilityCertificate(True, mode, "ok", resolvent_bound=fo.resolvent_bound, **common)
    if not scenario.has_delay:
        return base_cert
    try:
        base_cert = with_delay_constants(base_cert, scenario.kernel, scenario.h, grid)
    except CounterexampleError as exc:
        return replace(base_cert, certified=False, mode=mode + "+delay", reason=str(exc))
    return certify_kappa(base_cert, scenario)


def with_delay_constants(cert, kernel, h, grid=None):
    """Add ``C_const`` and ``kappa0`` for delay length `h` to a delay-free certificate.

    ``C_const = 1.1 max(1/c, ||A^{-1}||/(1 - K||A^{-1}||), grid sup)`` over
    ``Re z >= -rho1``.
    """
    if not cert.certified:
        raise ValueError("needs a successful delay-free certificate")
    system, fo = cert.system, cert.first_order
    sup, arg = resolvent_sup_grid(system.law, system.A, cert.rho1, grid)
    a_inv = fo.a_inv_norm
    parts = [1.0 / fo.c, sup]
    if cert.delta > 0:
        parts.append(a_inv / (1.0 - fo.K * a_inv))
    C_const = 1.1 * max(parts)
    kappa0 = kappa_threshold(kernel, system.C, h, cert.d0, cert.rho1, C_const)
    details = dict(cert.details)
    details["delay"] = {"grid_sup": sup, "grid_argmax": [arg.real, arg.imag], "h": h}
    return replace(cert, C_const=C_const, kappa0=kappa0, details=details)


def certify_kappa(cert, scenario):
    """Certify the delayed scenario from a certificate carrying ``kappa0``.

    Accepted iff ``|kappa| < kappa0``; the perturbed resolvent bound
    ``C/(1 - ||N_d|| C)`` is then recorded.
    """
    if cert.kappa0 is None:
        raise ValueError("certificate lacks delay constants")
    mode = cert.mode.split("+")[0] + "+delay"
    details = dict(cert.details)
    details["delay"] = dict(details.get("delay", {}), kappa=scenario.kappa)
    out = replace(cert, mode=mode, details=details, perturbation_bound=None)
    if not abs(scenario.kappa) < cert.kappa0:
        return replace(out, certified=False,
                       reason=f"delay margin violated: |kappa| = {abs(scenario.kappa):.6g} "
                              f">= kappa0 = {cert.kappa0:.6g}")
    base = cert.system.source_law
    _, N = split_Md(SecondOrderLaw(base.M0, scenario.delay_part(), base.r), scenario.C, cert.d0)
    try:
        pb = perturbation_margin(cert.C_const, N, cert.rho1)
    except NotCertifiedError as exc:
        return replace(out, certified=False, reason=str(exc))
    return replace(out, certified=True, reason="ok", perturbation_bound=pb)


def default_integro_delta(law, c_inv_norm):
    """``min(alpha/2, 0.9 / (||C^{-1}|| sup ||M0||))``."""
    alpha = law.alpha_dom
    m0 = law_sup_bound(law.M0, 0.5 * alpha)
    return float(min(0.5 * alpha, SAFETY / (c_inv_norm * m0)))
