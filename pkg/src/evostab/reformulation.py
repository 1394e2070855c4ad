"""First-order reformulation of a second-order evolutionary equation.

With ``v = u' + d u`` and ``q = C u`` the second-order problem
``(M0 u)'' + M1 u' + C* C u = f`` becomes a first-order system with the
block operator ``A = [[0, C*], [-C, 0]]`` and the material law

    M_d(w) = [[M(w), 0], [0, 1]] + d w [[-M0(w), (d M0(w) - M1(w)) C^{-1}], [0, 1]],

where ``M(w) = M0(w) + w M1(w)``.  Collecting powers of ``w`` gives
``M_d = M0_d + w M1_d`` with

    M0_d = [[M0, 0], [0, 1]],
    M1_d = [[M1 - d M0, d (d M0 - M1) C^{-1}], [0, d]],

so ``M_d`` is again a :class:`~evostab.laws.SecondOrderLaw`.  Splitting off
the ``M1`` dependence, ``M_d(w) = Mt_d(w) + w N_d(w)`` with ``Mt_d`` built
from ``M0`` alone and ``N_d = [[M1, -d M1 C^{-1}], [0, 0]]``.
"""

import math
from dataclasses import dataclass

import numpy as np

from .laws import Block, Const, Law, Product, Scale, SecondOrderLaw, Sum, law_sup_bound
from .spatial import BlockA, SpatialC, block_A

__all__ = [
    "FirstOrderSystem",
    "build_Md",
    "split_Md",
    "recover_u",
    "lemma_lower_bound",
    "K_of_d",
    "nd_norm_factor",
]


def _eye(n):
    return Const(np.eye(n))


def _zeros(n):
    return Const(np.zeros((n, n)))


def _times_cinv(law, C):
    return Product((law, Const(C.inverse)))


@dataclass(frozen=True, eq=False)
class FirstOrderSystem:
    """Reformulated system ``(M_d, A)`` on the doubled space ``(v, q)``.

    Attributes
    ----------
    law : SecondOrderLaw
        ``M_d`` written as ``M0_d + w M1_d``.
    A : BlockA
    d : float
    source_law : SecondOrderLaw
    C : SpatialC
    tilde : SecondOrderLaw or None
        ``Mt_d``, the part of ``M_d`` that only depends on ``M0``.
    N : Law or None
        ``N_d``, the part driven by ``M1``; ``M_d = Mt_d + w N_d``.
    """

    law: SecondOrderLaw
    A: BlockA
    d: float
    source_law: SecondOrderLaw
    C: SpatialC
    tilde: SecondOrderLaw = None
    N: Law = None

    @property
    def n(self):
        return self.C.n

    def symbol(self, z):
        return self.law.symbol(z)


def build_Md(law, C, d):
    """Assemble ``M_d`` from a second-order law and the spatial operator.

    Parameters
    ----------
    law : SecondOrderLaw
    C : SpatialC
    d : float
        Reformulation parameter, ``d >= 0``.

    Returns
    -------
    FirstOrderSystem
        Includes the ``(Mt_d, N_d)`` split.
    """
    if law.dim != C.n:
        raise ValueError(f"law dimension {law.dim} does not match C ({C.n})")
    if not d >= 0:
        raise ValueError("d must be non-negative")
    n = C.n
    M0, M1 = law.M0, law.M1
    M0_d = Block(((M0, None), (None, _eye(n))))
    dM0_minus_M1 = Sum((Scale(d, M0), Scale(-1.0, M1)))
    M1_d = Block(
        (
            (Sum((M1, Scale(-d, M0))), Scale(d, _times_cinv(dM0_minus_M1, C))),
            (None, Scale(d, _eye(n))),
        )
    )
    law_d = SecondOrderLaw(M0_d, M1_d, law.r)
    tilde, N = split_Md(law, C, d)
    return FirstOrderSystem(law_d, block_A(C), float(d), law, C, tilde, N)


def split_Md(law, C, d):
    """Split ``M_d = Mt_d + w N_d`` into its ``M0`` and ``M1`` parts.

    Returns
    -------
    tilde : SecondOrderLaw
        ``[[M0, 0], [0, 1]] + w [[-d M0, d^2 M0 C^{-1}], [0, d]]``.
    N : Law
        ``[[M1, -d M1 C^{-1}], [0, 0]]``.
    """
    if law.dim != C.n:
        raise ValueError(f"law dimension {law.dim} does not match C ({C.n})")
    n = C.n
    M0, M1 = law.M0, law.M1
    tilde = SecondOrderLaw(
        Block(((M0, None), (None, _eye(n)))),
        Block(
            (
                (Scale(-d, M0), Scale(d * d, _times_cinv(M0, C))),
                (None, Scale(d, _eye(n))),
            )
        ),
        law.r,
    )
    N = Block(((M1, Scale(-d, _times_cinv(M1, C))), (None, _zeros(n))))
    return tilde, N


def nd_norm_factor(d, c_inv_norm):
    """``sqrt(1 + d^2 ||C^{-1}||^2)``, so that ``||N_d|| <= factor * ||M1||``."""
    return math.sqrt(1.0 + (d * c_inv_norm) ** 2)


def K_of_d(d, m0_sup, m1_sup, c_inv_norm):
    """``K(d) = ||M0|| + (d ||M0|| + ||M1|| ||C^{-1}||)^2``."""
    return m0_sup + (d * m0_sup + m1_sup * c_inv_norm) ** 2


def lemma_lower_bound(c, d, z_real, m0_sup, m1_sup, c_inv_norm):
    """Lower bound ``min(c - d K(d), 0.75 d + Re z)`` for ``Re z M_d(1/z)``.

    Valid whenever ``Re z M(1/z) >= c`` at the same `z`, with the sup norms
    of ``M0`` and ``M1`` taken over the half-plane containing `z`.
    """
    K = K_of_d(d, m0_sup, m1_sup, c_inv_norm)
    return np.minimum(c - d * K, 0.75 * d + np.asarray(z_real, dtype=float))


def law_sups(law, rho):
    """``(sup ||M0||, sup ||M1||)`` on ``Re z >= -rho``."""
    return law_sup_bound(law.M0, rho), law_sup_bound(law.M1, rho)


def recover_u(v, q, C, d):
    """Return ``u = C^{-1} q`` and ``u' = v - d u``.

    `v` and `q` are arrays of shape ``(nt, n)`` on the same time grid.
    """
    v = np.asarray(v)
    q = np.asarray(q)
    if v.shape != q.shape:
        raise ValueError(f"grid mismatch: v {v.shape} vs q {q.shape}")
    if v.shape[-1] != C.n:
        raise ValueError("state dimension does not match C")
    u = q @ C.inverse.T
    du = v - d * u
    return u, du
