"""Frequency-domain stability certificates for evolutionary equations with
memory and delay, validated by time-domain simulation."""

from .certify import StabilityCertificate, certify_scenario, check_bounded_positive
from .kernels import DiagExpSumKernel, ExpSumKernel, SampledKernel
from .laws import SecondOrderLaw, eval_law, eval_symbol
from .reformulation import build_Md, split_Md
from .scenario import BumpSource, WaveScenario
from .spatial import block_A, dirichlet_1d, from_matrix
from .timedomain import simulate, solve_frequency

__version__ = "0.1.0"

__all__ = [
    "StabilityCertificate",
    "certify_scenario",
    "check_bounded_positive",
    "DiagExpSumKernel",
    "ExpSumKernel",
    "SampledKernel",
    "SecondOrderLaw",
    "eval_law",
    "eval_symbol",
    "build_Md",
    "split_Md",
    "BumpSource",
    "WaveScenario",
    "block_A",
    "dirichlet_1d",
    "from_matrix",
    "simulate",
    "solve_frequency",
]
