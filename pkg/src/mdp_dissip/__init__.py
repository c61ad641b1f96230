"""Functional dissipativity checks for undiscounted MDPs.

Stochastic LQR certificates (storage functionals for the KL divergence and the
whitened 2-Wasserstein metric), the scalar inequalities behind them, and
finite-MDP demonstrations of steady state, bias and cost rotation.
"""

from .gaussian import DissimilarityKind, GaussianMeasure
from .lqr import LqrCertificate, LqrProblem, SweepConfig, certify
from .finite_mdp import FiniteMdp

__all__ = [
    "DissimilarityKind",
    "FiniteMdp",
    "GaussianMeasure",
    "LqrCertificate",
    "LqrProblem",
    "SweepConfig",
    "certify",
]
__version__ = "0.1.0"
