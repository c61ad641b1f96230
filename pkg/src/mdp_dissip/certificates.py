"""Scalar certificate functions and eigenvalue-contraction checks.

These are the inequalities that make the LQR storage functionals work, written
as plain functions so they can be evaluated on grids and random cases.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import CertificationError, DomainError, InputError
from .gaussian import GaussianMeasure, whitened_covariance

GAP_TOL = 1e-12
RATIO_SLACK = 1e-9


def varsigma(Delta) -> float:
    """``Tr(Delta) - log det(Delta + I)`` for symmetric ``Delta`` with spectrum > -1."""
    lam = linalg.eigvalsh(Delta)
    if lam[0] <= -1.0:
        raise DomainError(f"varsigma needs eigenvalues > -1, smallest is {lam[0]}")
    return float(np.sum(lam - np.log1p(lam)))


def vartheta(a, b, x):
    """``(1-b)(x - log(1+x)) - a x + log(1 + a x)``; nonnegative for 0 < b <= 1-a."""
    x = np.asarray(x, dtype=float)
    if not a < 1:
        raise DomainError("vartheta needs a < 1")
    if not 0 < b <= 1 - a:
        raise DomainError("vartheta needs 0 < b <= 1 - a")
    if np.any(x <= -1) or np.any(a * x <= -1):
        raise DomainError("vartheta needs x > -1 and a x > -1")
    out = (1 - b) * (x - np.log1p(x)) - a * x + np.log1p(a * x)
    return float(out) if out.ndim == 0 else out


def g_w2(alpha, beta, x):
    """Wasserstein counterpart of ``vartheta``; nonnegative for beta <= 1 - sqrt(alpha)."""
    x = np.asarray(x, dtype=float)
    if not 0 < alpha < 1:
        raise DomainError("g_w2 needs 0 < alpha < 1")
    if not 0 <= beta <= 1 - np.sqrt(alpha):
        raise DomainError("g_w2 needs 0 <= beta <= 1 - sqrt(alpha)")
    if np.any(x <= -1):
        raise DomainError("g_w2 needs x > -1")
    out = (1 - beta) * (x - 2 * np.sqrt(x + 1) + 2) - (alpha * x - 2 * np.sqrt(alpha * x + 1) + 2)
    return float(out) if out.ndim == 0 else out


def kl_kernel(x):
    return x - np.log(x) - 1.0


def w2_kernel(x):
    return x + 1.0 - 2.0 * np.sqrt(x)


@dataclass
class ContractionReport:
    """Index-matched eigenvalues before/after one step and their ratios.

    ``ratios[i]`` is NaN for indices skipped because the gap before is zero.
    """

    eigen_pairs: list
    ratios: list
    max_ratio: float
    sign_preserved: bool
    bound: float
    skipped: list = field(default_factory=list)

    @property
    def at_fixed_point(self) -> bool:
        return len(self.skipped) == len(self.eigen_pairs)

    @property
    def passed(self) -> bool:
        finite = [r for r in self.ratios if not np.isnan(r)]
        return self.sign_preserved and all(0 < r <= self.bound + RATIO_SLACK for r in finite)


def _compare_spectra(before, after, bound) -> ContractionReport:
    if len(before) != len(after):
        raise InputError("spectra have different lengths")
    ratios, skipped = [], []
    sign_ok = True
    for i, (lb, la) in enumerate(zip(before, after)):
        if abs(lb) <= GAP_TOL:
            ratios.append(float("nan"))
            skipped.append(i)
            continue
        r = la / lb
        ratios.append(float(r))
        if r <= 0:
            sign_ok = False
    finite = [r for r in ratios if not np.isnan(r)]
    return ContractionReport(
        eigen_pairs=[(float(b), float(a)) for b, a in zip(before, after)],
        ratios=ratios,
        max_ratio=max(finite) if finite else 0.0,
        sign_preserved=sign_ok,
        bound=float(bound),
        skipped=skipped,
    )


def lemma2_check(Delta, M) -> ContractionReport:
    """Compare ordered eigenvalues of ``M Delta M^T`` with those of ``Delta``."""
    Delta = linalg.require_symmetric(Delta, "Delta")
    M = np.asarray(M, dtype=float)
    if M.shape != Delta.shape:
        raise InputError("M and Delta must have the same shape")
    smax = linalg.singular_values(M)[0]
    after = linalg.eigvalsh(linalg.symmetrize(M @ Delta @ M.T))
    return _compare_spectra(linalg.eigvalsh(Delta), after, smax)


def eigen_contraction_check(Sigma_before, Sigma_after, Sigma_inf, sigma_max_M) -> ContractionReport:
    """Gaps ``Lambda_i(Sigma_inf^{-1} Sigma) - 1`` before and after one step.

    The caller guarantees ``Sigma_after`` is the propagated ``Sigma_before``.
    """
    Sigma_before = linalg.require_spd(Sigma_before, "Sigma_before")
    Sigma_after = linalg.require_spd(Sigma_after, "Sigma_after")
    Sigma_inf = linalg.require_spd(Sigma_inf, "Sigma_inf")
    if not Sigma_before.shape == Sigma_after.shape == Sigma_inf.shape:
        raise InputError("covariance shapes differ")
    inv_sqrt = linalg.spd_inv_sqrt(Sigma_inf)
    before = linalg.eigvalsh(whitened_covariance(Sigma_before, inv_sqrt)) - 1.0
    after = linalg.eigvalsh(whitened_covariance(Sigma_after, inv_sqrt)) - 1.0
    return _compare_spectra(before, after, sigma_max_M)


def generic_dissimilarity(zeta, rho: GaussianMeasure, Sigma_inf) -> float:
    """``mu^T S^{-1} mu + sum_i zeta(Lambda_i(S^{-1} Sigma))`` with ``S = Sigma_inf``."""
    inv_sqrt = linalg.spd_inv_sqrt(Sigma_inf)
    nu = inv_sqrt @ rho.mean
    lam = linalg.eigvalsh(whitened_covariance(rho.covariance, inv_sqrt))
    return float(nu @ nu + np.sum(zeta(lam)))


def generic_decrease_check(zeta, trajectory, Sigma_inf, floor=1e-12, rel=1e-12) -> bool:
    """True iff the generic dissimilarity strictly decreases along ``trajectory``.

    Steps starting below ``floor`` are treated as converged. Otherwise each
    step must decrease by more than ``rel`` times the current value.
    """
    values = [generic_dissimilarity(zeta, rho, Sigma_inf) for rho in trajectory]
    for d0, d1 in zip(values, values[1:]):
        if d0 <= floor:
            if d1 > floor:
                return False
            continue
        if not d0 - d1 > rel * d0:
            return False
    return True


def lemma4_check(Delta, M, beta) -> float:
    """Return ``(1 - beta) varsigma(Delta) - varsigma(M Delta M^T)``.

    Raises ``CertificationError`` if it falls below ``-1e-10``.
    """
    M = np.asarray(M, dtype=float)
    smax = linalg.singular_values(M)[0]
    if smax >= 1:
        raise DomainError(f"lemma4_check needs sigma_max(M) < 1, got {smax}")
    if beta > 1 - smax + 1e-12:
        raise DomainError("lemma4_check needs beta <= 1 - sigma_max(M)")
    Delta = linalg.require_symmetric(Delta, "Delta")
    value = (1 - beta) * varsigma(Delta) - varsigma(linalg.symmetrize(M @ Delta @ M.T))
    if value < -1e-10:
        raise CertificationError(f"varsigma contraction inequality violated: {value}")
    return value
