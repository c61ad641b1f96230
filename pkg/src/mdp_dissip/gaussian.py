"""Gaussian measures, their closed-loop propagation and two dissimilarities."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import InputError


class DissimilarityKind(str, enum.Enum):
    KL = "kl"
    WASSERSTEIN2 = "w2"


@dataclass(frozen=True, eq=False)
class GaussianMeasure:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        if mean.ndim != 1:
            raise InputError(f"mean must be a vector, got shape {mean.shape}")
        cov = linalg.require_spd(np.atleast_2d(self.covariance), "covariance")
        if cov.shape[0] != mean.shape[0]:
            raise InputError(
                f"mean has dimension {mean.shape[0]} but covariance is {cov.shape}"
            )
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @classmethod
    def centered(cls, covariance) -> "GaussianMeasure":
        covariance = np.atleast_2d(np.asarray(covariance, dtype=float))
        return cls(np.zeros(covariance.shape[0]), covariance)


def propagate(rho: GaussianMeasure, Ac, Sigma_w) -> GaussianMeasure:
    """One step of ``mu' = Ac mu``, ``Sigma' = Ac Sigma Ac^T + Sigma_w``."""
    Ac = np.atleast_2d(np.asarray(Ac, dtype=float))
    Sigma_w = np.atleast_2d(np.asarray(Sigma_w, dtype=float))
    n = rho.dim
    if Ac.shape != (n, n) or Sigma_w.shape != (n, n):
        raise InputError(
            f"dimension mismatch: measure {n}, Ac {Ac.shape}, Sigma_w {Sigma_w.shape}"
        )
    cov = linalg.symmetrize(Ac @ rho.covariance @ Ac.T + Sigma_w)
    return GaussianMeasure(Ac @ rho.mean, cov)


def _check_pair(rho: GaussianMeasure, ref: GaussianMeasure):
    if rho.dim != ref.dim:
        raise InputError(f"dimension mismatch: {rho.dim} vs {ref.dim}")


def whitened_covariance(Sigma, inv_sqrt_ref) -> np.ndarray:
    """``Psi = S^{-1/2} Sigma S^{-1/2}`` symmetrized, given ``S^{-1/2}``."""
    return linalg.symmetrize(inv_sqrt_ref @ Sigma @ inv_sqrt_ref)


def kl_divergence(rho: GaussianMeasure, ref: GaussianMeasure) -> float:
    """KL(rho || ref) between two multivariate normals."""
    _check_pair(rho, ref)
    inv_ref = linalg.spd_inv(ref.covariance)
    dmu = rho.mean - ref.mean
    value = 0.5 * (
        np.trace(inv_ref @ rho.covariance)
        + dmu @ inv_ref @ dmu
        - rho.dim
        + linalg.log_det_spd(ref.covariance)
        - linalg.log_det_spd(rho.covariance)
    )
    return float(value)


def wasserstein2_parts(rho: GaussianMeasure, ref):
    """Squared 2-Wasserstein metric in whitened coordinates ``s -> S^{-1/2} s``.

    ``ref`` is the reference measure, or just its covariance ``S`` (zero mean);
    in the whitened frame the reference becomes N(0, I). Returns ``(total, covariance_part)`` where
    ``covariance_part = sum_i (psi_i + 1 - 2 sqrt(psi_i))`` over the eigenvalues
    of the whitened covariance.
    """
    if not isinstance(ref, GaussianMeasure):
        ref = GaussianMeasure.centered(ref)
    _check_pair(rho, ref)
    inv_sqrt = linalg.spd_inv_sqrt(ref.covariance)
    psi = linalg.eigvalsh(linalg.require_spd(whitened_covariance(rho.covariance, inv_sqrt), "Psi"))
    cov_part = float(np.sum((np.sqrt(psi) - 1.0) ** 2))
    nu = inv_sqrt @ (rho.mean - ref.mean)
    return float(nu @ nu) + cov_part, cov_part


def dissimilarity(kind, rho: GaussianMeasure, ref: GaussianMeasure) -> float:
    kind = DissimilarityKind(kind)
    if kind is DissimilarityKind.KL:
        return kl_divergence(rho, ref)
    return wasserstein2_parts(rho, ref)[0]
