"""Randomized and grid property suites over the certificate machinery."""

from __future__ import annotations

import numpy as np

from . import linalg
from .certificates import eigen_contraction_check, g_w2, lemma2_check, lemma4_check, vartheta
from .errors import CertificationError
from .lqr import LqrCertificate, SweepConfig, sample_measures, step

PARAMS = np.round(np.arange(0.1, 0.91, 0.1), 10)


def random_symmetric(rng, n, lo, hi) -> np.ndarray:
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = rng.uniform(lo, hi, size=n)
    return linalg.symmetrize((Q * eig) @ Q.T)


def random_contraction(rng, n, smax_hi=0.95) -> np.ndarray:
    """A full-rank matrix with largest singular value uniform in (0.1, smax_hi)."""
    G = rng.standard_normal((n, n))
    s = np.linalg.svd(G, compute_uv=False)
    while s[-1] < 1e-3 * s[0]:
        G = rng.standard_normal((n, n))
        s = np.linalg.svd(G, compute_uv=False)
    return G / s[0] * rng.uniform(0.1, smax_hi)


def lemma2_suite(rng, cases=500, max_dim=5) -> dict:
    failures = 0
    tight = 0.0
    for _ in range(cases):
        n = int(rng.integers(1, max_dim + 1))
        M = random_contraction(rng, n)
        Delta = random_symmetric(rng, n, -5.0, 5.0)
        report = lemma2_check(Delta, M)
        if not report.passed:
            failures += 1
        smax = report.bound
        if report.max_ratio > 0:
            tight = max(tight, report.max_ratio / smax**2)
    # tight <= 1 means the ratios also respect sigma_max(M)^2
    return {"cases": cases, "failures": failures, "max_ratio_over_smax_squared": tight}


def lemma3_suite(cert: LqrCertificate, rng, cases=100) -> dict:
    seed = int(rng.integers(2**31))
    failures = 0
    for rho in sample_measures(cert, SweepConfig(count=cases, seed=seed)):
        after = step(rho, cert)
        report = eigen_contraction_check(rho.covariance, after.covariance,
                                         cert.Sigma_inf, cert.sigma_max_M)
        if not report.passed:
            failures += 1
    return {"cases": cases, "failures": failures}


def lemma4_suite(rng, cases=500, max_dim=5) -> dict:
    failures = 0
    worst = np.inf
    for _ in range(cases):
        n = int(rng.integers(1, max_dim + 1))
        M = random_contraction(rng, n)
        Delta = random_symmetric(rng, n, -0.9, 5.0)
        beta = 1.0 - linalg.singular_values(M)[0]
        try:
            worst = min(worst, lemma4_check(Delta, M, beta))
        except CertificationError:
            failures += 1
    return {"cases": cases, "failures": failures, "min_value": float(worst)}


def x_grid(points=2000, lo=-0.99, hi=10.0) -> np.ndarray:
    x = np.linspace(lo, hi, points)
    return np.unique(np.append(x, 0.0))


def vartheta_grid(points=2000) -> dict:
    x = x_grid(points)
    total, minimum, argmin_ok = 0, np.inf, True
    for a in PARAMS:
        for b in (1.0 - a, 0.5 * (1.0 - a)):
            v = vartheta(a, b, x)
            total += v.size
            minimum = min(minimum, float(v.min()))
            argmin_ok &= bool(x[np.argmin(v)] == 0.0)
    return {"points": total, "min": minimum, "argmin_at_zero": argmin_ok,
            "failures": int(minimum < -1e-12) + int(not argmin_ok)}


def g_w2_grid(points=2000) -> dict:
    x = x_grid(points)
    total, minimum, argmin_ok = 0, np.inf, True
    for alpha in PARAMS:
        for beta in (1.0 - np.sqrt(alpha), 0.5 * (1.0 - np.sqrt(alpha))):
            v = g_w2(alpha, beta, x)
            total += v.size
            minimum = min(minimum, float(v.min()))
            argmin_ok &= bool(x[np.argmin(v)] == 0.0)
    return {"points": total, "min": minimum, "argmin_at_zero": argmin_ok,
            "failures": int(minimum < -1e-12) + int(not argmin_ok)}


def certificate_residuals(cert: LqrCertificate) -> dict:
    n = cert.n
    whitening = np.max(np.abs(cert.M @ cert.M.T + cert.N - np.eye(n)))
    S = cert.sqrt_Sigma_inf @ cert.W @ cert.sqrt_Sigma_inf
    omega = np.max(np.abs(cert.M.T @ cert.Omega @ cert.M - cert.Omega + S))
    steady = np.max(np.abs(cert.Ac @ cert.Sigma_inf @ cert.Ac.T + cert.Sigma_w - cert.Sigma_inf))
    out = {"MMt_plus_N": float(whitening), "omega_lyapunov": float(omega),
           "sigma_inf_lyapunov": float(steady)}
    out["failures"] = sum(v > 1e-9 for v in list(out.values()))
    return out


def appendix_suite(cert: LqrCertificate, seed=0) -> dict:
    """Every appendix property check; ``passed`` iff all have zero failures."""
    rng = np.random.default_rng(seed)
    results = {
        "lemma2": lemma2_suite(rng),
        "lemma3": lemma3_suite(cert, rng),
        "lemma4": lemma4_suite(rng),
        "vartheta_grid": vartheta_grid(),
        "g_w2_grid": g_w2_grid(),
        "residuals": certificate_residuals(cert),
    }
    results["passed"] = all(r["failures"] == 0 for r in results.values())
    return results
