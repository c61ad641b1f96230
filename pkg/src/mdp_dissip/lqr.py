"""Dissipativity certificate for the stochastic LQR problem.

The closed loop under the LQR gain maps Gaussian measures to Gaussian
measures. ``certify`` builds the storage weight and the constants for which
the rotated stage cost dominates a multiple of the KL divergence (or of the
whitened 2-Wasserstein metric) to the stationary measure.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import linalg
from .certificates import varsigma
from .errors import CertificationError, DissipError, InputError
from .gaussian import (
    DissimilarityKind,
    GaussianMeasure,
    kl_divergence,
    propagate,
    wasserstein2_parts,
    whitened_covariance,
)

MARGIN_TOL = -1e-9


def _matrix(value, name, ndim=2) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim != ndim:
        raise InputError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class LqrProblem:
    """``s+ = A s + B a + w`` with ``w ~ N(0, Sigma_w)`` and stage cost
    ``[s; a]^T H [s; a]``, ``H = [[T, U^T], [U, R]]``."""

    A: np.ndarray
    B: np.ndarray
    T: np.ndarray
    U: np.ndarray
    R: np.ndarray
    Sigma_w: np.ndarray

    def __post_init__(self):
        A = _matrix(self.A, "A")
        B = _matrix(self.B, "B")
        n = A.shape[0]
        if A.shape != (n, n) or B.shape[0] != n:
            raise InputError(f"A must be square and B must have {n} rows")
        m = B.shape[1]
        T = _matrix(self.T, "T")
        U = _matrix(self.U, "U")
        R = _matrix(self.R, "R")
        Sigma_w = _matrix(self.Sigma_w, "Sigma_w")
        if T.shape != (n, n) or U.shape != (m, n) or R.shape != (m, m) or Sigma_w.shape != (n, n):
            raise InputError("inconsistent block dimensions in LQR problem")
        T = linalg.require_symmetric(T, "T")
        R = linalg.require_symmetric(R, "R")
        linalg.require_spd(np.block([[T, U.T], [U, R]]), "H")
        Sigma_w = linalg.require_spd(Sigma_w, "Sigma_w")
        for name, arr in dict(A=A, B=B, T=T, U=U, R=R, Sigma_w=Sigma_w).items():
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def H(self) -> np.ndarray:
        return np.block([[self.T, self.U.T], [self.U, self.R]])

    @classmethod
    def from_dict(cls, data: dict) -> "LqrProblem":
        try:
            B = np.atleast_2d(np.asarray(data["B"], dtype=float))
            A = np.atleast_2d(np.asarray(data["A"], dtype=float))
            if B.shape[0] != A.shape[0] and B.shape[1] == A.shape[0]:
                B = B.T
            U = data.get("U")
            if U is None:
                U = np.zeros((B.shape[1], A.shape[0]))
            return cls(
                A=A,
                B=B,
                T=np.atleast_2d(data["T"]),
                U=np.atleast_2d(U),
                R=np.atleast_2d(data["R"]),
                Sigma_w=np.atleast_2d(data["Sigma_w"]),
            )
        except KeyError as exc:
            raise InputError(f"LQR problem is missing key {exc}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, DissipError):
                raise
            raise InputError(f"malformed LQR problem: {exc}") from None


@dataclass(frozen=True, eq=False)
class LqrCertificate:
    problem: LqrProblem
    P: np.ndarray
    K: np.ndarray
    Ac: np.ndarray
    W: np.ndarray
    Sigma_inf: np.ndarray
    L0: float
    sqrt_Sigma_inf: np.ndarray
    inv_sqrt_Sigma_inf: np.ndarray
    M: np.ndarray
    N: np.ndarray
    Omega: np.ndarray
    sigma_max_M: float
    kappa_kl: float
    rho_kl: float
    beta_kl: float
    kappa_w2: float
    beta_w2: float
    rho_w2: float

    @property
    def n(self) -> int:
        return self.Ac.shape[0]

    @property
    def steady_state(self) -> GaussianMeasure:
        return GaussianMeasure.centered(self.Sigma_inf)

    @property
    def Sigma_w(self) -> np.ndarray:
        return self.problem.Sigma_w

    def with_constants(self, **constants) -> "LqrCertificate":
        """Copy with some of the scalar constants replaced."""
        allowed = {"kappa_kl", "rho_kl", "beta_kl", "kappa_w2", "beta_w2", "rho_w2"}
        unknown = set(constants) - allowed
        if unknown:
            raise InputError(f"unknown certificate constants: {sorted(unknown)}")
        return dataclasses.replace(self, **{k: float(v) for k, v in constants.items()})

    def constants(self) -> dict:
        return {
            "kappa_kl": self.kappa_kl,
            "rho_kl": self.rho_kl,
            "beta_kl": self.beta_kl,
            "kappa_w2": self.kappa_w2,
            "beta_w2": self.beta_w2,
            "rho_w2": self.rho_w2,
        }

    def rate(self, kind) -> float:
        return self.rho_kl if DissimilarityKind(kind) is DissimilarityKind.KL else self.rho_w2

    def to_dict(self) -> dict:
        out = {
            "K": self.K.tolist(),
            "Ac": self.Ac.tolist(),
            "W": self.W.tolist(),
            "Sigma_inf": self.Sigma_inf.tolist(),
            "L0": self.L0,
            "M": self.M.tolist(),
            "N": self.N.tolist(),
            "Omega": self.Omega.tolist(),
            "sigma_max_M": self.sigma_max_M,
        }
        out.update(self.constants())
        return out


def certify(problem: LqrProblem) -> LqrCertificate:
    """Build the full dissipativity certificate for ``problem``."""
    P, K = linalg.solve_discrete_riccati(problem.A, problem.B, problem.T, problem.U, problem.R)
    Ac = problem.A - problem.B @ K
    IK = np.vstack([np.eye(problem.n), -K])
    W = linalg.require_spd(linalg.symmetrize(IK.T @ problem.H @ IK), "W")
    Sigma_inf = linalg.require_spd(
        linalg.solve_discrete_lyapunov(Ac, problem.Sigma_w), "Sigma_inf"
    )
    L0 = float(np.trace(W @ Sigma_inf))

    root = linalg.spd_sqrt(Sigma_inf)
    inv_root = linalg.spd_inv_sqrt(Sigma_inf)
    M = inv_root @ Ac @ root
    N = linalg.symmetrize(inv_root @ problem.Sigma_w @ inv_root)
    smax = float(linalg.singular_values(M)[0])
    if not smax < 1.0:
        raise CertificationError(f"sigma_max(M) = {smax} is not below 1")

    # Omega = M^T Omega M + S makes Tr(Omega Delta) telescope against the
    # covariance part of the stage cost, since Delta_{k+1} = M Delta_k M^T.
    S = linalg.symmetrize(root @ W @ root)
    Omega = linalg.solve_discrete_lyapunov(M.T, S)

    beta_kl = 1.0 - smax
    kappa_kl = 1.0 / (2.0 * beta_kl)
    rho_kl = float(linalg.eigvalsh(W)[0] * linalg.eigvalsh(Sigma_inf)[0])
    beta_w2 = 1.0 - np.sqrt(smax)
    kappa_w2 = 1.0 / beta_w2
    # mean part: 1/2 mu^T W mu >= rate mu^T S^{-1} mu; covariance part: kappa beta >= rate
    rho_w2 = min(kappa_w2 * beta_w2, 0.5 * rho_kl)
    return LqrCertificate(
        problem=problem,
        P=P,
        K=K,
        Ac=Ac,
        W=W,
        Sigma_inf=Sigma_inf,
        L0=L0,
        sqrt_Sigma_inf=root,
        inv_sqrt_Sigma_inf=inv_root,
        M=M,
        N=N,
        Omega=Omega,
        sigma_max_M=smax,
        kappa_kl=kappa_kl,
        rho_kl=rho_kl,
        beta_kl=beta_kl,
        kappa_w2=kappa_w2,
        beta_w2=float(beta_w2),
        rho_w2=float(rho_w2),
    )


def _check_dim(rho: GaussianMeasure, cert: LqrCertificate):
    if rho.dim != cert.n:
        raise InputError(f"measure has dimension {rho.dim}, certificate {cert.n}")


def deviation(rho: GaussianMeasure, cert: LqrCertificate) -> np.ndarray:
    """Whitened covariance deviation ``Sigma_inf^{-1/2} Sigma Sigma_inf^{-1/2} - I``."""
    _check_dim(rho, cert)
    return whitened_covariance(rho.covariance, cert.inv_sqrt_Sigma_inf) - np.eye(cert.n)


def stage_cost_functional(rho: GaussianMeasure, cert: LqrCertificate) -> float:
    """``1/2 mu^T W mu + Tr(W (Sigma - Sigma_inf))``; zero at the steady state."""
    _check_dim(rho, cert)
    mu = rho.mean
    return float(0.5 * mu @ cert.W @ mu + np.trace(cert.W @ (rho.covariance - cert.Sigma_inf)))


def storage_kl(rho: GaussianMeasure, cert: LqrCertificate) -> float:
    D = deviation(rho, cert)
    return float(cert.kappa_kl * varsigma(D) - np.trace(cert.Omega @ D))


def storage_w2(rho: GaussianMeasure, cert: LqrCertificate) -> float:
    D = deviation(rho, cert)
    _, cov_part = wasserstein2_parts(rho, cert.steady_state)
    return float(cert.kappa_w2 * cov_part - np.trace(cert.Omega @ D))


def storage(rho: GaussianMeasure, cert: LqrCertificate, kind) -> float:
    if DissimilarityKind(kind) is DissimilarityKind.KL:
        return storage_kl(rho, cert)
    return storage_w2(rho, cert)


def step(rho: GaussianMeasure, cert: LqrCertificate) -> GaussianMeasure:
    return propagate(rho, cert.Ac, cert.Sigma_w)


def rotated_cost(rho: GaussianMeasure, cert: LqrCertificate, kind=DissimilarityKind.KL) -> float:
    """Stage cost plus the storage drop over one closed-loop step."""
    nxt = step(rho, cert)
    return stage_cost_functional(rho, cert) - storage(nxt, cert, kind) + storage(rho, cert, kind)


def dissimilarity_to_steady_state(rho: GaussianMeasure, cert: LqrCertificate, kind) -> float:
    if DissimilarityKind(kind) is DissimilarityKind.KL:
        return kl_divergence(rho, cert.steady_state)
    return wasserstein2_parts(rho, cert.steady_state)[0]


def margin(rho: GaussianMeasure, cert: LqrCertificate, kind=DissimilarityKind.KL) -> float:
    """``rotated_cost - rate * D``; nonnegative when the certificate is valid."""
    return rotated_cost(rho, cert, kind) - cert.rate(kind) * dissimilarity_to_steady_state(rho, cert, kind)


@dataclass(frozen=True)
class SweepConfig:
    """Random Gaussian measures around the steady state.

    Covariances are ``Sigma_inf^{1/2} Q diag(e) Q^T Sigma_inf^{1/2}`` with
    ``Q`` Haar-orthogonal and ``e`` log-uniform in ``eig_range``; means are
    uniform in ``[-mean_scale, mean_scale]^n``.
    """

    count: int = 1000
    mean_scale: float = 5.0
    eig_range: tuple = (0.05, 20.0)
    seed: int = 0
    dim: int | None = None

    def validate(self, n: int):
        lo, hi = self.eig_range
        if self.count < 1:
            raise InputError("sweep count must be positive")
        if not 0 < lo <= hi:
            raise InputError("eig_range must satisfy 0 < lo <= hi")
        if self.mean_scale < 0:
            raise InputError("mean_scale must be nonnegative")
        if self.dim is not None and self.dim != n:
            raise InputError(f"sweep dimension {self.dim} does not match problem dimension {n}")


def _haar_orthogonal(rng, n):
    Q, R = np.linalg.qr(rng.standard_normal((n, n)))
    return Q * np.sign(np.diag(R))


def sample_measures(cert: LqrCertificate, config: SweepConfig):
    config.validate(cert.n)
    rng = np.random.default_rng(config.seed)
    lo, hi = (float(v) for v in config.eig_range)
    n = cert.n
    for _ in range(config.count):
        Q = _haar_orthogonal(rng, n)
        eig = np.exp(rng.uniform(np.log(lo), np.log(hi), size=n))
        mean = rng.uniform(-config.mean_scale, config.mean_scale, size=n)
        Psi = linalg.symmetrize((Q * eig) @ Q.T)
        cov = linalg.symmetrize(cert.sqrt_Sigma_inf @ Psi @ cert.sqrt_Sigma_inf)
        yield GaussianMeasure(mean, cov)


@dataclass
class VerificationReport:
    kind: str
    count: int
    min_margin: float
    argmin_index: int
    argmin_measure: GaussianMeasure
    min_rate: float
    num_violations: int
    tolerance: float = MARGIN_TOL

    @property
    def passed(self) -> bool:
        return self.min_margin >= self.tolerance

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "count": self.count,
            "min_margin": self.min_margin,
            "argmin_index": self.argmin_index,
            "argmin_mean": self.argmin_measure.mean.tolist(),
            "argmin_covariance": self.argmin_measure.covariance.tolist(),
            "empirical_min_rate": self.min_rate,
            "num_violations": self.num_violations,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def verify_dissipativity_sweep(cert: LqrCertificate, kind=DissimilarityKind.KL,
                               sampler: SweepConfig = SweepConfig()) -> VerificationReport:
    """Evaluate the dissipativity margin on sampled measures.

    ``min_rate`` is the smallest observed ratio ``rotated_cost / D`` over
    samples with ``D > 1e-12``, i.e. the largest rate the sweep supports.
    """
    kind = DissimilarityKind(kind)
    rate = cert.rate(kind)
    best, best_i, best_rho = np.inf, -1, None
    min_rate = np.inf
    violations = 0
    for i, rho in enumerate(sample_measures(cert, sampler)):
        rc = rotated_cost(rho, cert, kind)
        d = dissimilarity_to_steady_state(rho, cert, kind)
        m = rc - rate * d
        if m < MARGIN_TOL:
            violations += 1
        if m < best:
            best, best_i, best_rho = m, i, rho
        if d > 1e-12:
            min_rate = min(min_rate, rc / d)
    return VerificationReport(
        kind=kind.value,
        count=sampler.count,
        min_margin=float(best),
        argmin_index=best_i,
        argmin_measure=best_rho,
        min_rate=float(min_rate) if np.isfinite(min_rate) else float("nan"),
        num_violations=violations,
    )


@dataclass
class TrajectoryRecord:
    k: int
    measure: GaussianMeasure
    stage_cost: float
    storage: float
    rotated_cost: float
    d_kl: float
    w2: float
    bound: float


def simulate_trajectory(rho0: GaussianMeasure, cert: LqrCertificate, steps: int,
                        kind=DissimilarityKind.KL) -> list[TrajectoryRecord]:
    """Closed-loop measures ``rho_0 .. rho_steps`` with all functionals evaluated.

    ``storage``, ``rotated_cost`` and ``bound`` (rate times dissimilarity)
    follow ``kind``.
    """
    if steps < 1:
        raise InputError("steps must be at least 1")
    _check_dim(rho0, cert)
    kind = DissimilarityKind(kind)
    ref = cert.steady_state
    records = []
    rho = rho0
    lam = storage(rho, cert, kind)
    for k in range(steps + 1):
        nxt = step(rho, cert)
        lam_next = storage(nxt, cert, kind)
        stage = stage_cost_functional(rho, cert)
        d_kl = kl_divergence(rho, ref)
        w2 = wasserstein2_parts(rho, ref)[0]
        d = d_kl if kind is DissimilarityKind.KL else w2
        records.append(TrajectoryRecord(
            k=k,
            measure=rho,
            stage_cost=stage,
            storage=lam,
            rotated_cost=stage - lam_next + lam,
            d_kl=d_kl,
            w2=w2,
            bound=cert.rate(kind) * d,
        ))
        rho, lam = nxt, lam_next
    return records


def illustration_problem() -> LqrProblem:
    """Two-state, single-input example with ``T = I``, ``R = 1``."""
    return LqrProblem(
        A=np.array([[0.8, 0.5], [-0.5, 0.7]]),
        B=np.array([[0.0], [0.5]]),
        T=np.eye(2),
        U=np.zeros((1, 2)),
        R=np.eye(1),
        Sigma_w=np.array([[2.0, -1.0], [-1.0, 1.6]]),
    )


def illustration_initial_measure() -> GaussianMeasure:
    return GaussianMeasure(np.array([1.5, 1.5]), 0.1 * np.array([[1.0, 1.0], [1.0, 2.0]]))
