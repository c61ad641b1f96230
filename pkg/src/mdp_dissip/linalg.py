"""Dense symmetric matrix kernels and the two structured fixed-point solvers.

Everything here works on plain ``numpy`` arrays. Symmetric eigenproblems go
through a cyclic Jacobi solver so results are deterministic; the Riccati and
Lyapunov equations are solved by iterating their defining recursions.
"""

from __future__ import annotations

import numpy as np

from .errors import (
    ConvergenceError,
    DomainError,
    InputError,
    InstabilityError,
    StabilizabilityError,
)

SYM_TOL = 1e-12
SPD_REL_TOL = 1e-10
FIXED_POINT_TOL = 1e-12
MAX_ITER = 10_000


def _square(S, name="matrix") -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] == 0:
        raise InputError(f"{name} must be a non-empty square matrix, got shape {S.shape}")
    if not np.all(np.isfinite(S)):
        raise InputError(f"{name} has non-finite entries")
    return S


def symmetrize(S) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    return 0.5 * (S + S.T)


def require_symmetric(S, name="matrix", tol=SYM_TOL) -> np.ndarray:
    """Validate symmetry to ``tol`` (absolute) and return the symmetrized copy."""
    S = _square(S, name)
    if np.max(np.abs(S - S.T)) > tol:
        raise InputError(f"{name} is not symmetric")
    return symmetrize(S)


def sym_eigen(S, tol: float = 1e-15, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, V)`` with eigenvalues ascending and ``V``
    orthonormal, so that ``V @ diag(eigenvalues) @ V.T == S``.
    """
    A = require_symmetric(S).copy()
    n = A.shape[0]
    V = np.eye(n)
    scale = max(np.max(np.abs(A)), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= np.finfo(float).tiny:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) plane rotation
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap = A[p, :].copy()
                aq = A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        raise ConvergenceError("Jacobi eigensolver did not converge")
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def eigvalsh(S) -> np.ndarray:
    return sym_eigen(S)[0]


def is_spd(S) -> bool:
    try:
        w = eigvalsh(S)
    except InputError:
        return False
    return w[0] > 0 and w[0] > SPD_REL_TOL * w[-1]


def require_spd(S, name="matrix") -> np.ndarray:
    """Validate symmetric positive definiteness and return the symmetrized copy.

    The smallest eigenvalue must exceed ``1e-10`` times the largest.
    """
    S = require_symmetric(S, name)
    w = eigvalsh(S)
    if not (w[0] > 0 and w[0] > SPD_REL_TOL * w[-1]):
        raise DomainError(f"{name} is not positive definite (eigenvalues {w})")
    return S


def _spd_function(S, fn, name):
    S = require_spd(S, name)
    w, V = sym_eigen(S)
    return symmetrize((V * fn(w)) @ V.T)


def spd_sqrt(S) -> np.ndarray:
    """Symmetric positive square root."""
    return _spd_function(S, np.sqrt, "spd_sqrt argument")


def spd_inv_sqrt(S) -> np.ndarray:
    return _spd_function(S, lambda w: 1.0 / np.sqrt(w), "spd_inv_sqrt argument")


def spd_inv(S) -> np.ndarray:
    return _spd_function(S, lambda w: 1.0 / w, "spd_inv argument")


def log_det_spd(S) -> float:
    w = eigvalsh(require_spd(S, "log_det_spd argument"))
    return float(np.sum(np.log(w)))


def singular_values(M) -> np.ndarray:
    """Singular values (descending) as square roots of the spectrum of M^T M."""
    M = _square(M, "singular_values argument")
    w = eigvalsh(symmetrize(M.T @ M))
    return np.sqrt(np.clip(w, 0.0, None))[::-1]


def spectral_radius(F) -> float:
    F = _square(F, "matrix")
    return float(np.max(np.abs(np.linalg.eigvals(F))))


def solve_discrete_lyapunov(F, Q, tol=FIXED_POINT_TOL, max_iter=MAX_ITER) -> np.ndarray:
    """Solve ``X = F X F^T + Q`` by the contraction started at ``Q``."""
    F = _square(F, "F")
    Q = require_symmetric(Q, "Q")
    if F.shape != Q.shape:
        raise InputError(f"shape mismatch: F {F.shape}, Q {Q.shape}")
    rho = spectral_radius(F)
    if rho >= 1.0 - 1e-12:
        raise InstabilityError(f"spectral radius {rho:.6g} is not below 1")
    X = Q.copy()
    scale = 1.0 + np.max(np.abs(Q))
    for _ in range(max_iter):
        X_next = symmetrize(F @ X @ F.T + Q)
        if np.max(np.abs(X_next - X)) <= tol * scale:
            return X_next
        X = X_next
    raise ConvergenceError("Lyapunov iteration did not converge")


def riccati_gain(A, B, U, R, P) -> np.ndarray:
    return np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A + U)


def riccati_map(A, B, T, U, R, P) -> np.ndarray:
    """One step of the value recursion with cross term ``2 a^T U s``."""
    G = B.T @ P @ A + U
    return symmetrize(T + A.T @ P @ A - G.T @ np.linalg.solve(R + B.T @ P @ B, G))


def solve_discrete_riccati(A, B, T, U, R, tol=FIXED_POINT_TOL, max_iter=MAX_ITER):
    """Infinite-horizon LQR for cost ``[s; a]^T [[T, U^T], [U, R]] [s; a]``.

    Returns ``(P, K)`` with optimal input ``a = -K s``.
    """
    A = _square(A, "A")
    n = A.shape[0]
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != n:
        raise InputError(f"B must have {n} rows, got shape {B.shape}")
    m = B.shape[1]
    T = require_symmetric(T, "T")
    R = require_symmetric(R, "R")
    U = np.asarray(U, dtype=float)
    if U.shape != (m, n) or T.shape != (n, n) or R.shape != (m, m):
        raise InputError("inconsistent LQR block dimensions")
    H = np.block([[T, U.T], [U, R]])
    require_spd(H, "H")

    P = T.copy()
    for _ in range(max_iter):
        P_next = riccati_map(A, B, T, U, R, P)
        size = np.max(np.abs(P_next))
        if not np.isfinite(size) or size > 1e14:
            raise StabilizabilityError("Riccati recursion diverged; (A, B) not stabilizable")
        if np.max(np.abs(P_next - P)) <= tol * (1.0 + size):
            P = P_next
            break
        P = P_next
    else:
        raise StabilizabilityError("Riccati recursion did not converge")
    K = riccati_gain(A, B, U, R, P)
    if spectral_radius(A - B @ K) >= 1.0:
        raise StabilizabilityError("closed loop A - BK is not Schur stable")
    return P, K
