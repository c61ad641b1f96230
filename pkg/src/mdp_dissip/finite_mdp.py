"""Finite state/action MDPs under deterministic policies.

Distributions are row vectors; ``kernel[a, s, s2]`` is the probability of
moving from ``s`` to ``s2`` under action ``a`` and ``cost[s, a]`` the stage
cost.
"""

from __future__ import annotations

import itertools
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DissipError,
    DivergenceError,
    InputError,
    MultichainError,
    NoSolutionError,
    NotApplicableError,
    SizeError,
    UniquenessError,
)

log = logging.getLogger(__name__)

STOCHASTIC_TOL = 1e-12
ENUMERATION_GUARD = 10**6


@dataclass(frozen=True, eq=False)
class FiniteMdp:
    kernel: np.ndarray
    cost: np.ndarray

    def __post_init__(self):
        kernel = np.asarray(self.kernel, dtype=float)
        cost = np.asarray(self.cost, dtype=float)
        if kernel.ndim != 3 or kernel.shape[1] != kernel.shape[2] or kernel.shape[0] == 0:
            raise InputError(f"kernel must have shape (A, S, S), got {kernel.shape}")
        A, S, _ = kernel.shape
        if cost.shape != (S, A):
            raise InputError(f"cost must have shape ({S}, {A}), got {cost.shape}")
        if not (np.all(np.isfinite(kernel)) and np.all(np.isfinite(cost))):
            raise InputError("kernel and cost must be finite")
        if np.any(kernel < 0):
            raise InputError("kernel has negative entries")
        rows = kernel.sum(axis=2)
        if np.max(np.abs(rows - 1.0)) > STOCHASTIC_TOL:
            bad = np.argwhere(np.abs(rows - 1.0) > STOCHASTIC_TOL)[0]
            raise InputError(f"kernel row (a={bad[0]}, s={bad[1]}) sums to {rows[tuple(bad)]}")
        object.__setattr__(self, "kernel", kernel)
        object.__setattr__(self, "cost", cost)

    @property
    def num_states(self) -> int:
        return self.kernel.shape[1]

    @property
    def num_actions(self) -> int:
        return self.kernel.shape[0]

    @classmethod
    def from_dict(cls, data: dict) -> "FiniteMdp":
        try:
            mdp = cls(kernel=data["kernel"], cost=data["cost"])
        except KeyError as exc:
            raise InputError(f"MDP fixture is missing key {exc}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, DissipError):
                raise
            raise InputError(f"malformed MDP fixture: {exc}") from None
        for key, value in (("num_states", mdp.num_states), ("num_actions", mdp.num_actions)):
            if key in data and int(data[key]) != value:
                raise InputError(f"{key}={data[key]} does not match kernel shape")
        return mdp

    @classmethod
    def load(cls, path) -> "FiniteMdp":
        with open(Path(path)) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "kernel": self.kernel.tolist(),
            "cost": self.cost.tolist(),
        }

    def policy_matrix(self, policy) -> np.ndarray:
        policy = check_policy(policy, self)
        return self.kernel[policy, np.arange(self.num_states), :]

    def policy_cost(self, policy) -> np.ndarray:
        policy = check_policy(policy, self)
        return self.cost[np.arange(self.num_states), policy]


def check_policy(policy, mdp: FiniteMdp) -> np.ndarray:
    policy = np.asarray(policy, dtype=int)
    if policy.shape != (mdp.num_states,):
        raise InputError(f"policy must assign one action per state ({mdp.num_states})")
    if np.any(policy < 0) or np.any(policy >= mdp.num_actions):
        raise InputError("policy action index out of range")
    return policy


def check_distribution(rho, num_states: int) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (num_states,):
        raise InputError(f"distribution must have length {num_states}")
    if np.any(rho < 0) or abs(rho.sum() - 1.0) > STOCHASTIC_TOL:
        raise InputError("distribution must be nonnegative and sum to 1")
    return rho


def apply_transition(rho, policy, mdp: FiniteMdp) -> np.ndarray:
    rho = check_distribution(rho, mdp.num_states)
    return rho @ mdp.policy_matrix(policy)


def expected_cost(rho, policy, mdp: FiniteMdp) -> float:
    return float(np.asarray(rho) @ mdp.policy_cost(policy))


def _stationary(P: np.ndarray, tol: float, max_iter: int) -> np.ndarray:
    S = P.shape[0]
    # a repeated unit eigenvalue means several closed classes; any other
    # eigenvalue on the unit circle means a periodic class, which power
    # iteration cannot settle from a general start
    on_circle = int(np.sum(np.abs(np.linalg.eigvals(P)) >= 1.0 - 1e-9))
    if on_circle != 1:
        raise UniquenessError("closed-loop chain has no unique limiting distribution "
                              f"({on_circle} eigenvalues on the unit circle)")
    rho = np.full(S, 1.0 / S)
    for _ in range(max_iter):
        nxt = rho @ P
        if np.max(np.abs(nxt - rho)) <= tol:
            return nxt / nxt.sum()
        rho = nxt
    raise UniquenessError("power iteration did not converge (periodic chain?)")


def stationary_distribution(policy, mdp: FiniteMdp, tol=1e-12, max_iter=10**6) -> np.ndarray:
    """Limit of power iteration from the uniform distribution."""
    return _stationary(mdp.policy_matrix(policy), tol, max_iter)


@dataclass
class SteadyStateSolution:
    policy: np.ndarray
    rho_star: np.ndarray
    L0: float
    skipped: list = field(default_factory=list)


def solve_steady_state(mdp: FiniteMdp, max_iter=10**6) -> SteadyStateSolution:
    """Cheapest stationary cost over all deterministic policies.

    Policies are visited in lexicographic order and replaced only by a
    strictly cheaper one, so ties go to the smallest policy.
    """
    S, A = mdp.num_states, mdp.num_actions
    if A**S > ENUMERATION_GUARD:
        raise SizeError(f"{A}^{S} policies exceed the enumeration guard")
    best = None
    skipped = []
    for policy in itertools.product(range(A), repeat=S):
        policy = np.array(policy, dtype=int)
        try:
            rho = stationary_distribution(policy, mdp, max_iter=max_iter)
        except UniquenessError:
            log.warning("skipping policy %s: no unique limiting distribution", policy.tolist())
            skipped.append(policy.tolist())
            continue
        value = expected_cost(rho, policy, mdp)
        if best is None or value < best.L0 - 1e-12:
            best = SteadyStateSolution(policy, rho, value)
    if best is None:
        raise NoSolutionError("no deterministic policy has a unique limiting distribution")
    best.skipped = skipped
    return best


def bellman_residual(mdp: FiniteMdp, gain: float, bias) -> float:
    q = mdp.cost + np.einsum("ast,t->sa", mdp.kernel, bias)
    return float(np.max(np.abs(gain + bias - q.min(axis=1))))


def relative_value_iteration(mdp: FiniteMdp, tol=1e-13, max_iter=10**6):
    """Average-cost optimality equation ``g + h = min_a (L + P_a h)``.

    Returns ``(gain, bias, policy)`` with ``bias[0] == 0``.
    """
    h = np.zeros(mdp.num_states)
    for _ in range(max_iter):
        q = mdp.cost + np.einsum("ast,t->sa", mdp.kernel, h)
        Th = q.min(axis=1)
        diff = Th - h
        h_next = Th - Th[0]
        if diff.max() - diff.min() <= tol:
            h = h_next
            break
        h = h_next
    else:
        raise MultichainError("relative value iteration did not converge")
    q = mdp.cost + np.einsum("ast,t->sa", mdp.kernel, h)
    gain = float(q.min(axis=1)[0] - h[0])
    return gain, h, q.argmin(axis=1)


def policy_bias(policy, mdp: FiniteMdp):
    """Gain and bias ``h`` (``h[0] = 0``) of a unichain policy from the Poisson equation."""
    P = mdp.policy_matrix(policy)
    c = mdp.policy_cost(policy)
    S = mdp.num_states
    # g + (I - P) h = c with h[0] = 0: column 0 of (I - P) carries g instead
    Amat = np.eye(S) - P
    Amat[:, 0] = 1.0
    try:
        x = np.linalg.solve(Amat, c)
    except np.linalg.LinAlgError:
        raise UniquenessError("Poisson equation is singular (multichain policy)") from None
    h = x.copy()
    h[0] = 0.0
    return float(x[0]), h


def bias_value(rho0, policy, mdp: FiniteMdp, L0: float, tol=1e-10, patience=20,
               max_iter=10**6) -> float:
    """Sum of ``E_{rho_k}[L] - L0`` along the closed loop started at ``rho0``.

    Stops after ``patience`` consecutive increments below ``tol``.
    """
    rho = check_distribution(rho0, mdp.num_states)
    P = mdp.policy_matrix(policy)
    c = mdp.policy_cost(policy)
    total = 0.0
    quiet = 0
    for _ in range(max_iter):
        inc = float(rho @ c) - L0
        total += inc
        quiet = quiet + 1 if abs(inc) <= tol else 0
        if quiet >= patience:
            return total
        nxt = rho @ P
        if np.max(np.abs(nxt - rho)) <= 1e-15 and abs(inc) > tol:
            raise DivergenceError(
                f"increments settle at {inc:.3g}; L0 is not the stationary cost of this policy"
            )
        rho = nxt
    raise DivergenceError("bias series did not converge")


@dataclass
class TelescopingReport:
    passed: bool
    max_error: float
    values: list
    excess_costs: list
    negative_steps: list

    def __bool__(self):
        return self.passed


def telescoping_check(rho0, policy, mdp: FiniteMdp, L0: float, steps: int,
                      tol=1e-8) -> TelescopingReport:
    """Check ``V[rho_{k+1}] - V[rho_k] = -(E_{rho_k}[L] - L0)`` for ``k < steps``.

    Also lists the steps with negative excess cost, where the unrotated stage
    cost cannot serve as a Lyapunov decrease.
    """
    rho = check_distribution(rho0, mdp.num_states)
    values, excess = [], []
    for _ in range(steps + 1):
        values.append(bias_value(rho, policy, mdp, L0))
        excess.append(expected_cost(rho, policy, mdp) - L0)
        rho = apply_transition(rho, policy, mdp)
    errors = [abs(values[k + 1] - values[k] + excess[k]) for k in range(steps)]
    max_error = max(errors) if errors else 0.0
    return TelescopingReport(
        passed=max_error <= tol,
        max_error=max_error,
        values=values,
        excess_costs=excess[:steps],
        negative_steps=[k for k in range(steps) if excess[k] < -1e-12],
    )


def linear_rotation(lam, policy, mdp: FiniteMdp) -> np.ndarray:
    """Rotated cost ``L(s, pi(s)) + E[lam(s+)] - lam(s)`` for a state-wise storage."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (mdp.num_states,) or not np.all(np.isfinite(lam)):
        raise InputError("storage vector must be finite with one entry per state")
    return mdp.policy_cost(policy) + mdp.policy_matrix(policy) @ lam - lam


@dataclass
class WitnessReport:
    support: list
    expected_rotated_excess: float
    rotated_excess: list
    positivity_holds: bool
    violating_states: list
    contradiction_certified: bool


def lemma1_witness(mdp: FiniteMdp, policy, lam, L0: float, tol=1e-10) -> WitnessReport:
    """Show that a state-wise rotation cannot make ``L^R - L0`` positive.

    Under the stationary distribution the rotated excess averages to zero, so
    on a support of two or more states it is either negative somewhere or
    zero on several states. The states breaking "nonnegative with at most one
    zero" are returned as ``violating_states``.
    """
    rho = stationary_distribution(policy, mdp)
    support = [int(s) for s in np.flatnonzero(rho > tol)]
    if len(support) < 2:
        raise NotApplicableError("stationary distribution is a Dirac measure")
    excess = linear_rotation(lam, policy, mdp) - L0
    mean_excess = float(rho @ excess)
    negative = [s for s in support if excess[s] < -tol]
    zeros = [s for s in support if abs(excess[s]) <= tol]
    positivity = not negative and len(zeros) <= 1
    violating = negative if negative else (zeros if len(zeros) > 1 else [])
    return WitnessReport(
        support=support,
        expected_rotated_excess=mean_excess,
        rotated_excess=excess.tolist(),
        positivity_holds=positivity,
        violating_states=violating,
        contradiction_certified=abs(mean_excess) <= 1e-9 and not positivity,
    )
