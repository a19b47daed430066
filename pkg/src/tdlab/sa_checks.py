"""Runtime verification of the stochastic-approximation scaffolding.

The TD update is driven by the chain of transitions Y_t = (S_t, A_t, S_{t+1}).
This module builds that pair chain explicitly, solves the associated Poisson
equation through the deviation (fundamental) matrix, and checks the
assumptions the convergence analysis rests on, reporting numeric evidence
rather than proofs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotIrreducible
from .linalg import FeatureMap, pseudo_inverse
from .markov import SUPPORT_EPS, Mdp, Policy, PolicyChain, check_irreducible

POISSON_TOL = 1e-10
NSD_TOL = 1e-10


@dataclass(frozen=True)
class PairChain:
    """The transition chain over y = (s, a, s') with its stationary law eta.

    Only pairs with pi(a|s) > 0 and p(s'|s, a) > 0 are enumerated, which keeps
    the chain irreducible whenever the base chain is. ``rewards[y]`` caches
    r(s, a) for the y-th pair state.
    """

    states: tuple[tuple[int, int, int], ...]
    P_Y: np.ndarray
    eta: np.ndarray
    rewards: np.ndarray

    def __post_init__(self):
        for name in ("P_Y", "eta", "rewards"):
            a = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=float))
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    @property
    def n_states(self) -> int:
        return len(self.states)


def build_pair_chain(mdp: Mdp, policy: Policy, chain: PolicyChain) -> PairChain:
    """Enumerate the transition chain and its product-form stationary law."""
    states = [
        (s, a, s2)
        for s in range(mdp.n_states)
        for a in range(mdp.n_actions)
        if policy.probs[s, a] > SUPPORT_EPS
        for s2 in range(mdp.n_states)
        if mdp.transition[s, a, s2] > SUPPORT_EPS
    ]
    n = len(states)
    P_Y = np.zeros((n, n))
    for i, (_, _, s2) in enumerate(states):
        for j, (s, a, s3) in enumerate(states):
            if s == s2:
                P_Y[i, j] = policy.probs[s, a] * mdp.transition[s, a, s3]
    if not check_irreducible(P_Y):
        raise NotIrreducible("pair chain is not irreducible")
    eta = np.array([chain.mu[s] * policy.probs[s, a] * mdp.transition[s, a, s2] for s, a, s2 in states])
    eta = eta / eta.sum()
    rewards = np.array([mdp.reward[s, a] for s, a, _ in states])
    return PairChain(states=tuple(states), P_Y=P_Y, eta=eta, rewards=rewards)


def fundamental_matrix(P_Y: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """Deviation matrix H = (I - P + P*)^{-1} (I - P*) with P* = 1 eta^T.

    H solves the Poisson identity (I - P) H = I - P* and annihilates constant
    vectors (H 1 = 0), which is all the downstream analysis needs.
    """
    P_Y = np.asarray(P_Y, dtype=float)
    eta = np.asarray(eta, dtype=float)
    n = P_Y.shape[0]
    P_star = np.outer(np.ones(n), eta)
    H = np.linalg.solve(np.eye(n) - P_Y + P_star, np.eye(n) - P_star)
    resid = np.abs((np.eye(n) - P_Y) @ H - (np.eye(n) - P_star)).max()
    if resid > POISSON_TOL:
        raise ArithmeticError(f"fundamental matrix residual {resid:.3e} exceeds {POISSON_TOL}")
    return H


def _update_field(pair: PairChain, features: FeatureMap, gamma: float, w: np.ndarray) -> np.ndarray:
    """Stack of per-pair-state TD update directions H(w, y), shape (|Y|, d)."""
    X = features.X
    rows = np.empty((pair.n_states, features.d))
    for i, (s, _, s2) in enumerate(pair.states):
        delta = pair.rewards[i] + gamma * (X[s2] @ w) - (X[s] @ w)
        rows[i] = delta * X[s]
    return rows


def poisson_residual(w: np.ndarray, pair: PairChain, features: FeatureMap, gamma: float) -> float:
    """Max-norm residual of the Poisson equation for the TD update field.

    With nu_w = H H_w the identity nu_w - P nu_w = H_w - 1 (Aw + b)^T is exact
    in exact arithmetic; the returned residual is pure floating-point noise,
    so anything above ~1e-9 indicates a bug.
    """
    w = np.asarray(w, dtype=float)
    X = features.X
    H_w = _update_field(pair, features, gamma, w)
    H_Y = fundamental_matrix(pair.P_Y, pair.eta)
    nu = H_Y @ H_w

    # mean field Aw + b assembled from the pair chain itself
    A = np.zeros((features.d, features.d))
    b = np.zeros(features.d)
    for i, (s, _, s2) in enumerate(pair.states):
        A += pair.eta[i] * np.outer(X[s], gamma * X[s2] - X[s])
        b += pair.eta[i] * pair.rewards[i] * X[s]
    g = A @ w + b
    return float(np.abs(nu - pair.P_Y @ nu - H_w + np.outer(np.ones(pair.n_states), g)).max())


def gamma_projection(w: np.ndarray, features: FeatureMap, D: np.ndarray) -> np.ndarray:
    """Project w onto the row (= column) space of X^T D X; idempotent diagnostic."""
    M = features.X.T @ (np.diag(np.asarray(D, dtype=float))[:, None] * features.X)
    return M @ (pseudo_inverse(M) @ np.asarray(w, dtype=float))


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    detail: str

    def to_json(self) -> dict:
        return {"name": self.name, "pass": self.passed, "detail": self.detail}


@dataclass(frozen=True)
class AssumptionReport:
    checks: tuple[AssumptionCheck, ...]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> list[dict]:
        return [c.to_json() for c in self.checks]


def _symmetric_max_eig(M: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (M + M.T)).max())


def check_assumptions(mdp: Mdp, policy: Policy, features: FeatureMap, schedule) -> AssumptionReport:
    """Numeric pass/fail report for every assumption the convergence analysis uses.

    ``schedule`` is duck-typed (needs ``kind``, ``alpha0``, ``p``) so broken
    fixtures can be fed through without constructing a valid run config.
    """
    checks: list[AssumptionCheck] = []

    kind = getattr(schedule, "kind", None)
    alpha0 = getattr(schedule, "alpha0", None)
    p = getattr(schedule, "p", None)
    lr_ok = kind == "power" and alpha0 is not None and alpha0 > 0 and p is not None and 0.5 < p <= 1.0
    checks.append(
        AssumptionCheck(
            "learning_rate_schedule",
            bool(lr_ok),
            f"kind={kind!r} alpha0={alpha0} p={p}; valid family is power with p in (0.5, 1]",
        )
    )

    P_pi = np.einsum("sa,sat->st", policy.probs, mdp.transition)
    base_irreducible = check_irreducible(P_pi)
    checks.append(
        AssumptionCheck(
            "base_chain_irreducible",
            base_irreducible,
            "support graph strongly connected" if base_irreducible else "support graph not strongly connected",
        )
    )

    if not base_irreducible:
        for name in (
            "pair_chain_irreducible",
            "update_linear_growth",
            "update_field_lipschitz",
            "system_negative_semidefinite",
            "weighted_drift_negative_definite",
        ):
            checks.append(AssumptionCheck(name, False, "not evaluated: base chain not irreducible"))
        return AssumptionReport(checks=tuple(checks))

    from .fixed_points import build_system
    from .markov import induce_chain

    chain = induce_chain(mdp, policy)
    gamma = mdp.discount
    try:
        pair = build_pair_chain(mdp, policy, chain)
        pair_ok, pair_detail = True, f"|Y| = {pair.n_states}"
    except NotIrreducible as exc:  # pragma: no cover - shielded by the base check
        pair, pair_ok, pair_detail = None, False, str(exc)
    checks.append(AssumptionCheck("pair_chain_irreducible", pair_ok, pair_detail))

    X = features.X
    feat_norms = np.linalg.norm(X, axis=1)
    x_max = float(feat_norms.max(initial=0.0))
    if pair is not None:
        k1 = max(
            (
                float(feat_norms[s]) * (abs(float(pair.rewards[i])) + (1.0 + gamma) * x_max)
                for i, (s, _, _) in enumerate(pair.states)
            ),
            default=0.0,
        )
        lips = np.array(
            [feat_norms[s] * np.linalg.norm(gamma * X[s2] - X[s]) for s, _, s2 in pair.states]
        )
        checks.append(
            AssumptionCheck(
                "update_linear_growth",
                np.isfinite(k1),
                f"K1 = {k1:.6g} bounds ||H(w, y)|| / (1 + ||w||)",
            )
        )
        checks.append(
            AssumptionCheck(
                "update_field_lipschitz",
                bool(np.isfinite(lips).all()),
                f"L(y) max = {lips.max(initial=0.0):.6g}, eta-mean = {float(lips @ pair.eta):.6g}",
            )
        )

    sys = build_system(chain, features, gamma)
    a_max = _symmetric_max_eig(sys.A)
    checks.append(
        AssumptionCheck(
            "system_negative_semidefinite",
            a_max <= NSD_TOL,
            f"max eigenvalue of sym(A) = {a_max:.3e}",
        )
    )
    drift_max = _symmetric_max_eig(chain.D @ (gamma * chain.P_pi - np.eye(chain.n_states)))
    checks.append(
        AssumptionCheck(
            "weighted_drift_negative_definite",
            drift_max < 0.0,
            f"max eigenvalue of sym(D(gamma P - I)) = {drift_max:.3e}",
        )
    )
    return AssumptionReport(checks=tuple(checks))
