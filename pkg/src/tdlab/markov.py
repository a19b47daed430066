"""Finite MDPs, policy-induced chains, stationary distributions, Bellman operator.

Conventions: ``transition[s, a, s']`` is the probability of moving to ``s'``
after taking action ``a`` in state ``s``; ``reward[s, a]`` is deterministic.
All types are frozen and their arrays are marked read-only, so values can be
shared freely across worker processes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidStochastic, NotIrreducible

ROW_SUM_TOL = 1e-12
STATIONARY_TOL = 1e-10
SUPPORT_EPS = 1e-15


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(a, dtype=float))
    a.flags.writeable = False
    return a


def _check_rows_stochastic(rows: np.ndarray, what: str) -> None:
    if np.any(rows < 0):
        raise InvalidStochastic(f"{what} has negative entries")
    bad = np.abs(rows.sum(axis=-1) - 1.0) > ROW_SUM_TOL
    if np.any(bad):
        idx = tuple(np.argwhere(bad)[0])
        raise InvalidStochastic(f"{what} row {idx} sums to {rows.sum(axis=-1)[bad][0]!r}, not 1")


@dataclass(frozen=True)
class Mdp:
    """Finite MDP with deterministic per-(state, action) rewards."""

    transition: np.ndarray  # (n_states, n_actions, n_states)
    reward: np.ndarray  # (n_states, n_actions)
    discount: float

    def __post_init__(self):
        object.__setattr__(self, "transition", _freeze(self.transition))
        object.__setattr__(self, "reward", _freeze(self.reward))
        if self.transition.ndim != 3 or self.transition.shape[0] != self.transition.shape[2]:
            raise InvalidStochastic("transition must have shape (n_states, n_actions, n_states)")
        if self.reward.shape != self.transition.shape[:2]:
            raise InvalidStochastic("reward table must have shape (n_states, n_actions)")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount must lie in [0, 1), got {self.discount}")
        _check_rows_stochastic(self.transition, "transition")

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]


@dataclass(frozen=True)
class Policy:
    """Stationary stochastic policy, ``probs[s, a]`` = pi(a | s)."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _freeze(self.probs))
        if self.probs.ndim != 2:
            raise InvalidStochastic("policy table must be 2-D")
        _check_rows_stochastic(self.probs, "policy")


@dataclass(frozen=True)
class PolicyChain:
    """Markov chain induced by a fixed policy, with its stationary weighting."""

    P_pi: np.ndarray  # (n, n) row-stochastic
    r_pi: np.ndarray  # (n,) expected one-step reward
    mu: np.ndarray  # (n,) stationary distribution, strictly positive
    D: np.ndarray  # (n, n) diag(mu)

    def __post_init__(self):
        for name in ("P_pi", "r_pi", "mu", "D"):
            object.__setattr__(self, name, _freeze(getattr(self, name)))

    @property
    def n_states(self) -> int:
        return self.P_pi.shape[0]


def check_irreducible(P: np.ndarray) -> bool:
    """True iff the support graph of the row-stochastic matrix P is strongly connected."""
    support = np.asarray(P) > SUPPORT_EPS
    n = support.shape[0]

    def reaches_all(adj: np.ndarray) -> bool:
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        frontier = [0]
        while frontier:
            nxt = adj[frontier].any(axis=0) & ~seen
            seen |= nxt
            frontier = list(np.flatnonzero(nxt))
        return bool(seen.all())

    return reaches_all(support) and reaches_all(support.T)


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Stationary mu of an irreducible row-stochastic P, via the null space of P^T - I.

    SVD-based: the right-singular vector of (P^T - I) with the smallest singular
    value spans the (one-dimensional) stationary space. Works for periodic
    chains, where plain power iteration would oscillate.
    """
    P = np.asarray(P, dtype=float)
    n = P.shape[0]
    _, _, vt = np.linalg.svd(P.T - np.eye(n))
    mu = vt[-1]
    mu = mu / mu.sum()
    if mu.min() <= 0:
        raise NotIrreducible("stationary distribution has non-positive mass; chain not irreducible")
    resid = np.abs(mu @ P - mu).max()
    if resid > STATIONARY_TOL:
        raise NotIrreducible(f"stationary solve residual {resid:.3e} exceeds {STATIONARY_TOL}")
    return mu


def induce_chain(mdp: Mdp, policy: Policy) -> PolicyChain:
    """Collapse an MDP and a policy into the induced state chain.

    Raises NotIrreducible when the induced chain has unreachable states or
    more than one closed communicating class.
    """
    if policy.probs.shape != (mdp.n_states, mdp.n_actions):
        raise InvalidStochastic(
            f"policy shape {policy.probs.shape} does not match MDP ({mdp.n_states}, {mdp.n_actions})"
        )
    P_pi = np.einsum("sa,sat->st", policy.probs, mdp.transition)
    r_pi = np.einsum("sa,sa->s", policy.probs, mdp.reward)
    if not check_irreducible(P_pi):
        raise NotIrreducible("policy-induced chain is not irreducible")
    mu = stationary_distribution(P_pi)
    return PolicyChain(P_pi=P_pi, r_pi=r_pi, mu=mu, D=np.diag(mu))


def bellman_apply(chain: PolicyChain, gamma: float, v: np.ndarray) -> np.ndarray:
    """One application of the Bellman operator: r_pi + gamma * P_pi v."""
    v = np.asarray(v, dtype=float)
    if v.shape != (chain.n_states,):
        raise ValueError(f"value vector has shape {v.shape}, expected ({chain.n_states},)")
    return chain.r_pi + gamma * (chain.P_pi @ v)


def true_value(chain: PolicyChain, gamma: float) -> np.ndarray:
    """Exact state values: the unique solution of (I - gamma P_pi) v = r_pi."""
    n = chain.n_states
    v = np.linalg.solve(np.eye(n) - gamma * chain.P_pi, chain.r_pi)
    resid = np.abs(bellman_apply(chain, gamma, v) - v).max()
    if resid > STATIONARY_TOL:
        raise ArithmeticError(f"value solve residual {resid:.3e} exceeds {STATIONARY_TOL}")
    return v
