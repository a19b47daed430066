"""Named generators for MDPs, policies, and feature matrices.

These back the JSON config surface (``cycle(4)``, ``duplicate_columns(tabular, 1)``,
...) and the randomized instance pools used by the verification suite. Rank
deficiency is a first-class citizen here: duplicated blocks, zero columns,
padded columns, and factor-product matrices of prescribed rank.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import FeatureMap
from .markov import Mdp, Policy, PolicyChain, induce_chain


def cycle(n: int, gamma: float = 0.9) -> Mdp:
    """Deterministic n-state cycle with a single action and zero rewards."""
    if n < 1:
        raise ValueError("cycle needs at least one state")
    transition = np.zeros((n, 1, n))
    for s in range(n):
        transition[s, 0, (s + 1) % n] = 1.0
    return Mdp(transition=transition, reward=np.zeros((n, 1)), discount=gamma)


def random_walk(n: int, gamma: float = 0.9) -> Mdp:
    """Reflecting random walk on a line: half left, half right, +/-1 reward at the ends."""
    if n < 2:
        raise ValueError("random walk needs at least two states")
    transition = np.zeros((n, 1, n))
    for s in range(n):
        transition[s, 0, max(s - 1, 0)] += 0.5
        transition[s, 0, min(s + 1, n - 1)] += 0.5
    reward = np.zeros((n, 1))
    reward[0, 0] = -1.0
    reward[n - 1, 0] = 1.0
    return Mdp(transition=transition, reward=reward, discount=gamma)


def random_mdp(n: int, n_actions: int, seed: int, gamma: float = 0.9) -> Mdp:
    """Dense random MDP: Dirichlet transition rows (hence irreducible), rewards in [-1, 1]."""
    rng = np.random.default_rng(seed)
    transition = rng.dirichlet(np.ones(n), size=(n, n_actions))
    reward = rng.uniform(-1.0, 1.0, size=(n, n_actions))
    return Mdp(transition=transition, reward=reward, discount=gamma)


def uniform_policy(mdp: Mdp) -> Policy:
    return Policy(probs=np.full((mdp.n_states, mdp.n_actions), 1.0 / mdp.n_actions))


def random_policy(mdp: Mdp, seed: int) -> Policy:
    rng = np.random.default_rng(seed)
    return Policy(probs=rng.dirichlet(np.ones(mdp.n_actions), size=mdp.n_states))


def tabular_features(n_states: int) -> FeatureMap:
    return FeatureMap.from_matrix(np.eye(n_states))


def duplicate_columns(base: FeatureMap, k: int) -> FeatureMap:
    """Append k extra copies of the whole feature block (rank unchanged)."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    return FeatureMap.from_matrix(np.hstack([base.X] * (k + 1)))


def zero_pad(base: FeatureMap, k: int) -> FeatureMap:
    """Append k all-zero feature columns (rank unchanged)."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    return FeatureMap.from_matrix(np.hstack([base.X, np.zeros((base.n_states, k))]))


def random_rank_features(n_states: int, rank: int, d: int, seed: int) -> FeatureMap:
    """Gaussian factor product with prescribed rank min(rank, n_states, d)."""
    r = min(rank, n_states, d)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n_states, r)) @ rng.standard_normal((r, d)) if r > 0 else np.zeros((n_states, d))
    return FeatureMap.from_matrix(X)


def zero_features(n_states: int, d: int) -> FeatureMap:
    return FeatureMap.from_matrix(np.zeros((n_states, d)))


@dataclass(frozen=True)
class Instance:
    """A fully assembled desk-scale problem: MDP, policy, chain, features, discount."""

    mdp: Mdp
    policy: Policy
    chain: PolicyChain
    features: FeatureMap
    gamma: float
    label: str


FEATURE_KINDS = ("tabular", "duplicated", "random_rank", "zero", "zero_padded")
GAMMA_CHOICES = (0.5, 0.9, 0.99)


def random_instance(seed: int) -> Instance:
    """Draw one random instance mixing chain shapes, feature ranks, and discounts.

    Coverage targets: 2..8 states, 1..3 actions, feature width 1..12, feature
    kinds spanning full rank, duplicated blocks, low-rank factors, zero
    matrices, and zero-padded blocks.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    n_actions = int(rng.integers(1, 4))
    gamma = float(GAMMA_CHOICES[rng.integers(0, len(GAMMA_CHOICES))])

    mdp_kind = rng.integers(0, 3)
    if mdp_kind == 0:
        mdp = cycle(n, gamma)
    elif mdp_kind == 1:
        mdp = random_walk(n, gamma)
    else:
        mdp = random_mdp(n, n_actions, int(rng.integers(0, 2**32)), gamma)
    policy = (
        uniform_policy(mdp)
        if rng.integers(0, 2) == 0
        else random_policy(mdp, int(rng.integers(0, 2**32)))
    )
    chain = induce_chain(mdp, policy)

    kind = FEATURE_KINDS[rng.integers(0, len(FEATURE_KINDS))]
    if kind == "tabular":
        features = tabular_features(n)
    elif kind == "duplicated":
        copies = 1 if 2 * n <= 12 else 0
        features = duplicate_columns(tabular_features(n), copies)
    elif kind == "random_rank":
        d = int(rng.integers(1, 13))
        rank = int(rng.integers(1, min(n, d) + 1))
        features = random_rank_features(n, rank, d, int(rng.integers(0, 2**32)))
    elif kind == "zero":
        features = zero_features(n, int(rng.integers(1, 13)))
    else:
        pad = int(rng.integers(1, max(2, 13 - n)))
        features = zero_pad(tabular_features(n), pad)

    label = f"seed={seed} n={n} a={mdp.n_actions} kind={kind} gamma={gamma} d={features.d} rank={features.rank}"
    return Instance(mdp=mdp, policy=policy, chain=chain, features=features, gamma=gamma, label=label)


def instance_pool(count: int, master_seed: int) -> list[Instance]:
    """A reproducible pool of random instances (seeds derived from the master seed)."""
    root = np.random.SeedSequence(master_seed)
    return [random_instance(int(child.generate_state(1)[0])) for child in root.spawn(count)]
