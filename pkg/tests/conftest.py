"""Shared fixtures: hand-checkable chains and a reproducible random instance pool."""

import numpy as np
import pytest

import tdlab
from tdlab.generators import cycle, instance_pool, tabular_features, uniform_policy


@pytest.fixture(scope="session")
def two_cycle():
    """Deterministic 2-state cycle, gamma 0.9, zero rewards, uniform policy."""
    mdp = cycle(2, gamma=0.9)
    policy = uniform_policy(mdp)
    chain = tdlab.induce_chain(mdp, policy)
    return mdp, policy, chain


@pytest.fixture(scope="session")
def rank1_system(two_cycle):
    """The all-ones 2x2 feature matrix on the 2-cycle: rank 1, solution line w1 + w2 = 0."""
    _, _, chain = two_cycle
    features = tdlab.FeatureMap.from_matrix(np.ones((2, 2)))
    sys = tdlab.build_system(chain, features, 0.9)
    fps = tdlab.solve_fixed_points(sys, features, chain.D, chain, 0.9)
    return chain, features, sys, fps


@pytest.fixture(scope="session")
def rewarded_cycle():
    """2-cycle with rewards (1, -1): true values are (10/19, -10/19) at gamma 0.9."""
    mdp = cycle(2, gamma=0.9)
    mdp = tdlab.Mdp(transition=mdp.transition, reward=np.array([[1.0], [-1.0]]), discount=0.9)
    policy = tdlab.Policy(probs=np.ones((2, 1)))
    chain = tdlab.induce_chain(mdp, policy)
    return mdp, policy, chain


@pytest.fixture(scope="session")
def small_pool():
    """Reproducible mixed pool for module-level property checks."""
    return instance_pool(40, master_seed=424242)


@pytest.fixture(scope="session")
def self_loop():
    """Single absorbing state with reward 3."""
    mdp = tdlab.Mdp(
        transition=np.ones((1, 1, 1)), reward=np.array([[3.0]]), discount=0.5
    )
    policy = tdlab.Policy(probs=np.ones((1, 1)))
    chain = tdlab.induce_chain(mdp, policy)
    return mdp, policy, chain


def solved(instance):
    """Build (sys, fps) for a generated instance."""
    sys = tdlab.build_system(instance.chain, instance.features, instance.gamma)
    fps = tdlab.solve_fixed_points(
        sys, instance.features, instance.chain.D, instance.chain, instance.gamma
    )
    return sys, fps
