import numpy as np
import pytest

from wail import TabularMdp


def random_mdp(n_states, n_actions, gamma, seed, with_reward=False):
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    mu0 = rng.dirichlet(np.ones(n_states)) + 0.05
    mu0 /= mu0.sum()
    return TabularMdp(
        transition=P, start=mu0, gamma=gamma,
        state_embed=rng.normal(size=(n_states, 2)),
        action_embed=np.eye(n_actions),
        true_reward=rng.normal(size=(n_states, n_actions)) if with_reward else None,
    )


def two_state_chain(gamma=0.5):
    """Deterministic 0 -> 1 -> 1 with start mass (almost) all on state 0."""
    P = np.zeros((2, 1, 2))
    P[0, 0, 1] = 1.0
    P[1, 0, 1] = 1.0
    eps = 1e-12
    return TabularMdp(transition=P, start=[1.0 - eps, eps], gamma=gamma,
                      state_embed=[[0.0], [1.0]], action_embed=[[1.0]])


@pytest.fixture
def rng():
    return np.random.default_rng(0)
