"""Desk-scale environments, expert generation and the evaluation protocol.

Environments are small tabular MDPs whose embeddings are scaled coordinates
concatenated with one-hot actions.  Experts come from soft value iteration
on the true reward; demonstrations are fixed-length rollouts (about 50
state-action pairs each).  Evaluation averages cumulative true reward over
restart-chain episodes and rescales it so the expert scores 1.0 and a
random policy 0.0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdp import (SoftmaxPolicy, TabularMdp, Trajectory, default_max_len,
                  soft_value_iteration, _row_categorical)

_GRID_MOVES = np.array([(-1, 0), (1, 0), (0, -1), (0, 1)])   # up, down, left, right


def _one_hot(n: int) -> np.ndarray:
    return np.eye(n)


def _grid_coords(n_rows: int, n_cols: int) -> np.ndarray:
    rr, cc = np.divmod(np.arange(n_rows * n_cols), n_cols)
    return np.stack([rr / max(n_rows - 1, 1), cc / max(n_cols - 1, 1)], axis=1)


def _grid_step(r, c, move, n_rows, n_cols):
    nr, nc = r + move[0], c + move[1]
    if 0 <= nr < n_rows and 0 <= nc < n_cols:
        return nr, nc
    return r, c


def make_gridworld(n: int = 5, goal: int | None = None, step_cost: float = 0.0,
                   slip: float = 0.0, gamma: float = 0.95,
                   goal_reward: float = 1.0) -> TabularMdp:
    """n x n grid, 4 moves, walls bounce back.  The goal cell is absorbing
    and pays goal_reward every step; all other cells pay step_cost.  With
    slip > 0 the move goes in one of the three other directions instead,
    each with probability slip/3."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= slip <= 1.0:
        raise ValueError("slip must lie in [0, 1]")
    S, A = n * n, 4
    goal = S - 1 if goal is None else int(goal)
    if not 0 <= goal < S:
        raise ValueError(f"goal must be a state index < {S}")
    P = np.zeros((S, A, S))
    for s in range(S):
        r, c = divmod(s, n)
        for a in range(A):
            if s == goal:
                P[s, a, s] = 1.0
                continue
            for b in range(A):
                p = (1.0 - slip) if b == a else slip / 3.0
                if p == 0.0:
                    continue
                nr, nc = _grid_step(r, c, _GRID_MOVES[b], n, n)
                P[s, a, nr * n + nc] += p
    R = np.full((S, A), step_cost)
    R[goal, :] = goal_reward
    return TabularMdp(transition=P, start=np.full(S, 1.0 / S), gamma=gamma,
                      state_embed=_grid_coords(n, n), action_embed=_one_hot(A),
                      true_reward=R)


def make_chain(n: int = 8, gamma: float = 0.9) -> TabularMdp:
    """Line of n cells with left/right moves (walls bounce); the last cell
    pays 1 and is absorbing.  Start mass concentrates on cell 0."""
    if n < 2:
        raise ValueError("n must be >= 2")
    S, A = n, 2
    P = np.zeros((S, A, S))
    for s in range(S - 1):
        P[s, 0, max(s - 1, 0)] = 1.0
        P[s, 1, s + 1] = 1.0
    P[S - 1, :, S - 1] = 1.0
    R = np.zeros((S, A))
    R[S - 1, :] = 1.0
    eps = 1e-6
    mu0 = np.full(S, eps)
    mu0[0] = 1.0 - eps * (S - 1)
    pos = (np.arange(S) / (S - 1))[:, None]
    return TabularMdp(transition=P, start=mu0, gamma=gamma,
                      state_embed=pos, action_embed=_one_hot(A), true_reward=R)


def make_cliff(n_x: int = 6, n_y: int = 3, gamma: float = 0.95) -> TabularMdp:
    """Cliff walk on an n_y x n_x grid plus a zero-reward absorbing terminal.

    The bottom row between start (bottom-left) and goal (bottom-right) is
    the cliff: entering it pays -1 and teleports to the start.  Reaching the
    goal pays +1 once, then the episode ends in the terminal state."""
    if n_x < 3 or n_y < 2:
        raise ValueError("need n_x >= 3 and n_y >= 2")
    S = n_x * n_y + 1
    A = 4
    term = S - 1
    start_cell = (n_y - 1) * n_x
    goal_cell = n_y * n_x - 1
    cliff = set(range(start_cell + 1, goal_cell))
    P = np.zeros((S, A, S))
    R = np.full((S, A), -0.01)
    for s in range(n_x * n_y):
        r, c = divmod(s, n_x)
        for a in range(A):
            if s == goal_cell:
                P[s, a, term] = 1.0
                R[s, a] = 1.0
                continue
            if s in cliff:
                P[s, a, start_cell] = 1.0
                R[s, a] = -1.0
                continue
            nr, nc = _grid_step(r, c, _GRID_MOVES[a], n_y, n_x)
            P[s, a, nr * n_x + nc] = 1.0
    P[term, :, term] = 1.0
    R[term, :] = 0.0
    eps = 1e-6
    mu0 = np.full(S, eps)
    mu0[start_cell] = 1.0 - eps * (S - 1)
    coords = np.vstack([_grid_coords(n_y, n_x), [[1.25, 1.25]]])   # terminal sits off-grid
    return TabularMdp(transition=P, start=mu0, gamma=gamma,
                      state_embed=coords, action_embed=_one_hot(A), true_reward=R)


def make_mountain_car(n_pos: int = 12, n_vel: int = 9, gamma: float = 0.99,
                      substeps: int = 15) -> TabularMdp:
    """Discretized mountain car on an n_pos x n_vel grid of (position,
    velocity) cells with 3 thrust actions; crossing the goal position ends
    the episode in a zero-reward absorbing state, every other step pays
    -0.01.  Each decision integrates `substeps` physics steps so momentum
    changes cross cell boundaries despite the coarse grid."""
    if n_pos < 2 or n_vel < 2:
        raise ValueError("need n_pos >= 2 and n_vel >= 2")
    pos = np.linspace(-1.2, 0.6, n_pos)
    vel = np.linspace(-0.07, 0.07, n_vel)
    S = n_pos * n_vel + 1
    A = 3
    term = S - 1
    P = np.zeros((S, A, S))
    R = np.full((S, A), -0.01)
    for i in range(n_pos):
        for j in range(n_vel):
            s = i * n_vel + j
            for a in range(A):
                p, v = pos[i], vel[j]
                done = False
                for _ in range(substeps):
                    v = np.clip(v + 0.001 * (a - 1) - 0.0025 * np.cos(3 * p), -0.07, 0.07)
                    p = np.clip(p + v, -1.2, 0.6)
                    if p <= -1.2:
                        v = 0.0   # left wall stops the car
                    if p >= 0.5:
                        done = True
                        break
                if done:
                    P[s, a, term] = 1.0
                    continue
                i2 = int(np.abs(pos - p).argmin())
                j2 = int(np.abs(vel - v).argmin())
                P[s, a, i2 * n_vel + j2] = 1.0
    P[term, :, term] = 1.0
    R[term, :] = 0.0
    start_cell = int(np.abs(pos + 0.5).argmin()) * n_vel + int(np.abs(vel).argmin())
    eps = 1e-7
    mu0 = np.full(S, eps)
    mu0[start_cell] = 1.0 - eps * (S - 1)
    pn = (pos - pos.min()) / (pos.max() - pos.min())
    vn = (vel - vel.min()) / (vel.max() - vel.min())
    coords = np.array([[pn[i], vn[j]] for i in range(n_pos) for j in range(n_vel)]
                      + [[1.2, 0.5]])   # terminal sits just past the goal edge
    return TabularMdp(transition=P, start=mu0, gamma=gamma,
                      state_embed=coords, action_embed=_one_hot(A), true_reward=R)


_BUILDERS = {
    "gridworld": make_gridworld,
    "chain": make_chain,
    "cliff": make_cliff,
    "mountain_car": make_mountain_car,
}


def build_environment(spec: dict) -> TabularMdp:
    """Build a TabularMdp from {"name": ..., **params}."""
    if not isinstance(spec, dict) or "name" not in spec:
        raise ValueError("environment spec must be a dict with a 'name' key")
    params = {k: v for k, v in spec.items() if k != "name"}
    try:
        builder = _BUILDERS[spec["name"]]
    except KeyError:
        raise ValueError(f"unknown environment {spec['name']!r}; "
                         f"available: {sorted(_BUILDERS)}") from None
    return builder(**params)


def rollout_fixed(mdp: TabularMdp, policy: SoftmaxPolicy, n: int, length: int,
                  seed: int = 0) -> list[Trajectory]:
    """Plain chain rollouts of exactly `length` steps (no geometric restart),
    the way demonstrations are collected."""
    rng = np.random.default_rng(seed)
    pi = policy.probs
    out = []
    for _ in range(n):
        steps = np.zeros((length, 2), dtype=np.int64)
        s = int(_row_categorical(mdp.start[None, :], rng)[0])
        for t in range(length):
            a = int(_row_categorical(pi[s][None, :], rng)[0])
            steps[t] = (s, a)
            s = int(_row_categorical(mdp.transition[s, a][None, :], rng)[0])
        out.append(Trajectory(steps, terminated_by_restart=False))
    return out


def make_expert(mdp: TabularMdp, lambda_expert: float = 0.01, n_traj: int = 1,
                traj_len: int = 50, seed: int = 0):
    """Soft-value-iteration expert on the true reward plus seeded
    fixed-length demonstrations.  Returns (expert_policy, demonstrations)."""
    if mdp.true_reward is None:
        raise ValueError("make_expert needs an MDP with a true reward")
    if n_traj < 1 or traj_len < 1:
        raise ValueError("n_traj and traj_len must be >= 1")
    expert = soft_value_iteration(mdp, mdp.true_reward, lam=lambda_expert)
    demos = rollout_fixed(mdp, expert, n_traj, traj_len, seed=seed)
    return expert, demos


@dataclass(frozen=True)
class EvalResult:
    """Cumulative-true-reward statistics with the affine rescaling that maps
    the random-policy reference to 0 and the expert reference to 1."""

    mean: float
    std: float
    scaled: float


def episode_returns(mdp: TabularMdp, policy: SoftmaxPolicy, n: int,
                    seed: int = 0) -> np.ndarray:
    """Per-trajectory discounted sums of true reward over fixed-horizon
    rollouts.  The horizon is long enough that the truncated tail is below
    1e-6, so the mean estimates <r, rho>/(1-gamma); fixing the length keeps
    the variance far below that of geometric-restart episodes."""
    if mdp.true_reward is None:
        raise ValueError("evaluation needs an MDP with a true reward")
    horizon = default_max_len(mdp.gamma)
    rng = np.random.default_rng(seed)
    pi_cum = policy.probs.cumsum(axis=1)
    P_cum = mdp.transition.cumsum(axis=2)
    s = np.searchsorted(mdp.start.cumsum(), rng.random(n))
    returns = np.zeros(n)
    disc = 1.0
    for _ in range(horizon):
        a = (pi_cum[s] < rng.random(n)[:, None]).sum(axis=1)
        a = np.minimum(a, mdp.n_actions - 1)
        returns += disc * mdp.true_reward[s, a]
        disc *= mdp.gamma
        s = np.minimum((P_cum[s, a] < rng.random(n)[:, None]).sum(axis=1),
                       mdp.n_states - 1)
    return returns


def reference_returns(mdp: TabularMdp, expert_policy: SoftmaxPolicy,
                      n_ref: int = 500, seed: int = 0):
    """Expert and random-policy reference means under the same protocol."""
    expert_ref = float(episode_returns(mdp, expert_policy, n_ref, seed=seed).mean())
    random_policy = SoftmaxPolicy.uniform(mdp.n_states, mdp.n_actions)
    random_ref = float(episode_returns(mdp, random_policy, n_ref, seed=seed + 1).mean())
    return expert_ref, random_ref


def evaluate(mdp: TabularMdp, policy: SoftmaxPolicy, n_eval: int = 500,
             seed: int = 0, expert_ref: float = 1.0, random_ref: float = 0.0) -> EvalResult:
    """Monte-Carlo evaluation over n_eval episodes; scaled score is
    (mean - random_ref) / (expert_ref - random_ref)."""
    if abs(expert_ref - random_ref) < 1e-12:
        raise ValueError("degenerate scaling: expert and random references coincide")
    returns = episode_returns(mdp, policy, n_eval, seed=seed)
    mean = float(returns.mean())
    return EvalResult(mean=mean, std=float(returns.std(ddof=1)) if n_eval > 1 else 0.0,
                      scaled=(mean - random_ref) / (expert_ref - random_ref))
