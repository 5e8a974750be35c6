"""Entropy-regularized policy gradients and KL-constrained natural
gradient steps for softmax policies on tabular MDPs.

The surrogate being ascended at each round is <c, rho_theta> with the frozen
per-step payoff c = r_hat - lam * log pi_old; its gradient is computed
exactly from the occupancy linear solves (default) or estimated from
restart-chain rollouts.  Steps are natural-gradient directions from a
conjugate-gradient solve of the occupancy-weighted softmax Fisher, with a
backtracking line search that enforces the KL bound and surrogate
non-decrease.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import rewards
from .mdp import (SoftmaxPolicy, TabularMdp, causal_entropy,
                  occupancy_from_policy, sample_trajectories,
                  transition_under_policy)

GRAD_NORM_FLOOR = 1e-10


@dataclass(frozen=True)
class StepSchedule:
    """KL budget per round, delta_k = delta0 / k^decay.

    sqrt-summability over rounds (needed for a Cauchy objective trace) holds
    whenever decay > 2.
    """

    delta0: float
    decay: float = 0.0

    def __post_init__(self):
        # delta0 = 0 is the degenerate frozen-policy schedule
        if self.delta0 < 0:
            raise ValueError("delta0 must be >= 0")
        if self.decay < 0:
            raise ValueError("decay must be >= 0")

    def sqrt_sum(self, horizon: int) -> float:
        """Direct partial sum of sqrt(delta_k) up to the horizon."""
        k = np.arange(1, horizon + 1, dtype=np.float64)
        return float(np.sqrt(self.delta0 / k ** self.decay).sum())


def schedule_delta(schedule: StepSchedule, k: int) -> float:
    """KL bound for round k (1-based)."""
    if k < 1:
        raise ValueError("round index must be >= 1")
    return schedule.delta0 / k ** schedule.decay


@dataclass
class PolicyGradientReport:
    """Exact (or sampled) gradient of the frozen-payoff surrogate at the
    current policy, with the diagnostics needed to take a trust-region step."""

    gradient: np.ndarray        # flat over logits, length S*A
    surrogate_value: float
    kl_to_old: float
    entropy: float
    cost: np.ndarray            # frozen per-step payoff c = r_hat - lam*log pi_old

    def __post_init__(self):
        if self.kl_to_old < 0:
            raise ValueError("kl_to_old must be >= 0")


def _as_reward_matrix(reward, mdp: TabularMdp) -> np.ndarray:
    if isinstance(reward, rewards.PotentialModel):
        return rewards.reward_matrix(reward, mdp)
    R = np.asarray(reward, dtype=np.float64)
    if R.shape != (mdp.n_states, mdp.n_actions):
        raise ValueError(f"reward must be (S, A), got {R.shape}")
    return R


def surrogate_value(mdp: TabularMdp, policy: SoftmaxPolicy, cost: np.ndarray) -> float:
    """<c, rho_pi> for a frozen payoff matrix c."""
    return float((occupancy_from_policy(mdp, policy).rho * cost).sum())


def weighted_kl(mdp: TabularMdp, old: SoftmaxPolicy, new: SoftmaxPolicy) -> float:
    """KL(pi_new || pi_old) per state, weighted by the old policy's state
    occupancy."""
    d = occupancy_from_policy(mdp, old).state_marginal()
    per_state = (new.probs * (new.log_probs - old.log_probs)).sum(axis=1)
    return float(d @ per_state)


def entropy_reg_policy_gradient(mdp: TabularMdp, policy: SoftmaxPolicy, reward,
                                lam: float = 0.0, mode: str = "exact",
                                n_traj: int = 256, max_len: int | None = None,
                                seed: int = 0) -> PolicyGradientReport:
    """Gradient of <r_hat - lam*log pi_old, rho_theta> at theta = current.

    `reward` is an (S, A) matrix or a PotentialModel treated as fixed.  Exact
    mode evaluates the policy-gradient identity
        grad[s, a] = d(s) pi(a|s) (Q_c(s, a) - V_c(s))
    with Q_c/V_c from policy-evaluation linear solves; sampled mode uses
    restart-chain rollouts with score-function weighting.
    """
    if lam < 0:
        raise ValueError("lam must be >= 0")
    R = _as_reward_matrix(reward, mdp)
    cost = R - lam * policy.log_probs
    pi = policy.probs
    if mode == "exact":
        rho = occupancy_from_policy(mdp, policy)
        d = rho.state_marginal()
        P_pi = transition_under_policy(mdp, policy)
        c_pi = (pi * cost).sum(axis=1)
        V = np.linalg.solve(np.eye(mdp.n_states) - mdp.gamma * P_pi, c_pi)
        Q = cost + mdp.gamma * np.einsum("sap,p->sa", mdp.transition, V)
        grad = d[:, None] * pi * (Q - V[:, None])
        value = float((rho.rho * cost).sum())
    elif mode == "sampled":
        trajs = sample_trajectories(mdp, policy, n_traj, max_len=max_len, seed=seed)
        grad = np.zeros_like(pi)
        total = 0.0
        for tr in trajs:
            s, a = tr.steps[:, 0], tr.steps[:, 1]
            togo = np.cumsum(cost[s, a][::-1])[::-1]
            total += togo[0]
            # score function of the softmax: e_{s,a} - pi(.|s)
            np.add.at(grad, (s, a), togo)
            np.subtract.at(grad, s, togo[:, None] * pi[s])
        grad *= (1.0 - mdp.gamma) / len(trajs)
        value = (1.0 - mdp.gamma) * total / len(trajs)
    else:
        raise ValueError(f"mode must be 'exact' or 'sampled', got {mode!r}")
    return PolicyGradientReport(gradient=grad.ravel(), surrogate_value=value,
                                kl_to_old=0.0, entropy=causal_entropy(mdp, policy),
                                cost=cost)


def _fisher_matvec(d: np.ndarray, pi: np.ndarray, v: np.ndarray, damping: float) -> np.ndarray:
    """Occupancy-weighted block-diagonal softmax Fisher times a flat vector."""
    V = v.reshape(pi.shape)
    FV = d[:, None] * (pi * V - pi * (pi * V).sum(axis=1, keepdims=True))
    return FV.ravel() + damping * v


def _conjugate_gradient(matvec, b: np.ndarray, iters: int, tol: float = 1e-12) -> np.ndarray:
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs = r @ r
    for _ in range(iters):
        if rs <= tol:
            break
        Ap = matvec(p)
        alpha = rs / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rs_new = r @ r
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x


def kl_constrained_step(mdp: TabularMdp, policy: SoftmaxPolicy,
                        report: PolicyGradientReport, delta: float,
                        cg_iters: int = 50, damping: float = 1e-3,
                        backtrack_coef: float = 0.5, max_backtracks: int = 10) -> SoftmaxPolicy:
    """One trust-region update: natural-gradient direction scaled to the KL
    budget, then backtracking until the measured occupancy-weighted
    KL(new || old) is within delta and the surrogate has not decreased.
    Returns the old policy unchanged when no candidate qualifies, when
    delta = 0, or when the gradient is negligible."""
    if delta < 0:
        raise ValueError("delta must be >= 0")
    g = report.gradient
    if delta == 0.0 or np.linalg.norm(g) < GRAD_NORM_FLOOR:
        return policy
    pi = policy.probs
    d = occupancy_from_policy(mdp, policy).state_marginal()
    v = _conjugate_gradient(lambda u: _fisher_matvec(d, pi, u, damping), g, cg_iters)
    quad = v @ _fisher_matvec(d, pi, v, damping)
    if not np.isfinite(quad) or quad <= 0.0 or not np.all(np.isfinite(v)):
        warnings.warn("Fisher system ill-conditioned; falling back to scaled plain gradient")
        v = g
        quad = v @ _fisher_matvec(d, pi, v, damping)
        if quad <= 0.0:
            return policy
    beta = math.sqrt(2.0 * delta / quad)
    old_value = report.surrogate_value
    step = v.reshape(pi.shape)
    for t in range(max_backtracks + 1):
        candidate = SoftmaxPolicy(policy.logits + (beta * backtrack_coef ** t) * step)
        kl = weighted_kl(mdp, policy, candidate)
        if kl > delta:
            continue
        if surrogate_value(mdp, candidate, report.cost) >= old_value:
            return candidate
    return policy
