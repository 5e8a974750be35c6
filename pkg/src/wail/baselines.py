"""Comparison baselines sharing the policy-optimization stack.

GAIL trains a discriminator D(s, a) by ascending
    E_expert[log(1 - D)] + E_policy[log D]
and feeds the policy the surrogate reward -log D; behavior cloning fits the
policy to demonstrated pairs by maximum likelihood with no environment
interaction.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from . import rewards
from .config import RunConfig
from .mdp import SoftmaxPolicy, TabularMdp, state_action_embeddings
from .training import (ExpertData, RunLog, WailState, _expert_batch,
                       _maybe_checkpoint, _maybe_eval, _policy_batch,
                       _should_stop, TrainingDiverged)
from .trust_region import (StepSchedule, entropy_reg_policy_gradient,
                           kl_constrained_step, schedule_delta, weighted_kl)

PROB_CLAMP = 1e-6


@dataclass
class Discriminator:
    """Classifier D(s, a) = sigmoid(f(s, a)) with the same parametric forms
    as the reward models; outputs are clamped to [1e-6, 1 - 1e-6]."""

    logit: rewards.PotentialModel


def create_discriminator(form: str, dims: tuple, seed: int = 0) -> Discriminator:
    return Discriminator(rewards.create_model(form, dims, seed))


def disc_values(disc: Discriminator, indices, embeds) -> np.ndarray:
    f = rewards.support_values(disc.logit, indices, embeds)
    return np.clip(1.0 / (1.0 + np.exp(-f)), PROB_CLAMP, 1.0 - PROB_CLAMP)


@dataclass(frozen=True)
class SampleBatch:
    """Weighted support points of one side of the discriminator objective."""

    indices: np.ndarray
    embeds: np.ndarray
    weights: np.ndarray

    @classmethod
    def from_flat(cls, flat_indices, weights, embed_table) -> "SampleBatch":
        idx = np.asarray(flat_indices, dtype=np.int64)
        w = np.asarray(weights, dtype=np.float64)
        if idx.size == 0:
            raise ValueError("batch must be non-empty")
        return cls(idx, embed_table[idx], w / w.sum())


def gail_objective(disc: Discriminator, expert_batch: SampleBatch,
                   policy_batch: SampleBatch) -> float:
    """E_expert[log(1 - D)] + E_policy[log D] at the current parameters."""
    d_e = disc_values(disc, expert_batch.indices, expert_batch.embeds)
    d_p = disc_values(disc, policy_batch.indices, policy_batch.embeds)
    return float(expert_batch.weights @ np.log(1.0 - d_e)
                 + policy_batch.weights @ np.log(d_p))


def gail_discriminator_step(disc: Discriminator, expert_batch: SampleBatch,
                            policy_batch: SampleBatch, lr: float) -> Discriminator:
    """One ascent step of the discriminator objective.  The gradient uses
    the exact sigmoid derivatives (d/df log D = 1 - D on the policy side,
    d/df log(1 - D) = -D on the expert side)."""
    if lr <= 0:
        raise ValueError("lr must be > 0")
    d_e = disc_values(disc, expert_batch.indices, expert_batch.embeds)
    d_p = disc_values(disc, policy_batch.indices, policy_batch.embeds)
    grad = (rewards.accumulate_param_grad(disc.logit, expert_batch.indices,
                                          expert_batch.embeds, -expert_batch.weights * d_e)
            + rewards.accumulate_param_grad(disc.logit, policy_batch.indices,
                                            policy_batch.embeds, policy_batch.weights * (1.0 - d_p)))
    new = disc.logit.copy()
    new.params = new.params + lr * grad
    return Discriminator(new)


def gail_surrogate_reward(disc: Discriminator, x) -> float:
    """-log D for one input (index for tabular, embedding otherwise)."""
    if disc.logit.form == "tabular":
        d = disc_values(disc, np.asarray([int(x)]), None)
    else:
        d = disc_values(disc, None, np.asarray(x, dtype=np.float64)[None, :])
    return float(-np.log(d[0]))


def gail_reward_matrix(disc: Discriminator, mdp: TabularMdp) -> np.ndarray:
    """-log D over the full S x A index set."""
    S, A = mdp.n_states, mdp.n_actions
    if disc.logit.form == "tabular":
        d = disc_values(disc, np.arange(S * A), None)
    else:
        d = disc_values(disc, None, state_action_embeddings(mdp))
    return (-np.log(d)).reshape(S, A)


def train_gail(mdp: TabularMdp, expert_data, config: RunConfig, eval_ctx=None):
    """Adversarial loop with the discriminator step in place of the OT
    reward ascent; the policy maximizes -log D under the same KL-constrained
    natural-gradient updates.  Returns (policy, discriminator, log)."""
    config.validate()
    expert = ExpertData.from_any(expert_data, mdp)
    schedule = StepSchedule(config.delta0, config.delta_decay)
    S, A = mdp.n_states, mdp.n_actions
    embed_table = state_action_embeddings(mdp)
    dims = ((S * A,) if config.model_form == "tabular"
            else (embed_table.shape[1],) if config.model_form == "linear"
            else (embed_table.shape[1], *config.mlp_hidden))
    disc = create_discriminator(config.model_form, dims, config.seed)
    state = WailState(k=0, model=disc.logit, policy=SoftmaxPolicy.uniform(S, A),
                      trace=[], schedule=schedule, l1=config.l1, l2=config.l2)
    log = RunLog(meta={"algorithm": "gail", "config": config.to_dict(),
                       "n_states": S, "n_actions": A})
    for _ in range(config.k_max):
        rng = np.random.default_rng([config.seed, state.k, 0x6A11])
        src_idx, src_w = _policy_batch(state, mdp, config, rng)
        tgt_idx, tgt_w = _expert_batch(expert, mdp, config, rng)
        policy_batch = SampleBatch.from_flat(src_idx, src_w, embed_table)
        expert_batch = SampleBatch.from_flat(tgt_idx, tgt_w, embed_table)
        for _ in range(config.disc_inner_steps):
            disc = gail_discriminator_step(disc, expert_batch, policy_batch, config.disc_lr)
        objective = gail_objective(disc, expert_batch, policy_batch)
        if not np.isfinite(objective):
            log.meta["diverged"] = f"discriminator objective diverged at round {state.k}"
            if config.out_dir:
                log.save(config.out_dir)
            raise TrainingDiverged(log.meta["diverged"], log)
        surrogate = gail_reward_matrix(disc, mdp)
        report = entropy_reg_policy_gradient(mdp, state.policy, surrogate,
                                             lam=config.lambda_entropy, mode=config.pg_mode,
                                             seed=int(rng.integers(0, 2 ** 63 - 1)))
        delta = schedule_delta(schedule, state.k + 1)
        new_policy = kl_constrained_step(mdp, state.policy, report, delta,
                                         damping=config.cg_damping)
        state = WailState(k=state.k + 1, model=disc.logit, policy=new_policy,
                          trace=state.trace + [objective], schedule=schedule,
                          l1=config.l1, l2=config.l2,
                          last_kl=weighted_kl(mdp, state.policy, new_policy),
                          last_surrogate=report.surrogate_value,
                          last_entropy=report.entropy)
        log.append(iteration=state.k, objective=objective,
                   policy_surrogate=state.last_surrogate, kl_step=state.last_kl,
                   entropy=state.last_entropy,
                   scaled_perf_eval=_maybe_eval(mdp, state.policy, config, eval_ctx, state.k - 1))
        _maybe_checkpoint(state, config)
        if _should_stop(state.trace, config.early_stop_window, config.early_stop_tol):
            log.meta["early_stop_iteration"] = state.k
            break
    log.meta["iterations_run"] = state.k
    if config.out_dir:
        log.save(config.out_dir)
        rewards.save_model(os.path.join(config.out_dir, "discriminator_final.json"), disc.logit)
        with open(os.path.join(config.out_dir, "policy_final.json"), "w") as fh:
            json.dump({"logits": state.policy.logits.tolist()}, fh)
    return state.policy, disc, log


def train_bc(expert_data, config: RunConfig, n_states: int | None = None,
             n_actions: int | None = None, mdp: TabularMdp | None = None) -> SoftmaxPolicy:
    """Behavior cloning: full-batch gradient ascent on the demonstration
    log-likelihood (per-state averaged), from zero logits so unvisited
    states keep the uniform policy."""
    if mdp is not None:
        n_states, n_actions = mdp.n_states, mdp.n_actions
        expert = ExpertData.from_any(expert_data, mdp)
        counts = expert.weights.reshape(n_states, n_actions)
    else:
        if n_states is None or n_actions is None:
            raise ValueError("need an MDP or explicit n_states/n_actions")
        pairs = np.asarray(expert_data, dtype=np.int64)
        if pairs.ndim != 2 or pairs.shape[1] != 2 or pairs.shape[0] == 0:
            raise ValueError("expert data must be a non-empty (k, 2) array")
        counts = np.zeros((n_states, n_actions))
        np.add.at(counts, (pairs[:, 0], pairs[:, 1]), 1.0)
    visited = counts.sum(axis=1) > 0
    freq = counts[visited] / counts[visited].sum(axis=1, keepdims=True)
    theta = np.zeros((n_states, n_actions))
    block = theta[visited]
    for _ in range(config.bc_steps):
        z = block - block.max(axis=1, keepdims=True)
        e = np.exp(z)
        pi = e / e.sum(axis=1, keepdims=True)
        block = block + config.bc_lr * (freq - pi)
    theta[visited] = block - block.max(axis=1, keepdims=True)
    return SoftmaxPolicy(theta)
