import math

import numpy as np

import wail
from wail import RunConfig, SoftmaxPolicy
from wail.baselines import (Discriminator, SampleBatch, create_discriminator,
                            disc_values, gail_discriminator_step,
                            gail_objective, gail_reward_matrix,
                            gail_surrogate_reward, train_bc, train_gail)
from wail.rewards import accumulate_param_grad

from conftest import random_mdp


def embed_table(n, dim, seed=0):
    return np.random.default_rng(seed).normal(size=(n, dim))


def batch_of(indices, table, weights=None):
    idx = np.asarray(indices)
    w = np.full(idx.size, 1.0 / idx.size) if weights is None else np.asarray(weights)
    return SampleBatch(idx, table[idx], w)


class TestDiscriminatorObjective:
    def test_constant_half_discriminator(self):
        disc = create_discriminator("tabular", (4,), seed=0)   # zero logits -> D = 0.5
        table = embed_table(4, 2)
        eb = batch_of([0, 1], table)
        pb = batch_of([2, 3], table)
        assert abs(gail_objective(disc, eb, pb) - 2 * math.log(0.5)) < 1e-12

    def test_identical_batches_stationary_at_half(self):
        disc = create_discriminator("tabular", (4,), seed=0)
        table = embed_table(4, 2)
        b = batch_of([0, 1, 2], table)
        d = disc_values(disc, b.indices, b.embeds)
        grad = (accumulate_param_grad(disc.logit, b.indices, b.embeds, -b.weights * d)
                + accumulate_param_grad(disc.logit, b.indices, b.embeds, b.weights * (1 - d)))
        assert np.abs(grad).max() < 1e-15

    def test_separable_batches_saturate(self):
        disc = create_discriminator("tabular", (6,), seed=0)
        table = embed_table(6, 2)
        eb = batch_of([0, 1, 2], table)
        pb = batch_of([3, 4, 5], table)
        for _ in range(10_000):
            disc = gail_discriminator_step(disc, eb, pb, lr=1.0)
        d_policy = disc_values(disc, pb.indices, pb.embeds)
        d_expert = disc_values(disc, eb.indices, eb.embeds)
        assert np.all(d_policy >= 0.99)
        assert np.all(d_expert <= 0.01)

    def test_loss_increases_under_ascent(self):
        disc = create_discriminator("mlp", (3, 6, 5), seed=1)
        table = embed_table(8, 3, seed=2)
        eb = batch_of([0, 1, 2, 3], table)
        pb = batch_of([4, 5, 6, 7], table)
        before = gail_objective(disc, eb, pb)
        for _ in range(200):
            disc = gail_discriminator_step(disc, eb, pb, lr=0.05)
        assert gail_objective(disc, eb, pb) > before

    def test_gradient_matches_finite_differences(self, rng):
        h = 1e-5
        for t in range(30):
            form, dims = (("tabular", (6,)) if t % 2 else ("mlp", (3, 5, 4)))
            disc = create_discriminator(form, dims, seed=t)
            disc.logit.params = rng.normal(size=disc.logit.params.size) * 0.5
            table = embed_table(6, 3, seed=t)
            eb = batch_of(rng.integers(0, 6, size=4), table)
            pb = batch_of(rng.integers(0, 6, size=5), table)
            d_e = disc_values(disc, eb.indices, eb.embeds)
            d_p = disc_values(disc, pb.indices, pb.embeds)
            g = (accumulate_param_grad(disc.logit, eb.indices, eb.embeds, -eb.weights * d_e)
                 + accumulate_param_grad(disc.logit, pb.indices, pb.embeds, pb.weights * (1 - d_p)))
            num = np.zeros_like(g)
            for i in range(g.size):
                up = Discriminator(disc.logit.copy()); up.logit.params[i] += h
                dn = Discriminator(disc.logit.copy()); dn.logit.params[i] -= h
                num[i] = (gail_objective(up, eb, pb) - gail_objective(dn, eb, pb)) / (2 * h)
            rel = np.abs(g - num).max() / (np.abs(num).max() + 1e-12)
            assert rel <= 1e-4


class TestSurrogateReward:
    def test_half(self):
        disc = create_discriminator("tabular", (2,), seed=0)
        assert abs(gail_surrogate_reward(disc, 0) - math.log(2)) < 1e-12

    def test_clamped_high(self):
        disc = create_discriminator("tabular", (2,), seed=0)
        disc.logit.params[:] = 200.0
        assert abs(gail_surrogate_reward(disc, 0) + math.log(1 - 1e-6)) < 1e-9

    def test_clamped_low(self):
        disc = create_discriminator("tabular", (2,), seed=0)
        disc.logit.params[:] = -200.0
        assert abs(gail_surrogate_reward(disc, 0) - math.log(1e6)) < 1e-9

    def test_outputs_strictly_inside_unit_interval(self, rng):
        disc = create_discriminator("tabular", (5,), seed=0)
        disc.logit.params = rng.normal(size=5) * 500
        d = disc_values(disc, np.arange(5), None)
        assert np.all(d > 0) and np.all(d < 1)


class TestEquilibriumDegeneracy:
    def test_same_measure_batches_concentrate_at_half(self, rng):
        # Policy and expert batches drawn from one measure and the
        # discriminator trained to its optimum: -log D collapses to -log 0.5.
        table = embed_table(8, 3, seed=5)
        w = rng.dirichlet(np.ones(8))
        eb = batch_of(np.arange(8), table, w)
        pb = batch_of(np.arange(8), table, w)
        disc = create_discriminator("tabular", (8,), seed=0)
        disc.logit.params = rng.normal(size=8)   # start away from 0.5
        for _ in range(5000):
            disc = gail_discriminator_step(disc, eb, pb, lr=0.5)
        surr = -np.log(disc_values(disc, np.arange(8), None))
        mean = w @ surr
        std = math.sqrt(w @ (surr - mean) ** 2)
        assert std <= 0.1
        assert abs(mean - math.log(2)) < 0.05


class TestTrainGail:
    def test_zero_iterations(self):
        mdp = random_mdp(3, 2, 0.9, seed=6)
        demos = wail.rollout_fixed(mdp, SoftmaxPolicy.uniform(3, 2), 2, 10, seed=0)
        policy, disc, log = train_gail(mdp, demos, RunConfig(k_max=0))
        assert np.array_equal(policy.logits, np.zeros((3, 2)))
        assert log.rows == []

    def test_deterministic(self):
        mdp = random_mdp(3, 2, 0.9, seed=7)
        demos = wail.rollout_fixed(mdp, SoftmaxPolicy.deterministic([0, 0, 1], 2), 4, 10, seed=1)
        cfg = RunConfig(k_max=20, seed=9)
        p1, d1, log1 = train_gail(mdp, demos, cfg)
        p2, d2, log2 = train_gail(mdp, demos, cfg)
        assert np.array_equal(p1.logits, p2.logits)
        assert np.array_equal(d1.logit.params, d2.logit.params)
        assert log1.rows == log2.rows

    def test_imitates_single_action_expert(self):
        rng = np.random.default_rng(0)
        P = np.zeros((2, 2, 2))
        P[0, 0, 0] = P[0, 1, 1] = 1.0
        P[1, 0, 0] = P[1, 1, 1] = 1.0
        mdp = wail.TabularMdp(P, [0.6, 0.4], 0.9, rng.normal(size=(2, 2)), np.eye(2))
        demos = wail.rollout_fixed(mdp, SoftmaxPolicy.deterministic([0, 0], 2), 5, 20, seed=2)
        policy, _, _ = train_gail(mdp, demos, RunConfig(k_max=300, seed=0))
        assert policy.probs[0, 0] >= 0.9 and policy.probs[1, 0] >= 0.9

    def test_reward_matrix_shape_and_range(self):
        mdp = random_mdp(3, 2, 0.9, seed=8)
        disc = create_discriminator("tabular", (6,), seed=0)
        R = gail_reward_matrix(disc, mdp)
        assert R.shape == (3, 2)
        assert np.all(R > 0) and np.all(R <= -math.log(1e-6) + 1e-12)


class TestTrainBc:
    def test_single_pair_mle(self):
        pol = train_bc(np.array([[0, 1]]), RunConfig(), n_states=2, n_actions=3)
        assert pol.probs[0, 1] >= 0.99

    def test_empirical_conditionals_recovered(self):
        pairs = np.array([[0, 0]] * 3 + [[0, 1]] * 1)
        pol = train_bc(pairs, RunConfig(), n_states=1, n_actions=2)
        assert np.abs(pol.probs[0] - [0.75, 0.25]).sum() / 2 < 1e-3

    def test_unvisited_states_stay_uniform(self):
        pol = train_bc(np.array([[0, 0]]), RunConfig(), n_states=3, n_actions=4)
        assert np.allclose(pol.probs[1], 0.25)
        assert np.allclose(pol.probs[2], 0.25)

    def test_total_variation_on_random_counts(self, rng):
        counts = rng.integers(1, 20, size=(4, 3))
        pairs = np.concatenate([np.full((counts[s, a], 2), (s, a))
                                for s in range(4) for a in range(3)])
        pol = train_bc(pairs, RunConfig(), n_states=4, n_actions=3)
        freq = counts / counts.sum(axis=1, keepdims=True)
        tv = np.abs(pol.probs - freq).sum(axis=1).max() / 2
        assert tv < 1e-3

    def test_accepts_trajectories_with_mdp(self):
        mdp = random_mdp(3, 2, 0.9, seed=9)
        demos = wail.rollout_fixed(mdp, SoftmaxPolicy.deterministic([1, 1, 1], 2), 3, 10, seed=0)
        pol = train_bc(demos, RunConfig(), mdp=mdp)
        visited = np.unique(np.concatenate([t.steps[:, 0] for t in demos]))
        assert all(pol.probs[s, 1] > 0.99 for s in visited)
