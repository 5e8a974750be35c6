import numpy as np
import pytest

import wail
from wail import (DiscreteMeasurePair, DualRegularization, GroundMetric,
                  build_ground_metric, reg_dual_gradient, reg_dual_objective,
                  reg_ot_fit, w1_dual_lp, w1_primal_lp)
from wail.ot import DivergenceError

from conftest import random_mdp


def random_instance(rng, n, dim=3, scale=1.0):
    E = rng.normal(size=(n, dim))
    metric = GroundMetric.from_embeddings(E, scale)
    a = rng.dirichlet(np.ones(n))
    b = rng.dirichlet(np.ones(n))
    return DiscreteMeasurePair(a, b), metric


def line_w1(src, tgt):
    """Independent 1-D oracle: W1 on integer support with |i-j| cost equals
    the summed absolute CDF difference."""
    return float(np.abs(np.cumsum(src) - np.cumsum(tgt))[:-1].sum())


class TestGroundMetric:
    def test_identical_embeddings_zero(self):
        m = GroundMetric.from_embeddings(np.zeros((3, 2)))
        assert np.all(m.dist == 0.0)

    def test_euclidean_example(self):
        m = GroundMetric.from_embeddings(np.array([[0., 0., 1.], [0., 0., 0.]]))
        assert abs(m.dist[0, 1] - 1.0) < 1e-15

    def test_metric_axioms_on_random_triples(self, rng):
        E = rng.normal(size=(40, 4))
        m = GroundMetric.from_embeddings(E, scale=2.0)
        D = m.dist
        idx = rng.integers(0, 40, size=(1000, 3))
        i, j, k = idx[:, 0], idx[:, 1], idx[:, 2]
        assert np.abs(D[i, j] - D[j, i]).max() < 1e-12
        assert np.all(D[i, k] <= D[i, j] + D[j, k] + 1e-12)

    def test_build_from_mdp_full_index_set(self):
        mdp = random_mdp(3, 2, 0.9, seed=0)
        m = build_ground_metric(mdp, scale=1.0)
        assert m.dist.shape == (6, 6)
        E = wail.state_action_embeddings(mdp)
        assert abs(m.dist[0, 5] - np.linalg.norm(E[0] - E[5])) < 1e-12

    def test_restrict_selects_entries(self, rng):
        E = rng.normal(size=(6, 2))
        m = GroundMetric.from_embeddings(E)
        sub = m.restrict([0, 2], [1, 1, 3])
        assert sub.dist.shape == (2, 3)
        assert sub.dist[1, 2] == m.dist[2, 3]
        assert np.array_equal(sub.tgt_index, [1, 1, 3])


class TestRegularizationType:
    def test_epsilon_positive(self):
        with pytest.raises(ValueError):
            DualRegularization("l2", 0.0)
        with pytest.raises(ValueError):
            DualRegularization("huber", 0.1)

    def test_pair_weights_validated(self):
        with pytest.raises(ValueError):
            DiscreteMeasurePair([0.5, 0.4], [0.5, 0.5])
        with pytest.raises(ValueError):
            DiscreteMeasurePair([1.1, -0.1], [0.5, 0.5])


class TestPrimalLp:
    def test_identical_measures_zero(self, rng):
        pair, metric = random_instance(rng, 8)
        same = DiscreteMeasurePair(pair.source, pair.source)
        value, plan = w1_primal_lp(same, metric)
        assert abs(value) < 1e-9

    def test_two_point_masses(self):
        m = GroundMetric.from_embeddings(np.array([[0.0], [2.0]]))
        pair = DiscreteMeasurePair([1.0, 0.0], [0.0, 1.0])
        value, plan = w1_primal_lp(pair, m)
        assert abs(value - 2.0) < 1e-9
        assert abs(plan[0, 1] - 1.0) < 1e-9

    def test_line_cdf_oracle(self):
        m = GroundMetric.from_embeddings(np.array([[0.0], [1.0], [2.0]]))
        src = np.array([0.0, 0.5, 0.5])
        tgt = np.array([0.5, 0.5, 0.0])
        value, _ = w1_primal_lp(DiscreteMeasurePair(src, tgt), m)
        assert abs(value - 1.0) < 1e-9
        assert abs(value - line_w1(src, tgt)) < 1e-9

    def test_random_line_instances_match_cdf_oracle(self, rng):
        for _ in range(10):
            n = int(rng.integers(3, 12))
            m = GroundMetric.from_embeddings(np.arange(n, dtype=float)[:, None])
            src = rng.dirichlet(np.ones(n))
            tgt = rng.dirichlet(np.ones(n))
            value, _ = w1_primal_lp(DiscreteMeasurePair(src, tgt), m)
            assert abs(value - line_w1(src, tgt)) < 1e-8

    def test_marginals_within_tolerance(self, rng):
        pair, metric = random_instance(rng, 20)
        _, plan = w1_primal_lp(pair, metric)
        assert np.abs(plan.sum(axis=1) - pair.source).max() < 1e-8
        assert np.abs(plan.sum(axis=0) - pair.target).max() < 1e-8

    def test_support_cap(self, rng):
        n = 301
        metric = GroundMetric(np.zeros((n, n)), np.arange(n), np.arange(n),
                              np.zeros((n, 1)))
        pair = DiscreteMeasurePair(np.full(n, 1 / n), np.full(n, 1 / n))
        with pytest.raises(ValueError, match="support too large"):
            w1_primal_lp(pair, metric)


class TestDualLp:
    def test_identical_measures(self, rng):
        pair, metric = random_instance(rng, 6)
        same = DiscreteMeasurePair(pair.source, pair.source)
        value, f = w1_dual_lp(same, metric)
        assert abs(value) < 1e-9

    def test_two_point_masses_binding(self):
        m = GroundMetric.from_embeddings(np.array([[0.0], [2.0]]))
        pair = DiscreteMeasurePair([1.0, 0.0], [0.0, 1.0])
        value, f = w1_dual_lp(pair, m)
        assert abs(value - 2.0) < 1e-9
        assert abs((f[1] - f[0]) - 2.0) < 1e-9

    def test_strong_duality_on_random_metrics(self, rng):
        for t in range(20):
            n = int(rng.integers(3, 25))
            pair, metric = random_instance(rng, n, dim=int(rng.integers(2, 5)))
            p, _ = w1_primal_lp(pair, metric)
            d, f = w1_dual_lp(pair, metric)
            assert abs(p - d) <= 1e-6
            # returned potential satisfies every Lipschitz constraint
            viol = (f[:, None] - f[None, :] - metric.dist).max()
            assert viol <= 1e-9

    def test_rejects_non_metric_cost(self):
        D = np.array([[0.0, 5.0, 1.0], [5.0, 0.0, 1.0], [1.0, 1.0, 0.0]])  # triangle fails
        metric = GroundMetric(D, np.arange(3), np.arange(3), np.zeros((3, 1)))
        pair = DiscreteMeasurePair([1., 0., 0.], [0., 1., 0.])
        with pytest.raises(ValueError, match="triangle"):
            w1_dual_lp(pair, metric)

    def test_rejects_distinct_supports(self, rng):
        E = rng.normal(size=(6, 2))
        metric = GroundMetric.from_embeddings(E, 1.0, [0, 1, 2], [3, 4, 5])
        pair = DiscreteMeasurePair(np.full(3, 1 / 3), np.full(3, 1 / 3))
        with pytest.raises(ValueError, match="common support"):
            w1_dual_lp(pair, metric)


class TestW1MetricProperties:
    def test_symmetry_identity_triangle(self, rng):
        n = 12
        E = rng.normal(size=(n, 3))
        metric = GroundMetric.from_embeddings(E)
        a = rng.dirichlet(np.ones(n))
        b = rng.dirichlet(np.ones(n))
        c = rng.dirichlet(np.ones(n))
        w = lambda x, y: w1_primal_lp(DiscreteMeasurePair(x, y), metric)[0]
        assert abs(w(a, b) - w(b, a)) < 1e-6
        assert abs(w(a, a)) < 1e-6
        assert w(a, c) <= w(a, b) + w(b, c) + 1e-6


class TestRegularizedObjective:
    def test_entropic_plug_in(self):
        m = GroundMetric.from_embeddings(np.zeros((1, 1)))
        pair = DiscreteMeasurePair([1.0], [1.0])
        reg = DualRegularization("entropic", 0.1)
        assert abs(reg_dual_objective([0.0], [0.0], pair, m, reg) + 0.1) < 1e-15

    def test_l2_inactive_at_zero(self, rng):
        pair, metric = random_instance(rng, 7)
        reg = DualRegularization("l2", 0.5)
        z = np.zeros(7)
        assert reg_dual_objective(z, z, pair, metric, reg) == 0.0

    def test_l2_at_exact_dual_potential_equals_w1(self, rng):
        for t in range(5):
            pair, metric = random_instance(rng, 10)
            value, f = w1_dual_lp(pair, metric)
            for eps in (1.0, 0.01):
                got = reg_dual_objective(f, f, pair, metric, DualRegularization("l2", eps))
                assert abs(got - value) < 1e-9

    def test_entropic_at_dual_potential_above_w1_minus_eps(self, rng):
        pair, metric = random_instance(rng, 10)
        value, f = w1_dual_lp(pair, metric)
        for eps in (1.0, 0.3, 0.05):
            got = reg_dual_objective(f, f, pair, metric, DualRegularization("entropic", eps))
            assert got >= value - eps - 1e-12

    def test_translation_invariance(self, rng):
        pair, metric = random_instance(rng, 9)
        r = rng.normal(size=9)
        for reg in (DualRegularization("l2", 0.2), DualRegularization("entropic", 0.2)):
            v0 = reg_dual_objective(r, r, pair, metric, reg)
            v1 = reg_dual_objective(r + 11.3, r + 11.3, pair, metric, reg)
            assert abs(v0 - v1) < 1e-10


class TestRegularizedGradient:
    def test_l2_inactive_penalty_gives_measure_weights(self, rng):
        E = rng.normal(size=(5, 2))
        metric = GroundMetric.from_embeddings(E + np.arange(5)[:, None] * 10)  # all d > 0
        a = rng.dirichlet(np.ones(5))
        b = rng.dirichlet(np.ones(5))
        pair = DiscreteMeasurePair(a, b)
        g_src, g_tgt = reg_dual_gradient(np.zeros(5), np.zeros(5), pair, metric,
                                         DualRegularization("l2", 0.1))
        assert np.allclose(g_src, -a)
        assert np.allclose(g_tgt, b)

    def test_entropic_stationary_at_symmetric_point(self):
        m = GroundMetric.from_embeddings(np.zeros((1, 1)))
        pair = DiscreteMeasurePair([1.0], [1.0])
        g_src, g_tgt = reg_dual_gradient([0.0], [0.0], pair, m,
                                         DualRegularization("entropic", 0.7))
        assert abs(g_src[0]) < 1e-15 and abs(g_tgt[0]) < 1e-15

    def test_matches_finite_differences(self, rng):
        h = 1e-5
        for t in range(100):
            n, m = int(rng.integers(2, 8)), int(rng.integers(2, 8))
            E = rng.normal(size=(n + m, 3))
            metric = GroundMetric.from_embeddings(E, 1.0, np.arange(n), n + np.arange(m))
            pair = DiscreteMeasurePair(rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(m)))
            kind = "entropic" if t % 2 == 0 else "l2"
            reg = DualRegularization(kind, float(rng.uniform(0.05, 1.0)))
            r_src = rng.normal(size=n)
            r_tgt = rng.normal(size=m)
            if kind == "l2":
                # keep away from the hinge so central differences are valid
                z = r_tgt[None, :] - r_src[:, None] - metric.dist
                if np.any(np.abs(z) < 1e-3):
                    continue
            g_src, g_tgt = reg_dual_gradient(r_src, r_tgt, pair, metric, reg)
            obj = lambda rs, rt: reg_dual_objective(rs, rt, pair, metric, reg)
            num_s = np.array([(obj(r_src + h * np.eye(n)[i], r_tgt)
                               - obj(r_src - h * np.eye(n)[i], r_tgt)) / (2 * h)
                              for i in range(n)])
            num_t = np.array([(obj(r_src, r_tgt + h * np.eye(m)[j])
                               - obj(r_src, r_tgt - h * np.eye(m)[j])) / (2 * h)
                              for j in range(m)])
            scale = max(np.abs(num_s).max(), np.abs(num_t).max(), 1e-12)
            assert np.abs(g_src - num_s).max() / scale <= 1e-4
            assert np.abs(g_tgt - num_t).max() / scale <= 1e-4


class TestRegOtFit:
    def test_zero_steps_unchanged(self, rng):
        pair, metric = random_instance(rng, 4)
        model = wail.create_model("tabular", (4,), seed=0)
        fit, trace = reg_ot_fit(pair, metric, DualRegularization("l2", 0.1),
                                model, steps=0, lr=0.1)
        assert np.array_equal(fit.params, model.params)
        assert trace.size == 0

    def test_tiny_instance_reaches_lp_value(self):
        E = np.array([[0., 0.], [1., 0.], [0., 1.5]])
        metric = GroundMetric.from_embeddings(E)
        pair = DiscreteMeasurePair([0.6, 0.2, 0.2], [0.1, 0.4, 0.5])
        w1, _ = w1_primal_lp(pair, metric)
        reg = DualRegularization("l2", 0.01)
        model = wail.create_model("tabular", (3,), seed=0)
        fit, _ = reg_ot_fit(pair, metric, reg, model, steps=5000, lr=0.05)
        final = reg_dual_objective(fit.params, fit.params, pair, metric, reg)
        assert abs(final - w1) / w1 < 0.05

    def test_epsilon_sweep_monotone(self, rng):
        n = 8
        E = rng.normal(size=(n, 3)) * 0.7
        metric = GroundMetric.from_embeddings(E)
        pair = DiscreteMeasurePair(rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n)))
        w1, _ = w1_primal_lp(pair, metric)
        gaps = []
        for eps, lr, steps in ((1.0, 1.0, 2000), (0.1, 0.4, 3000), (0.01, 0.05, 6000)):
            model = wail.create_model("tabular", (n,), seed=1)
            fit, _ = reg_ot_fit(pair, metric, DualRegularization("l2", eps),
                                model, steps=steps, lr=lr)
            val = reg_dual_objective(fit.params, fit.params, pair, metric,
                                     DualRegularization("l2", eps))
            gaps.append(abs(val - w1))
        assert gaps[0] >= gaps[1] >= gaps[2]
        assert gaps[2] / max(w1, 1e-12) < 0.05

    def test_minibatch_mode_runs_deterministically(self, rng):
        pair, metric = random_instance(rng, 12)
        model = wail.create_model("linear", (3,), seed=2)
        reg = DualRegularization("l2", 0.1)
        f1, t1 = reg_ot_fit(pair, metric, reg, model, steps=50, lr=0.05, batch=6, seed=9)
        f2, t2 = reg_ot_fit(pair, metric, reg, model, steps=50, lr=0.05, batch=6, seed=9)
        assert np.array_equal(f1.params, f2.params)
        assert np.array_equal(t1, t2)

    def test_divergence_detected(self, rng):
        pair, metric = random_instance(rng, 4)
        model = wail.create_model("tabular", (4,), seed=0)
        model.params = np.array([np.inf, 0.0, 0.0, 0.0])
        with pytest.raises(DivergenceError):
            reg_ot_fit(pair, metric, DualRegularization("l2", 0.1), model, steps=5, lr=0.1)


def test_entropic_clamp_counter_increments():
    before = wail.entropic_clamp_events()
    m = GroundMetric.from_embeddings(np.zeros((1, 1)))
    pair = DiscreteMeasurePair([1.0], [1.0])
    reg_dual_objective([0.0], [1000.0], pair, m, DualRegularization("entropic", 0.1))
    assert wail.entropic_clamp_events() > before
