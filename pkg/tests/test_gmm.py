import math

import numpy as np
import pytest

from protoattn.gmm import (AssignmentMap, EmConfig, EmptyClusterError,
                           PrototypeSet, fit_gmm, log_likelihood, m_step,
                           posterior, value_prototypes)

# frozen from the worked one-dimensional chain: keys {0, 1}, means {0, 1},
# sigma2 = 0.5 gives logits equal to the negative squared distance
P_NEAR = 1.0 / (1.0 + math.exp(-1.0))   # 0.7310585786...


def _random_instance(seed, m=20, n=5, d=4):
    rng = np.random.default_rng(seed)
    keys = rng.standard_normal((m, d)) * 2
    means = rng.standard_normal((n, d)) * 2
    sigma2 = float(rng.uniform(0.05, 3.0))
    return keys, means, sigma2


class TestPosterior:
    def test_single_component(self, rng):
        keys = rng.standard_normal((7, 3))
        am = posterior(keys, keys[:1], 0.5)
        np.testing.assert_array_equal(am.posteriors, np.ones((7, 1)))

    def test_equidistant_symmetry(self):
        am = posterior(np.array([[0.5]]), np.array([[0.0], [1.0]]), 0.7)
        np.testing.assert_allclose(am.posteriors, [[0.5, 0.5]], atol=1e-12)

    def test_worked_example(self):
        am = posterior(np.array([[0.0]]), np.array([[0.0], [1.0]]), 0.5)
        np.testing.assert_allclose(am.posteriors, [[0.73106, 0.26894]],
                                   atol=1e-5)
        # normalizer is the unshifted sum of kernel values
        np.testing.assert_allclose(am.normalizers, [1.0 + math.exp(-1.0)],
                                   atol=1e-12)

    def test_sigma_validation(self, rng):
        keys = rng.standard_normal((3, 2))
        with pytest.raises(ValueError):
            posterior(keys, keys, 0.0)
        with pytest.raises(ValueError):
            posterior(keys, keys, -1.0)

    def test_rows_sum_to_one_randomized(self):
        for seed in range(100):
            keys, means, sigma2 = _random_instance(seed)
            am = posterior(keys, means, sigma2)
            np.testing.assert_allclose(am.posteriors.sum(axis=1), 1.0,
                                       atol=1e-9)

    def test_translation_equivariance(self):
        for seed in range(20):
            keys, means, sigma2 = _random_instance(seed)
            shift = np.random.default_rng(seed + 1000).standard_normal(
                keys.shape[1]) * 5
            base = posterior(keys, means, sigma2).posteriors
            moved = posterior(keys + shift, means + shift, sigma2).posteriors
            np.testing.assert_allclose(base, moved, atol=1e-9)

    def test_sigma_scaling_matches_distance_scaling(self):
        keys, means, _ = _random_instance(3)
        s = 2.5
        scaled_sigma = posterior(keys, means, 0.5 * s).posteriors
        scaled_dist = posterior(keys / math.sqrt(s), means / math.sqrt(s),
                                0.5).posteriors
        np.testing.assert_allclose(scaled_sigma, scaled_dist, atol=1e-9)


class TestMStep:
    def test_one_hot_gives_centroids(self):
        keys = np.array([[0.0], [2.0], [10.0], [14.0]])
        hard = np.array([[1, 0], [1, 0], [0, 1], [0, 1]], dtype=float)
        am = AssignmentMap(hard, np.ones(4))
        np.testing.assert_allclose(m_step(keys, am), [[1.0], [12.0]])

    def test_uniform_gives_global_mean(self, rng):
        keys = rng.standard_normal((8, 3))
        am = AssignmentMap(np.full((8, 2), 0.5), np.ones(8))
        means = m_step(keys, am)
        np.testing.assert_allclose(means[0], keys.mean(axis=0), atol=1e-12)
        np.testing.assert_allclose(means[1], keys.mean(axis=0), atol=1e-12)

    def test_hand_weighted_average(self):
        keys = np.array([[0.0], [1.0]])
        post = np.array([[0.7311, 0.2689], [0.2689, 0.7311]])
        am = AssignmentMap(post, np.ones(2))
        np.testing.assert_allclose(m_step(keys, am).ravel(),
                                   [0.2689, 0.7311], atol=1e-4)

    def test_empty_column_reseeds_farthest_key(self):
        # third component gets exactly zero mass; the farthest key from the
        # surviving means must take its place
        keys = np.array([[0.0, 0.0], [1.0, 0.0], [30.0, 0.0]])
        post = np.array([[1.0, 0.0, 0.0],
                         [1.0, 0.0, 0.0],
                         [0.0, 1.0, 0.0]])
        am = AssignmentMap(post, np.ones(3))
        means = m_step(keys, am)
        assert np.all(np.isfinite(means))
        np.testing.assert_allclose(means[0], [0.5, 0.0])
        np.testing.assert_allclose(means[1], [30.0, 0.0])
        # keys 0 and 1 tie at squared distance 0.25 from the surviving
        # means; ties resolve to the first index
        np.testing.assert_allclose(means[2], [0.0, 0.0])


class TestFitGmm:
    def test_zero_iters_warm_start_unchanged(self, rng):
        keys = rng.standard_normal((10, 3))
        warm = rng.standard_normal((4, 3))
        cfg = EmConfig(4, 0.5, 0, "warm", warm_means=warm)
        means, trace = fit_gmm(keys, cfg)
        np.testing.assert_array_equal(means, warm)
        assert trace.shape == (1,)

    def test_separated_clusters_reach_centroids(self):
        rng = np.random.default_rng(0)
        c0 = rng.standard_normal((20, 2)) * 0.01
        c1 = rng.standard_normal((20, 2)) * 0.01 + 50.0
        keys = np.vstack([c0, c1])
        warm = np.vstack([c0[:1], c1[:1]])
        cfg = EmConfig(2, 0.05, 6, "warm", warm_means=warm)
        means, _ = fit_gmm(keys, cfg)
        np.testing.assert_allclose(means[0], c0.mean(axis=0), atol=1e-6)
        np.testing.assert_allclose(means[1], c1.mean(axis=0), atol=1e-6)

    def test_trace_monotone_random(self):
        # the full 100-seed sweep lives in the acceptance suite
        for seed in range(10):
            rng = np.random.default_rng(seed)
            keys = rng.standard_normal((64, 8))
            cfg = EmConfig(4, 0.5, 6, seed=seed)
            _, trace = fit_gmm(keys, cfg)
            assert trace.shape == (7,)
            floor = np.abs(trace[:-1]) * 1e-9
            assert np.all(np.diff(trace) >= -floor)

    def test_subsample_needs_enough_keys(self, rng):
        keys = rng.standard_normal((3, 2))
        with pytest.raises(ValueError):
            fit_gmm(keys, EmConfig(5, 0.5, 1))

    def test_farthest_point_spreads(self):
        keys = np.array([[0.0], [0.1], [0.2], [10.0], [10.1], [-9.0]])
        cfg = EmConfig(3, 0.5, 0, "farthest")
        means, _ = fit_gmm(keys, cfg)
        assert sorted(np.round(means.ravel(), 1)) == [-9.0, 0.1, 10.0] or \
            len(np.unique(np.round(means.ravel()))) == 3

    def test_warm_shape_mismatch(self, rng):
        keys = rng.standard_normal((6, 3))
        warm = rng.standard_normal((2, 4))
        with pytest.raises(Exception):
            fit_gmm(keys, EmConfig(2, 0.5, 1, "warm", warm_means=warm))

    def test_invalid_init_rejected(self):
        with pytest.raises(ValueError):
            EmConfig(2, 0.5, 1, "kmeanspp")


class TestLogLikelihood:
    def test_unit_density(self):
        # one component, key on the mean, variance 1/(2 pi): density is 1
        sigma2 = 1.0 / (2.0 * math.pi)
        ll = log_likelihood(np.array([[3.0]]), np.array([[3.0]]), sigma2)
        assert ll == pytest.approx(0.0, abs=1e-12)

    def test_duplicating_keys_doubles(self, rng):
        keys = rng.standard_normal((7, 3))
        means = rng.standard_normal((2, 3))
        single = log_likelihood(keys, means, 0.8)
        double = log_likelihood(np.vstack([keys, keys]), means, 0.8)
        assert double == pytest.approx(2 * single, rel=1e-12)

    def test_single_component_fixed_point_is_max(self, rng):
        keys = rng.standard_normal((12, 2))
        mle = keys.mean(axis=0, keepdims=True)
        best = log_likelihood(keys, mle, 0.5)
        for seed in range(10):
            delta = np.random.default_rng(seed).standard_normal((1, 2)) * 0.3
            assert log_likelihood(keys, mle + delta, 0.5) <= best + 1e-12


class TestValuePrototypes:
    def test_single_component_literal_sums(self, rng):
        values = rng.standard_normal((6, 3))
        am = AssignmentMap(np.ones((6, 1)), np.ones(6))
        np.testing.assert_allclose(
            value_prototypes(am, values, "literal")[0], values.sum(axis=0),
            atol=1e-12)

    def test_single_component_normalized_means(self, rng):
        values = rng.standard_normal((6, 3))
        am = AssignmentMap(np.ones((6, 1)), np.ones(6))
        np.testing.assert_allclose(
            value_prototypes(am, values, "normalized")[0],
            values.mean(axis=0), atol=1e-12)

    def test_worked_example(self):
        am = posterior(np.array([[0.0], [1.0]]), np.array([[0.0], [1.0]]), 0.5)
        vp = value_prototypes(am, np.array([[10.0], [20.0]]), "literal")
        np.testing.assert_allclose(vp.ravel(), [12.689, 17.311], atol=1e-3)
        assert vp.sum() == pytest.approx(30.0, abs=1e-9)

    def test_literal_conservation_randomized(self):
        for seed in range(100):
            keys, means, sigma2 = _random_instance(seed, m=15, n=4, d=3)
            values = np.random.default_rng(seed + 500).standard_normal((15, 2))
            am = posterior(keys, means, sigma2)
            vp = value_prototypes(am, values, "literal")
            np.testing.assert_allclose(vp.sum(axis=0), values.sum(axis=0),
                                       atol=1e-6)

    def test_hard_identity_when_means_equal_keys(self, rng):
        keys = rng.standard_normal((5, 3))
        values = rng.standard_normal((5, 2))
        am = posterior(keys, keys, 0.5)
        np.testing.assert_array_equal(value_prototypes(am, values, "hard"),
                                      values)

    def test_normalized_zero_mass_rejected(self):
        post = np.array([[1.0, 0.0], [1.0, 0.0]])
        am = AssignmentMap(post, np.ones(2))
        with pytest.raises(EmptyClusterError):
            value_prototypes(am, np.ones((2, 1)), "normalized")

    def test_unknown_mode_rejected(self, rng):
        am = AssignmentMap(np.ones((2, 1)), np.ones(2))
        with pytest.raises(ValueError):
            value_prototypes(am, np.ones((2, 1)), "fancy")


class TestTypes:
    def test_prototype_set_validation(self):
        with pytest.raises(ValueError):
            PrototypeSet(np.zeros((2, 3)), np.zeros((2, 2)), 0.0)
        with pytest.raises(Exception):
            PrototypeSet(np.zeros((2, 3)), np.zeros((3, 2)), 0.5)

    def test_assignment_rows_must_sum_to_one(self):
        with pytest.raises(ValueError):
            AssignmentMap(np.array([[0.6, 0.3]]), np.ones(1))

    def test_em_config_validation(self):
        with pytest.raises(ValueError):
            EmConfig(0)
        with pytest.raises(ValueError):
            EmConfig(2, n_iters=-1)
        with pytest.raises(ValueError):
            EmConfig(2, sigma2=0.0)
