import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from protoattn.core import (FeatureMap, ProjectionParams, RngStream,
                            ShapeError, encode_keys_values, pairwise_sq_dists,
                            softmax, sq_dist)

from conftest import random_fmap


class TestSoftmax:
    def test_symmetry(self):
        np.testing.assert_allclose(softmax([0.0, 0.0]), [0.5, 0.5])

    @pytest.mark.parametrize("x", [-3.0, 0.0, 17.5, 1e8])
    def test_single_element(self, x):
        np.testing.assert_allclose(softmax([x]), [1.0])

    def test_two_logits(self):
        # e^0 / (e^0 + e^-1) evaluated directly
        expected = 1.0 / (1.0 + math.exp(-1.0))
        out = softmax([0.0, -1.0])
        np.testing.assert_allclose(out, [expected, 1.0 - expected], atol=1e-5)
        np.testing.assert_allclose(out, [0.73106, 0.26894], atol=1e-5)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            softmax([])

    def test_nan_rejected(self):
        with pytest.raises(ValueError):
            softmax([0.0, float("nan")])

    def test_rows_sum_to_one(self, rng):
        logits = rng.standard_normal((40, 17)) * 30
        out = softmax(logits, axis=1)
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(out >= 0)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(-50, 50), min_size=1, max_size=12),
           st.floats(-100, 100))
    def test_shift_invariance(self, logits, c):
        base = softmax(logits)
        shifted = softmax(np.asarray(logits) + c)
        np.testing.assert_allclose(base, shifted, atol=1e-12)


class TestSqDist:
    def test_identity(self, rng):
        v = rng.standard_normal(9)
        assert sq_dist(v, v) == 0.0

    def test_unit(self):
        assert sq_dist([0.0], [1.0]) == 1.0

    def test_hand_case(self):
        # 3^2 + 4^2
        assert sq_dist([1.0, 2.0], [4.0, 6.0]) == 25.0

    def test_symmetric(self, rng):
        a, b = rng.standard_normal(5), rng.standard_normal(5)
        assert sq_dist(a, b) == pytest.approx(sq_dist(b, a), rel=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            sq_dist([1.0], [1.0, 2.0])

    def test_pairwise_matches_scalar(self, rng):
        a = rng.standard_normal((6, 4))
        b = rng.standard_normal((3, 4))
        got = pairwise_sq_dists(a, b)
        want = [[sq_dist(a[i], b[j]) for j in range(3)] for i in range(6)]
        np.testing.assert_allclose(got, want, atol=1e-12)


class TestEncodeKeysValues:
    def test_identity_projection(self):
        frame = random_fmap(0, 3, 4, 5)
        keys, values = encode_keys_values(frame, ProjectionParams.identity(5))
        np.testing.assert_array_equal(keys.data, frame.data)
        np.testing.assert_array_equal(values.data, frame.data)

    def test_zero_weights(self):
        frame = random_fmap(1, 3, 3, 2)
        params = ProjectionParams(np.zeros((2, 4)), np.zeros((2, 3)), -1)
        keys, values = encode_keys_values(frame, params)
        assert not keys.data.any()
        assert not values.data.any()
        assert keys.channels == 4 and values.channels == 3

    def test_seeded_matches_per_pixel_matmul(self):
        # oracle: an explicit loop over pixels
        frame = random_fmap(7, 2, 2, 3)
        params = ProjectionParams.from_seed(3, 4, 2, seed=7)
        keys, values = encode_keys_values(frame, params)
        for r in range(2):
            for c in range(2):
                px = frame.data[r, c]
                np.testing.assert_allclose(
                    keys.data[r, c], px @ params.key_weights, atol=1e-12)
                np.testing.assert_allclose(
                    values.data[r, c], px @ params.value_weights, atol=1e-12)

    def test_linearity(self, rng):
        f1 = random_fmap(10, 4, 5, 3)
        f2 = random_fmap(11, 4, 5, 3)
        params = ProjectionParams.from_seed(3, 6, 4, seed=3)
        alpha, beta = 0.7, -2.3
        mixed = FeatureMap(4, 5, 3, alpha * f1.data + beta * f2.data)
        k_mixed, v_mixed = encode_keys_values(mixed, params)
        k1, v1 = encode_keys_values(f1, params)
        k2, v2 = encode_keys_values(f2, params)
        np.testing.assert_allclose(
            k_mixed.data, alpha * k1.data + beta * k2.data, atol=1e-9)
        np.testing.assert_allclose(
            v_mixed.data, alpha * v1.data + beta * v2.data, atol=1e-9)

    def test_channel_mismatch(self):
        frame = random_fmap(2, 2, 2, 3)
        with pytest.raises(ShapeError):
            encode_keys_values(frame, ProjectionParams.identity(4))


class TestRngStream:
    def test_same_seed_same_sequence(self):
        a = RngStream(99).standard_normal(16)
        b = RngStream(99).standard_normal(16)
        np.testing.assert_array_equal(a, b)

    def test_substreams_are_stable_and_distinct(self):
        root = RngStream(5)
        x = root.substream(1, 2).standard_normal(8)
        y = RngStream(5).substream(1, 2).standard_normal(8)
        z = root.substream(1, 3).standard_normal(8)
        np.testing.assert_array_equal(x, y)
        assert not np.array_equal(x, z)

    def test_projection_regeneration(self):
        p1 = ProjectionParams.from_seed(5, 8, 6, seed=42)
        p2 = ProjectionParams.from_seed(5, 8, 6, seed=42)
        np.testing.assert_array_equal(p1.key_weights, p2.key_weights)
        np.testing.assert_array_equal(p1.value_weights, p2.value_weights)


class TestFeatureMap:
    def test_rejects_wrong_size(self):
        with pytest.raises(ShapeError):
            FeatureMap(2, 2, 2, np.zeros(7))

    def test_rejects_nonfinite(self):
        data = np.zeros((2, 2, 1))
        data[0, 0, 0] = np.inf
        with pytest.raises(ValueError):
            FeatureMap(2, 2, 1, data)

    def test_rejects_nonpositive_dims(self):
        with pytest.raises(ShapeError):
            FeatureMap(0, 2, 1, np.zeros(0))

    def test_pixels_view(self):
        fm = random_fmap(3, 2, 3, 4)
        assert fm.pixels().shape == (6, 4)
        np.testing.assert_array_equal(fm.pixels()[4], fm.data[1, 1])
