import numpy as np
import pytest

from aimsim.background import degrade, extract_background
from aimsim.core import InvalidInputError


class TestExtractBackground:
    def test_identical_frames_return_frame(self):
        rng = np.random.default_rng(0)
        frame = rng.uniform(0, 1, (12, 9, 3))
        out = extract_background([frame.copy() for _ in range(7)])
        np.testing.assert_allclose(out, frame, atol=1e-12)

    def test_two_frames_average(self):
        out = extract_background([np.zeros((4, 4, 3)), np.ones((4, 4, 3))])
        np.testing.assert_allclose(out, 0.5)

    def test_sprite_occupancy_error_is_q_times_c(self):
        # closed-form oracle: a sprite of contrast c covering a pixel in m of
        # n frames shifts the mean there by exactly (m / n) * c
        rng = np.random.default_rng(1)
        n, h, w = 40, 8, 8
        bg = np.full((h, w, 3), 0.3)
        contrast = 0.4
        occupancy = rng.integers(0, n + 1, size=(h, w))
        frames = []
        for i in range(n):
            f = bg.copy()
            mask = i < occupancy  # pixel occupied in its first m frames
            f[mask] = 0.3 + contrast
            frames.append(f)
        out = extract_background(frames)
        expected_err = (occupancy / n) * contrast
        err = np.abs(out - bg)[:, :, 0]
        np.testing.assert_allclose(err, expected_err, atol=1e-12)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(2)
        frames = [rng.uniform(0, 1, (6, 5, 3)) for _ in range(9)]
        a = extract_background(frames)
        order = rng.permutation(9)
        b = extract_background([frames[i] for i in order])
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_mean_preserved(self):
        rng = np.random.default_rng(3)
        frames = [rng.uniform(0.1, 0.9, (10, 10, 3)) for _ in range(5)]
        out = extract_background(frames)
        assert out.mean() == pytest.approx(np.mean(frames), abs=1e-12)

    def test_empty_stack_rejected(self):
        with pytest.raises(InvalidInputError):
            extract_background([])

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            extract_background([np.zeros((4, 4, 3)), np.zeros((5, 4, 3))])


class TestDegrade:
    def test_identity_when_disabled(self):
        rng = np.random.default_rng(4)
        img = rng.uniform(0, 1, (16, 16, 3))
        np.testing.assert_allclose(degrade(img, 0.0, 0.0, seed=0), img)

    def test_blur_of_constant_is_unchanged(self):
        img = np.full((20, 20, 3), 0.42)
        np.testing.assert_allclose(degrade(img, 2.0, 0.0, seed=0), img, atol=1e-12)

    def test_blur_kernel_is_normalized(self):
        # impulse response must integrate to one away from the borders
        img = np.zeros((41, 41))
        img[20, 20] = 1.0
        out = degrade(img, 2.0, 0.0, seed=0)
        assert out.sum() == pytest.approx(1.0, abs=1e-9)

    def test_noise_std_matches_request(self):
        img = np.full((128, 128), 0.5)
        out = degrade(img, 0.0, 0.2, seed=5)
        measured = (out - 0.5).std()
        assert abs(measured - 0.2) / 0.2 < 0.02

    def test_deterministic_given_seed(self):
        img = np.full((16, 16, 3), 0.5)
        a = degrade(img, 1.0, 0.2, seed=9)
        b = degrade(img, 1.0, 0.2, seed=9)
        c = degrade(img, 1.0, 0.2, seed=10)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_output_clamped(self):
        img = np.full((32, 32), 0.95)
        out = degrade(img, 0.0, 0.5, seed=1)
        assert out.max() <= 1.0 and out.min() >= 0.0

    def test_negative_params_rejected(self):
        with pytest.raises(InvalidInputError):
            degrade(np.zeros((4, 4)), -1.0, 0.0, seed=0)
