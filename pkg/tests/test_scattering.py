import numpy as np
import pytest
import torch

from fastnet_dehazing.errors import InvalidParameterError, ShapeMismatchError
from fastnet_dehazing.imaging.image_core import Image
from fastnet_dehazing.physics.scattering import (
    AtmosphericLight,
    DepthMap,
    TransmissionMap,
    apply_k,
    apply_k_array,
    k_transform,
    recover_array,
    recover_scene,
    recover_scene_tensor,
    synthesize_haze,
    transmission_from_depth,
)


def _const_t(value, h=2, w=2):
    return TransmissionMap(data=np.full((h, w), value))


class TestTransmission:
    def test_zero_depth_is_clear(self):
        t = transmission_from_depth(DepthMap(data=np.zeros((3, 3))), beta=1.5)
        np.testing.assert_array_equal(t.data, 1.0)

    def test_exponential(self):
        t = transmission_from_depth(DepthMap(data=np.ones((1, 1))), beta=1.4)
        assert t.data[0, 0] == pytest.approx(0.246597, abs=1e-6)

    def test_floor(self):
        t = transmission_from_depth(DepthMap(data=np.full((1, 1), 1e6)), beta=1.5)
        assert t.data[0, 0] == 1e-4

    def test_rejects_nonpositive_beta(self):
        with pytest.raises(InvalidParameterError):
            transmission_from_depth(DepthMap(data=np.ones((1, 1))), beta=0.0)


class TestSynthesizeHaze:
    def test_clear_air(self, random_image):
        J = random_image(2, 2)
        out = synthesize_haze(J, _const_t(1.0), AtmosphericLight.uniform(0.7))
        np.testing.assert_array_equal(out.data, J.data)

    def test_dense_haze_tends_to_airlight(self, random_image):
        out = synthesize_haze(random_image(2, 2), _const_t(1e-4), AtmosphericLight.uniform(0.6))
        np.testing.assert_allclose(out.data, 0.6, atol=1e-4)

    def test_arithmetic(self):
        out = synthesize_haze(Image.constant(1, 1, 0.8), _const_t(0.5, 1, 1), AtmosphericLight.uniform(0.5))
        assert out.data[0, 0, 0] == pytest.approx(0.65, abs=1e-15)

    def test_convexity(self, rng, random_image):
        J = random_image(8, 8)
        t = TransmissionMap(data=rng.uniform(0.01, 1.0, size=(8, 8)))
        A = AtmosphericLight(data=rng.uniform(0.0, 1.0, size=3))
        I = synthesize_haze(J, t, A).data
        a = A.data.reshape(1, 1, 3)
        assert np.all(I >= np.minimum(J.data, a) - 1e-12)
        assert np.all(I <= np.maximum(J.data, a) + 1e-12)

    def test_per_pixel_airlight(self, random_image):
        J = random_image(3, 3)
        A = AtmosphericLight(data=np.full((3, 3, 3), 0.4))
        out = synthesize_haze(J, _const_t(0.5, 3, 3), A)
        np.testing.assert_allclose(out.data, 0.5 * J.data + 0.2)

    def test_shape_mismatch(self, random_image):
        with pytest.raises(ShapeMismatchError):
            synthesize_haze(random_image(3, 3), _const_t(0.5, 2, 2), AtmosphericLight.uniform(0.5))


class TestRecoverScene:
    def test_inverse_of_arithmetic_example(self):
        J = recover_scene(Image.constant(1, 1, 0.65), _const_t(0.5, 1, 1), AtmosphericLight.uniform(0.5))
        assert J.data[0, 0, 0] == pytest.approx(0.8, abs=1e-12)

    def test_clear_air(self, random_image):
        I = random_image(2, 2)
        np.testing.assert_allclose(
            recover_scene(I, _const_t(1.0), AtmosphericLight.uniform(0.9)).data, I.data, atol=1e-15
        )

    def test_round_trip_over_random_draws(self, rng):
        for _ in range(1000):
            J = Image(data=rng.uniform(0.0, 1.0, size=(2, 2, 3)))
            t = TransmissionMap(data=rng.uniform(0.2, 1.0, size=(2, 2)))
            A = AtmosphericLight.uniform(rng.uniform(0.5, 1.0))
            back = recover_scene(synthesize_haze(J, t, A), t, A)
            assert np.max(np.abs(back.data - J.data)) <= 1e-5

    def test_floor_applies(self):
        out = recover_array(np.full((1, 1, 1), 0.5), np.full((1, 1), 1e-9), np.full((1, 1, 1), 0.4), t_min=0.05)
        assert out[0, 0, 0] == pytest.approx((0.5 - 0.4 * 0.95) / 0.05)

    def test_rejects_nonpositive_floor(self, random_image):
        with pytest.raises(InvalidParameterError):
            recover_scene(random_image(2, 2), _const_t(0.5), AtmosphericLight.uniform(0.5), t_min=0.0)

    def test_tensor_version_matches(self, rng):
        I = rng.uniform(0.0, 1.0, size=(4, 4, 3))
        t = rng.uniform(0.01, 1.0, size=(4, 4))
        A = rng.uniform(0.5, 1.0, size=3)
        expected = recover_scene(Image(data=I), TransmissionMap(data=t), AtmosphericLight(data=A)).data
        got = recover_scene_tensor(
            torch.from_numpy(I.transpose(2, 0, 1)[None].copy()),
            torch.from_numpy(t[None, None].copy()),
            torch.from_numpy(A.reshape(1, 3, 1, 1).copy()),
        )
        np.testing.assert_allclose(got[0].numpy().transpose(1, 2, 0), expected, atol=1e-12)


class TestKTransform:
    def test_scalar_value(self):
        K = k_transform(Image.constant(1, 1, 0.65), _const_t(0.5, 1, 1), AtmosphericLight.uniform(0.5), b=0.0)
        assert K[0, 0, 0] == pytest.approx(-2.285714285714, rel=1e-9)

    def test_equivalent_to_unclamped_recovery(self, rng):
        I = rng.uniform(0.0, 1.0 - 1e-3, size=(6, 6, 3))
        t = rng.uniform(0.05, 1.0, size=(6, 6))
        A = rng.uniform(0.5, 1.0)
        b = rng.uniform(0.0, 0.5)
        K = k_transform(Image(data=I), TransmissionMap(data=t), AtmosphericLight.uniform(A), b)
        np.testing.assert_allclose(apply_k_array(K, I, b), recover_array(I, t, np.full(3, A)), atol=1e-5)

    def test_fully_hazed_pixel_maps_to_airlight(self):
        A = 0.7
        K = k_transform(Image.constant(2, 2, A), _const_t(0.3), AtmosphericLight.uniform(A), b=A)
        np.testing.assert_allclose(K, 0.0, atol=1e-12)
        np.testing.assert_allclose(apply_k(K, Image.constant(2, 2, A), b=A).data, A, atol=1e-12)

    def test_pole_is_guarded(self):
        K = k_transform(Image.constant(1, 1, 1.0), _const_t(0.5, 1, 1), AtmosphericLight.uniform(0.5))
        assert np.all(np.isfinite(K))

    def test_zero_k_returns_bias(self, random_image):
        I = random_image(2, 2)
        np.testing.assert_allclose(apply_k(np.zeros(I.shape), I, b=0.3).data, 0.3)

    def test_unit_k_clamps_to_zero(self, random_image):
        I = random_image(2, 2)
        np.testing.assert_array_equal(apply_k(np.ones(I.shape), I, b=0.0).data, 0.0)

    def test_shape_mismatch(self, random_image):
        with pytest.raises(ShapeMismatchError):
            apply_k(np.zeros((1, 1, 3)), random_image(2, 2))
