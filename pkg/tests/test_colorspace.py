import numpy as np
import pytest

from vcr.colorspace import (
    HsvImage,
    HviImage,
    HviParams,
    RgbImage,
    hsv_to_rgb,
    hvi_to_rgb,
    hvt,
    intensity_collapse,
    phvit,
    rgb_to_hsv,
    rgb_to_hvi,
)
from vcr.errors import ValidationError


def pixel_rgb(r, g, b):
    return RgbImage(np.array([[[r, g, b]]], dtype=np.float64))


def random_rgb(rng, n):
    return RgbImage(rng.uniform(0.0, 1.0, size=(1, n, 3)))


class TestRgbToHsv:
    def test_white(self):
        hsv = rgb_to_hsv(pixel_rgb(1, 1, 1))
        assert hsv.h[0, 0] == 0.0
        assert hsv.s[0, 0] == 0.0
        assert hsv.v[0, 0] == 1.0

    def test_pure_red(self):
        hsv = rgb_to_hsv(pixel_rgb(1, 0, 0))
        assert hsv.h[0, 0] == 0.0
        assert hsv.s[0, 0] == 1.0
        assert hsv.v[0, 0] == 1.0

    def test_black(self):
        hsv = rgb_to_hsv(pixel_rgb(0, 0, 0))
        assert hsv.h[0, 0] == 0.0
        assert hsv.s[0, 0] == 0.0
        assert hsv.v[0, 0] == 0.0

    def test_secondary_hues(self):
        # green lands at 1/3, blue at 2/3 of the hue circle
        assert rgb_to_hsv(pixel_rgb(0, 1, 0)).h[0, 0] == pytest.approx(1 / 3)
        assert rgb_to_hsv(pixel_rgb(0, 0, 1)).h[0, 0] == pytest.approx(2 / 3)

    @pytest.mark.parametrize(
        "rgb,expected_h",
        [
            ((1, 1, 0), 1 / 6),  # yellow: R and G tie for the max
            ((0, 1, 1), 1 / 2),  # cyan
            ((1, 0, 1), 5 / 6),  # magenta: negative ratio wraps mod 6
        ],
    )
    def test_mixed_maxima_and_wraparound(self, rgb, expected_h):
        hsv = rgb_to_hsv(pixel_rgb(*rgb))
        assert hsv.h[0, 0] == pytest.approx(expected_h, abs=1e-15)
        assert hsv.s[0, 0] == 1.0
        back = hsv_to_rgb(hsv)
        assert np.allclose(back.planes[0, 0], rgb, atol=1e-12)

    def test_near_red_negative_side_stays_in_range(self):
        # g slightly below b puts the hue just under a full turn, not at it
        hsv = rgb_to_hsv(pixel_rgb(1.0, 0.5 - 1e-12, 0.5))
        assert 0.0 <= hsv.h[0, 0] < 1.0
        back = hsv_to_rgb(hsv)
        assert np.allclose(back.planes[0, 0], [1.0, 0.5 - 1e-12, 0.5], atol=1e-9)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValidationError):
            pixel_rgb(1.2, 0, 0)


class TestHsvRoundTrip:
    def test_achromatic(self):
        rgb = hsv_to_rgb(HsvImage(np.array([[[0.0, 0.0, 0.7]]])))
        assert np.allclose(rgb.planes, 0.7, atol=0)

    def test_red_sector(self):
        rgb = hsv_to_rgb(HsvImage(np.array([[[0.0, 1.0, 1.0]]])))
        assert np.allclose(rgb.planes[0, 0], [1.0, 0.0, 0.0], atol=0)

    def test_round_trip_10k_random_pixels(self, rng):
        img = random_rgb(rng, 10_000)
        back = hsv_to_rgb(rgb_to_hsv(img))
        assert np.max(np.abs(back.planes - img.planes)) < 1e-9


class TestHvt:
    def test_black_pixel_chroma_zero(self):
        hvi = rgb_to_hvi(pixel_rgb(0, 0, 0))
        assert hvi.hhat[0, 0] == 0.0
        assert hvi.vhat[0, 0] == 0.0
        ck = intensity_collapse(np.zeros((1, 1)), k=1.0, eps=1e-8)
        assert ck[0, 0] == pytest.approx(1e-4)

    def test_pure_red(self):
        hvi = rgb_to_hvi(pixel_rgb(1, 0, 0))
        assert hvi.hhat[0, 0] == pytest.approx(1.0, abs=1e-6)
        assert hvi.vhat[0, 0] == pytest.approx(0.0, abs=1e-6)

    def test_pure_green(self):
        hvi = rgb_to_hvi(pixel_rgb(0, 1, 0))
        assert hvi.hhat[0, 0] == pytest.approx(-0.5, abs=1e-6)
        assert hvi.vhat[0, 0] == pytest.approx(np.sqrt(3) / 2, abs=1e-6)

    def test_chroma_magnitude_equals_ck_times_s(self, rng):
        img = random_rgb(rng, 4096)
        hsv = rgb_to_hsv(img)
        hvi = hvt(hsv)
        ck = intensity_collapse(hsv.v, 1.0, 1e-8)
        mag = np.sqrt(hvi.hhat**2 + hvi.vhat**2)
        assert np.max(np.abs(mag - ck * hsv.s)) < 1e-9


class TestPhvit:
    def test_zero_chroma_maps_to_zero_hue(self):
        hvi = HviImage(np.zeros((1, 1)), np.zeros((1, 1)), np.array([[0.5]]))
        hsv = phvit(hvi)
        assert hsv.h[0, 0] == 0.0
        assert hsv.s[0, 0] == 0.0

    def test_inverts_forward_on_pure_red(self):
        hsv = phvit(rgb_to_hvi(pixel_rgb(1, 0, 0)))
        assert hsv.h[0, 0] == pytest.approx(0.0, abs=1e-5)
        assert hsv.s[0, 0] == pytest.approx(1.0, abs=1e-5)
        assert hsv.v[0, 0] == 1.0

    def test_antipodal_chroma_shifts_hue_half_turn(self, rng):
        img = RgbImage(rng.uniform(0.2, 1.0, size=(1, 64, 3)))
        hvi = rgb_to_hvi(img)
        hsv = phvit(hvi)
        flipped = phvit(
            HviImage(-hvi.hhat, -hvi.vhat, hvi.imax, k=hvi.k, eps=hvi.eps)
        )
        chromatic = hsv.s > 1e-6
        delta = np.mod(flipped.h - hsv.h, 1.0)
        assert np.allclose(delta[chromatic], 0.5, atol=1e-9)
        assert np.allclose(flipped.s, hsv.s, atol=1e-12)

    def test_hue_invariant_under_k(self, rng):
        img = RgbImage(rng.uniform(0.05, 1.0, size=(1, 256, 3)))
        hsv_k1 = phvit(rgb_to_hvi(img, HviParams(k=1.0)), HviParams(k=1.0))
        hsv_k3 = phvit(rgb_to_hvi(img, HviParams(k=3.0)), HviParams(k=3.0))
        chromatic = hsv_k1.s > 1e-6
        assert np.max(np.abs(hsv_k1.h - hsv_k3.h)[chromatic]) < 1e-9


class TestHviRoundTrip:
    def test_grayscale_image_has_zero_chroma(self, rng):
        gray = rng.uniform(0.0, 1.0, size=(4, 5, 1))
        img = RgbImage(np.repeat(gray, 3, axis=2))
        hvi = rgb_to_hvi(img)
        assert np.all(hvi.hhat == 0.0)
        assert np.all(hvi.vhat == 0.0)
        assert np.array_equal(hvi.imax, gray[:, :, 0])

    def test_round_trip_random_image(self, rng):
        img = RgbImage(rng.uniform(0.001, 1.0, size=(32, 32, 3)))
        back = hvi_to_rgb(rgb_to_hvi(img))
        bright = rgb_to_hsv(img).v > 1e-4
        err = np.max(np.abs(back.planes - img.planes), axis=2)
        assert err[bright].max() < 1e-5

    def test_alpha_i_halves_value(self, rng):
        img = RgbImage(rng.uniform(0.1, 1.0, size=(8, 8, 3)))
        p = HviParams(alpha_i=0.5)
        hsv = phvit(rgb_to_hvi(img), p)
        ref = rgb_to_hsv(img)
        assert np.allclose(hsv.v, 0.5 * ref.v, atol=1e-9)
        chromatic = ref.s > 1e-6
        assert np.max(np.abs(hsv.h - ref.h)[chromatic]) < 1e-6

    def test_params_validated(self):
        with pytest.raises(ValidationError):
            HviParams(k=0.0)
        with pytest.raises(ValidationError):
            HviParams(alpha_s=-1.0)


class TestTypeInvariants:
    def test_hvi_chroma_bound_enforced(self):
        with pytest.raises(ValidationError):
            HviImage(np.array([[2.0]]), np.array([[0.0]]), np.array([[1.0]]))

    def test_hsv_achromatic_hue_enforced(self):
        with pytest.raises(ValidationError):
            HsvImage(np.array([[[0.3, 0.0, 0.5]]]))

    def test_hue_range_enforced(self):
        with pytest.raises(ValidationError):
            HsvImage(np.array([[[1.0, 0.5, 0.5]]]))
