import numpy as np
import pytest

from fsnav.errors import ImageTooSmall, InvalidChannels
from fsnav.imaging import (
    LAPLACIAN,
    SOBEL_X,
    SOBEL_Y,
    CropMeta,
    blur_factor,
    convolve3x3,
    gradient_stack,
    preprocess_frame,
    save_gradient_planes,
    to_grayscale,
)
from fsnav.netpbm import read_pnm

from oracles import naive_blur_beta, naive_convolve3x3, naive_downsample2x


def solid_rgb(r, g, b, h=4, w=4):
    img = np.zeros((h, w, 3), dtype=np.uint8)
    img[:] = (r, g, b)
    return img


class TestGrayscale:
    def test_black(self):
        assert np.all(to_grayscale(solid_rgb(0, 0, 0)) == 0)

    def test_white(self):
        assert np.all(to_grayscale(solid_rgb(255, 255, 255)) == 255)

    def test_pure_red(self):
        # round(0.299 * 255) = 76
        assert np.all(to_grayscale(solid_rgb(255, 0, 0)) == 76)

    def test_rejects_gray_input(self):
        with pytest.raises(InvalidChannels):
            to_grayscale(np.zeros((4, 4), dtype=np.uint8))


class TestConvolve3x3:
    def test_constant_image_laplacian_is_zero(self):
        img = np.full((5, 7), 9.0, dtype=np.float32)
        assert np.all(convolve3x3(img, LAPLACIAN) == 0.0)

    def test_identity_kernel(self):
        rng = np.random.default_rng(1)
        img = rng.integers(0, 256, (6, 6)).astype(np.float32)
        ident = np.zeros((3, 3), dtype=np.float32)
        ident[1, 1] = 1.0
        assert np.array_equal(convolve3x3(img, ident), img)

    def test_ramp_laplacian_hand_values(self):
        ramp = np.arange(9, dtype=np.float32).reshape(3, 3)
        out = convolve3x3(ramp, LAPLACIAN)
        # hand convolution with replicate padding: center 0, corners +-4
        assert out[1, 1] == 0.0
        assert out[0, 0] == -4.0
        assert out[2, 2] == 4.0

    def test_matches_naive_oracle_on_random_images(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            h, w = rng.integers(3, 65, 2)
            img = rng.integers(0, 256, (h, w)).astype(np.float32)
            kernel = rng.normal(size=(3, 3)).astype(np.float32)
            got = convolve3x3(img, kernel)
            want = naive_convolve3x3(img, kernel)
            np.testing.assert_allclose(got, want, atol=1e-4)

    def test_too_small(self):
        with pytest.raises(ImageTooSmall):
            convolve3x3(np.zeros((2, 5), dtype=np.float32), LAPLACIAN)


class TestGradientStack:
    def test_constant_is_zero(self):
        stack = gradient_stack(np.full((8, 8), 77, dtype=np.uint8))
        for plane in (stack.sobel_x, stack.sobel_y, stack.laplacian):
            assert np.all(plane == 0.0)

    def test_vertical_step_edge(self):
        gray = np.zeros((8, 8), dtype=np.uint8)
        gray[:, 4:] = 200
        stack = gradient_stack(gray)
        assert np.any(stack.sobel_x != 0.0)
        assert np.all(stack.sobel_y == 0.0)

    def test_matches_bruteforce_on_random_image(self):
        rng = np.random.default_rng(3)
        gray = rng.integers(0, 256, (8, 8)).astype(np.uint8)
        stack = gradient_stack(gray)
        for plane, kernel in (
            (stack.sobel_x, SOBEL_X),
            (stack.sobel_y, SOBEL_Y),
            (stack.laplacian, LAPLACIAN),
        ):
            want = naive_downsample2x(naive_convolve3x3(gray, kernel))
            np.testing.assert_allclose(plane, want, atol=1e-4)

    def test_half_resolution(self):
        stack = gradient_stack(np.zeros((224, 224), dtype=np.uint8))
        assert stack.sobel_x.shape == (112, 112)
        assert stack.sobel_y.shape == stack.laplacian.shape == (112, 112)


class TestBlurFactor:
    def test_constant_image_beta_zero(self):
        assert blur_factor(np.full((16, 16), 123, dtype=np.uint8)).beta == 0.0

    def test_doubling_scales_beta_by_four_exactly(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            gray = rng.integers(0, 128, (12, 12)).astype(np.uint8)
            b1 = blur_factor(gray).beta
            b2 = blur_factor((2 * gray.astype(np.uint16)).astype(np.uint8)).beta
            assert b2 == 4.0 * b1

    def test_checkerboard_value_from_bruteforce(self):
        cb = np.zeros((4, 4), dtype=np.uint8)
        cb[::2, ::2] = 255
        cb[1::2, 1::2] = 255
        bf = blur_factor(cb)
        # frozen from the independent term-by-term evaluation
        assert bf.beta == 520200.0
        assert bf.beta_mean_abs == 765.0
        assert bf.beta == naive_blur_beta(cb)

    def test_normalized_is_beta_over_pixel_count(self):
        rng = np.random.default_rng(5)
        gray = rng.integers(0, 256, (10, 14)).astype(np.uint8)
        raw = blur_factor(gray)
        norm = blur_factor(gray, normalized=True)
        assert norm.beta == pytest.approx(raw.beta / gray.size, rel=1e-12)


class TestPreprocessFrame:
    def test_endpoint_and_midpoint_mapping(self):
        rgb = np.zeros((300, 300, 3), dtype=np.uint8)
        rgb[:, :150] = 0
        rgb[:, 150:] = 255
        tensor, _ = preprocess_frame(rgb)
        assert tensor.min() == pytest.approx(-1.0)
        assert tensor.max() == pytest.approx(1.0)
        mid = preprocess_frame(np.full((300, 300, 3), 128, dtype=np.uint8))[0]
        assert np.allclose(mid, 2 * 128 / 255 - 1, atol=1e-6)  # ~0.0039216

    def test_crop_metadata_for_300px_frame(self):
        tensor, meta = preprocess_frame(np.zeros((300, 300, 3), dtype=np.uint8))
        assert tensor.shape == (224, 224, 3)
        assert meta.offset_y == 100
        assert meta.crop_height == 200
        assert meta.scale_y == pytest.approx(200 / 224)
        assert meta.scale_x == pytest.approx(300 / 224)

    def test_affine_and_monotone_per_channel(self):
        rng = np.random.default_rng(2)
        base = rng.integers(0, 100, (90, 60, 3)).astype(np.uint8)
        lo, _ = preprocess_frame(base)
        hi, _ = preprocess_frame(base + 50)
        # adding a constant to every pixel shifts the output by 2*50/255
        np.testing.assert_allclose(hi - lo, 2 * 50 / 255, atol=1e-5)
        assert np.all(hi > lo)

    def test_roundtrip_coordinates_within_one_pixel(self):
        _, meta = preprocess_frame(np.zeros((336, 224, 3), dtype=np.uint8))
        # map a 224-space coordinate to source and back
        for v in (0, 100, 223):
            v_src = meta.offset_y + v * meta.scale_y
            v_back = (v_src - meta.offset_y) / meta.scale_y
            assert abs(v_back - v) <= 1.0

    def test_too_small(self):
        with pytest.raises(ImageTooSmall):
            preprocess_frame(np.zeros((2, 5, 3), dtype=np.uint8))


def test_gradient_plane_export_roundtrip(tmp_path):
    rng = np.random.default_rng(9)
    gray = rng.integers(0, 256, (16, 16)).astype(np.uint8)
    stack = gradient_stack(gray)
    sidecar = save_gradient_planes(stack, tmp_path, stem="t")
    for name, plane in (("sobel_x", stack.sobel_x), ("laplacian", stack.laplacian)):
        entry = sidecar["planes"][name]
        encoded = read_pnm(tmp_path / entry["file"])
        m = entry["max_abs"] or 1.0
        decoded = (encoded.astype(np.float64) / 32767.5 - 1.0) * m
        np.testing.assert_allclose(decoded, plane, atol=m / 32767.5 + 1e-9)
