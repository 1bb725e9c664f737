import numpy as np
import pytest

from vcr.colorspace import HviParams, RgbImage, rgb_to_hvi
from vcr.errors import FileFormatError
from vcr.imgio import (
    load_hvi,
    read_image,
    read_pfm,
    save_hvi,
    sidecar_path,
    write_image,
    write_pfm,
)


class TestPng:
    def test_8bit_round_trip_quantized(self, tmp_path, rng):
        img = RgbImage(rng.uniform(size=(12, 10, 3)))
        path = tmp_path / "img.png"
        write_image(path, img, bit_depth=8)
        back = read_image(path)
        assert back.planes.shape == (12, 10, 3)
        assert np.max(np.abs(back.planes - img.planes)) <= 0.5 / 255.0 + 1e-12

    def test_16bit_round_trip_quantized(self, tmp_path, rng):
        img = RgbImage(rng.uniform(size=(8, 8, 3)))
        path = tmp_path / "img16.png"
        write_image(path, img, bit_depth=16)
        back = read_image(path)
        assert np.max(np.abs(back.planes - img.planes)) <= 0.5 / 65535.0 + 1e-12

    def test_exact_levels_preserved(self, tmp_path):
        # 8-bit levels map linearly and survive the round trip exactly
        levels = np.array([0, 1, 127, 128, 254, 255]) / 255.0
        img = RgbImage(np.tile(levels[None, :, None], (2, 1, 3)))
        path = tmp_path / "levels.png"
        write_image(path, img, bit_depth=8)
        assert np.array_equal(read_image(path).planes, img.planes)

    def test_channel_order_is_rgb(self, tmp_path):
        img = RgbImage(np.array([[[1.0, 0.5, 0.0]]]))
        path = tmp_path / "order.png"
        write_image(path, img, bit_depth=8)
        back = read_image(path)
        assert back.planes[0, 0, 0] == pytest.approx(1.0)
        assert back.planes[0, 0, 2] == pytest.approx(0.0)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileFormatError):
            read_image(tmp_path / "nope.png")


class TestPfm:
    def test_float_round_trip(self, tmp_path, rng):
        planes = rng.uniform(size=(6, 9, 3)).astype(np.float32).astype(np.float64)
        path = tmp_path / "img.pfm"
        write_pfm(path, planes)
        assert np.array_equal(read_pfm(path), planes)

    def test_read_image_dispatches_on_extension(self, tmp_path, rng):
        planes = rng.uniform(size=(5, 5, 3)).astype(np.float32).astype(np.float64)
        path = tmp_path / "img.pfm"
        write_image(path, RgbImage(planes))
        assert np.array_equal(read_image(path).planes, planes)

    def test_grayscale_pfm_replicated(self, tmp_path):
        path = tmp_path / "gray.pfm"
        data = np.arange(6, dtype="<f4").reshape(2, 3) / 10.0
        with open(path, "wb") as fh:
            fh.write(b"Pf\n3 2\n-1.0\n")
            fh.write(data[::-1].tobytes())
        arr = read_pfm(path)
        assert arr.shape == (2, 3, 3)
        assert np.array_equal(arr[:, :, 0], arr[:, :, 1])
        # scanlines are stored bottom-up, so reading undoes the flip we wrote
        assert np.array_equal(arr[:, :, 0], data.astype(np.float64))

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.pfm"
        path.write_bytes(b"P6\n1 1\n255\n\x00\x00\x00")
        with pytest.raises(FileFormatError):
            read_pfm(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "short.pfm"
        path.write_bytes(b"PF\n4 4\n-1.0\n" + b"\x00" * 10)
        with pytest.raises(FileFormatError):
            read_pfm(path)


class TestHviSerialization:
    def test_round_trip_preserves_planes_and_params(self, tmp_path, rng):
        img = RgbImage(rng.uniform(0.05, 1.0, size=(7, 5, 3)))
        params = HviParams(k=1.5, alpha_s=0.9, alpha_i=1.1)
        hvi = rgb_to_hvi(img, params)
        path = tmp_path / "img.vct"
        save_hvi(path, hvi, params)
        loaded, loaded_params = load_hvi(path)
        assert loaded_params == params
        assert np.array_equal(loaded.hhat, hvi.hhat)
        assert np.array_equal(loaded.vhat, hvi.vhat)
        assert np.array_equal(loaded.imax, hvi.imax)

    def test_missing_sidecar_message_names_file(self, tmp_path, rng):
        img = RgbImage(rng.uniform(0.05, 1.0, size=(4, 4, 3)))
        path = tmp_path / "img.vct"
        save_hvi(path, rgb_to_hvi(img), HviParams())
        (tmp_path / sidecar_path(path).split("/")[-1]).unlink()
        with pytest.raises(FileFormatError, match="img.vct.meta"):
            load_hvi(path)

    def test_malformed_sidecar(self, tmp_path, rng):
        img = RgbImage(rng.uniform(0.05, 1.0, size=(4, 4, 3)))
        path = tmp_path / "img.vct"
        save_hvi(path, rgb_to_hvi(img), HviParams())
        with open(sidecar_path(path), "w") as fh:
            fh.write("k 1.0\n")
        with pytest.raises(FileFormatError):
            load_hvi(path)

    def test_wrong_tensor_shape_rejected(self, tmp_path):
        from vcr.tensor import save_tensor

        path = tmp_path / "bad.vct"
        save_tensor(path, np.zeros((2, 4, 4)))
        with open(sidecar_path(path), "w") as fh:
            fh.write("k = 1.0\neps = 1e-08\nalpha_s = 1.0\nalpha_i = 1.0\n")
        with pytest.raises(FileFormatError):
            load_hvi(path)
