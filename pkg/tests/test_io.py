import struct

import numpy as np
import pytest

from derender.fileio import (
    FileFormatError,
    PfmError,
    PngError,
    load_image_png,
    load_mask_png,
    load_pfm,
    png_bytes,
    save_image_png,
    save_mask_png,
    save_pfm,
)


def write_pfm_manual(path, values, header=b"Pf", scale=b"-1.0", byteorder="<"):
    h, w = values.shape[:2]
    with open(path, "wb") as f:
        f.write(header + b"\n")
        f.write(f"{w} {h}\n".encode())
        f.write(scale + b"\n")
        f.write(np.ascontiguousarray(np.flipud(values), dtype=byteorder + "f4").tobytes())


class TestPfm:
    def test_round_trip_grayscale(self, rng, tmp_path):
        for i in range(25):
            m = rng.normal(size=(rng.integers(1, 9), rng.integers(1, 9))).astype(np.float32).astype(np.float64)
            p = tmp_path / f"g{i}.pfm"
            save_pfm(p, m)
            np.testing.assert_array_equal(load_pfm(p), m)

    def test_round_trip_color(self, rng, tmp_path):
        for i in range(25):
            m = rng.random((rng.integers(1, 9), rng.integers(1, 9), 3)).astype(np.float32).astype(np.float64)
            p = tmp_path / f"c{i}.pfm"
            save_pfm(p, m)
            np.testing.assert_array_equal(load_pfm(p), m)

    def test_big_endian_positive_scale(self, tmp_path):
        m = np.array([[1.5, -2.25], [0.0, 8.0]])
        p = tmp_path / "be.pfm"
        write_pfm_manual(p, m, scale=b"1.0", byteorder=">")
        np.testing.assert_array_equal(load_pfm(p), m)

    def test_scale_magnitude_multiplies(self, tmp_path):
        m = np.array([[2.0, 4.0]])
        p = tmp_path / "s.pfm"
        write_pfm_manual(p, m, scale=b"-0.5")
        np.testing.assert_allclose(load_pfm(p), m * 0.5)

    def test_rows_stored_bottom_to_top(self, tmp_path):
        m = np.array([[1.0], [2.0]])
        p = tmp_path / "flip.pfm"
        save_pfm(p, m)
        payload = p.read_bytes().rsplit(b"\n", 1)[1]
        first_stored = struct.unpack("<f", payload[:4])[0]
        assert first_stored == 2.0
        np.testing.assert_array_equal(load_pfm(p), m)

    def test_bad_header(self, tmp_path):
        p = tmp_path / "bad.pfm"
        p.write_bytes(b"P6\n2 2\n-1.0\n" + b"\x00" * 16)
        with pytest.raises(PfmError):
            load_pfm(p)

    def test_bad_dimensions(self, tmp_path):
        p = tmp_path / "bad.pfm"
        p.write_bytes(b"Pf\ntwo 2\n-1.0\n")
        with pytest.raises(PfmError):
            load_pfm(p)

    def test_zero_scale(self, tmp_path):
        p = tmp_path / "bad.pfm"
        p.write_bytes(b"Pf\n1 1\n0.0\n" + b"\x00" * 4)
        with pytest.raises(PfmError):
            load_pfm(p)

    def test_truncated_payload(self, tmp_path):
        p = tmp_path / "bad.pfm"
        p.write_bytes(b"Pf\n4 4\n-1.0\n" + b"\x00" * 8)
        with pytest.raises(PfmError):
            load_pfm(p)

    def test_reject_nan_option(self, tmp_path):
        p = tmp_path / "nan.pfm"
        write_pfm_manual(p, np.array([[np.nan]]))
        load_pfm(p)
        with pytest.raises(PfmError):
            load_pfm(p, reject_nan=True)

    def test_bad_shape_on_save(self, tmp_path):
        with pytest.raises(PfmError):
            save_pfm(tmp_path / "x.pfm", np.zeros((2, 2, 4)))

    def test_errors_are_file_format_errors(self, tmp_path):
        p = tmp_path / "bad.pfm"
        p.write_bytes(b"nonsense")
        with pytest.raises(FileFormatError):
            load_pfm(p)


class TestPng:
    def test_round_trip_exact_bytes(self, rng, tmp_path):
        for i in range(25):
            img = rng.integers(0, 256, (rng.integers(1, 9), rng.integers(1, 9), 3)) / 255.0
            p = tmp_path / f"i{i}.png"
            save_image_png(p, img)
            np.testing.assert_array_equal(load_image_png(p), img)

    def test_extreme_byte_values(self, tmp_path):
        img = np.array([[[0.0, 128 / 255.0, 1.0]]])
        p = tmp_path / "e.png"
        save_image_png(p, img)
        np.testing.assert_array_equal(load_image_png(p), img)

    def test_quantization_rounds_to_nearest(self, tmp_path):
        p = tmp_path / "q.png"
        save_image_png(p, np.full((1, 1, 3), 0.5))
        np.testing.assert_array_equal(load_image_png(p), 128 / 255.0)

    def test_16_bit_rejected(self, tmp_path):
        from PIL import Image as PILImage

        p = tmp_path / "deep.png"
        PILImage.new("I;16", (2, 2)).save(p)
        with pytest.raises(PngError):
            load_image_png(p)
        with pytest.raises(PngError):
            load_mask_png(p)

    def test_bad_shape_on_save(self, tmp_path):
        with pytest.raises(PngError):
            save_image_png(tmp_path / "x.png", np.zeros((2, 2)))

    def test_mask_round_trip(self, rng, tmp_path):
        mask = rng.random((6, 7)) < 0.5
        p = tmp_path / "m.png"
        save_mask_png(p, mask)
        np.testing.assert_array_equal(load_mask_png(p), mask)

    def test_mask_threshold_above_127(self, tmp_path):
        from PIL import Image as PILImage

        p = tmp_path / "t.png"
        PILImage.fromarray(np.array([[0, 127, 128, 255]], dtype=np.uint8), mode="L").save(p)
        np.testing.assert_array_equal(load_mask_png(p), [[False, False, True, True]])

    def test_mask_rejects_rgb(self, tmp_path):
        p = tmp_path / "rgb.png"
        save_image_png(p, np.zeros((2, 2, 3)))
        with pytest.raises(PngError):
            load_mask_png(p)

    def test_png_bytes_deterministic(self, rng):
        img = rng.random((8, 8, 3))
        assert png_bytes(img) == png_bytes(img.copy())

    def test_png_bytes_grayscale_promoted(self):
        b = png_bytes(np.zeros((4, 4)))
        assert b.startswith(b"\x89PNG")
