import numpy as np
import pytest
from PIL import Image

from meltpool import raster


def test_load_all_white_png(tmp_path):
    path = tmp_path / "white.png"
    Image.fromarray(np.full((2, 2), 255, np.uint8), mode="L").save(path)
    img = raster.load_raster(path)
    assert img.shape == (2, 2)
    assert np.all(img == 1.0)


def test_load_all_black_png(tmp_path):
    path = tmp_path / "black.png"
    Image.fromarray(np.zeros((2, 2), np.uint8), mode="L").save(path)
    assert np.all(raster.load_raster(path) == 0.0)


def test_load_scales_by_255(tmp_path):
    path = tmp_path / "mid.png"
    Image.fromarray(np.full((3, 3), 128, np.uint8), mode="L").save(path)
    img = raster.load_raster(path)
    assert np.allclose(img, 128 / 255)


def test_load_color_gives_three_channels(tmp_path):
    path = tmp_path / "rgb.png"
    arr = np.zeros((4, 5, 3), np.uint8)
    arr[..., 0] = 200
    Image.fromarray(arr, mode="RGB").save(path)
    img = raster.load_raster(path)
    assert img.shape == (4, 5, 3)
    assert np.allclose(img[..., 0], 200 / 255)


def test_load_missing_file_names_path():
    with pytest.raises(raster.RasterError, match="no/such/file.png"):
        raster.load_raster("no/such/file.png")


def test_load_corrupt_file(tmp_path):
    path = tmp_path / "junk.png"
    path.write_bytes(b"this is not an image")
    with pytest.raises(raster.RasterError):
        raster.load_raster(path)


def test_mask_round_trip_empty(tmp_path):
    mask = np.zeros((5, 7), bool)
    raster.save_mask(mask, tmp_path / "m.png")
    assert np.array_equal(raster.load_mask(tmp_path / "m.png"), mask)


def test_mask_round_trip_single_pixel(tmp_path):
    mask = np.zeros((5, 7), bool)
    mask[2, 3] = True
    raster.save_mask(mask, tmp_path / "m.png")
    assert np.array_equal(raster.load_mask(tmp_path / "m.png"), mask)


def test_mask_round_trip_random(tmp_path):
    rng = np.random.default_rng(0)
    for i in range(5):
        mask = rng.random((9, 11)) > 0.5
        raster.save_mask(mask, tmp_path / f"m{i}.png")
        assert np.array_equal(raster.load_mask(tmp_path / f"m{i}.png"), mask)


def test_mask_format_is_0_255_single_channel(tmp_path):
    mask = np.zeros((3, 3), bool)
    mask[1, 1] = True
    raster.save_mask(mask, tmp_path / "m.png")
    with Image.open(tmp_path / "m.png") as img:
        assert img.mode == "L"
        arr = np.asarray(img)
    assert arr[1, 1] == 255 and arr[0, 0] == 0


def test_load_mask_rejects_non_binary_with_pixel(tmp_path):
    arr = np.zeros((4, 4), np.uint8)
    arr[2, 1] = 17
    Image.fromarray(arr, mode="L").save(tmp_path / "bad.png")
    with pytest.raises(raster.RasterError, match=r"17.*row=2.*col=1"):
        raster.load_mask(tmp_path / "bad.png")


def test_resize_pair_dimensions():
    img = np.random.default_rng(1).random((1024, 1024))
    mask = img > 0.5
    out_img, out_mask = raster.resize_pair(img, mask, 512)
    assert out_img.shape == (512, 512)
    assert out_mask.shape == (512, 512)
    assert out_mask.dtype == bool


def test_resize_constant_image_stays_constant():
    img = np.full((37, 81), 0.42)
    out, _ = raster.resize_pair(img, None, 64)
    assert np.allclose(out, 0.42, atol=1e-6)


def test_resize_identity_when_same_size():
    rng = np.random.default_rng(2)
    img = rng.random((64, 64))
    mask = img > 0.5
    out_img, out_mask = raster.resize_pair(img, mask, 64)
    assert np.array_equal(out_img, img)
    assert np.array_equal(out_mask, mask)


def test_mask_resize_nearest_neighbor_index_mapping():
    # Destination (i, j) samples source (floor((i+.5)*H/h), floor((j+.5)*W/w)).
    mask = np.array(
        [
            [1, 0, 1, 0],
            [0, 1, 0, 1],
            [1, 0, 1, 0],
            [0, 1, 0, 1],
        ],
        dtype=bool,
    )
    out = raster.resize_mask(mask, 2, 2)
    expected = np.zeros((2, 2), bool)
    for i in range(2):
        for j in range(2):
            expected[i, j] = mask[int((i + 0.5) * 2), int((j + 0.5) * 2)]
    assert np.array_equal(out, expected)


def test_resize_rejects_small_side():
    with pytest.raises(ValueError):
        raster.resize_pair(np.zeros((32, 32)) + 0.5, None, 8)


def test_grayscale_identity_on_grayscale():
    img = np.random.default_rng(3).random((10, 10))
    assert np.array_equal(raster.to_grayscale(img), img)


def test_grayscale_white_is_one():
    img = np.ones((4, 4, 3))
    assert np.allclose(raster.to_grayscale(img), 1.0)


def test_grayscale_pure_red_weight():
    img = np.zeros((4, 4, 3))
    img[..., 0] = 1.0
    assert np.allclose(raster.to_grayscale(img), 0.299)


def test_grayscale_range_preserved():
    rng = np.random.default_rng(4)
    for _ in range(10):
        img = rng.random((8, 8, 3))
        gray = raster.to_grayscale(img)
        assert gray.min() >= 0.0 and gray.max() <= 1.0


def test_validate_rejects_out_of_range():
    with pytest.raises(raster.RasterError):
        raster.validate_raster(np.full((3, 3), 1.5))


def test_decode_encode_round_trip():
    rng = np.random.default_rng(5)
    mask = rng.random((12, 9)) > 0.4
    data = raster.encode_mask_png(mask)
    decoded = raster.decode_raster(data)
    assert np.array_equal(decoded == 1.0, mask)
