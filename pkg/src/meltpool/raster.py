"""Image and mask representation, file I/O, resizing, color conversion.

Conventions used across the whole package:

* an image ("raster") is a float ndarray of shape (H, W) for grayscale or
  (H, W, 3) for color, with every intensity in [0, 1],
* a mask is a bool ndarray of shape (H, W), True = melt pool,
* masks on disk are single-channel 8-bit PNGs with background 0 and
  melt pool 255, bit-exact.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

# ITU-R 601 luminance weights, a convex combination.
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

SUPPORTED_EXTENSIONS = {".png", ".tif", ".tiff", ".jpg", ".jpeg", ".bmp"}


class RasterError(ValueError):
    """Raised for unreadable, unsupported or malformed image files."""


def validate_raster(image: np.ndarray) -> np.ndarray:
    """Check image shape/range conventions and return the array unchanged."""
    image = np.asarray(image)
    if image.ndim == 2:
        pass
    elif image.ndim == 3 and image.shape[2] == 3:
        pass
    else:
        raise RasterError(f"expected (H, W) or (H, W, 3) array, got shape {image.shape}")
    if image.shape[0] < 1 or image.shape[1] < 1:
        raise RasterError(f"degenerate image dimensions {image.shape}")
    if not np.issubdtype(image.dtype, np.floating):
        raise RasterError(f"expected float intensities in [0, 1], got dtype {image.dtype}")
    lo, hi = float(image.min()), float(image.max())
    if lo < 0.0 or hi > 1.0:
        raise RasterError(f"intensities outside [0, 1]: min={lo}, max={hi}")
    return image


def validate_mask(mask: np.ndarray) -> np.ndarray:
    """Check mask conventions (2-d bool) and return the array as bool."""
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise RasterError(f"expected (H, W) mask, got shape {mask.shape}")
    if mask.dtype != bool:
        values = np.unique(mask)
        if not np.isin(values, (0, 1)).all():
            raise RasterError(f"mask is not binary, found values {values[:8]}")
        mask = mask.astype(bool)
    return mask


def load_raster(path: str | os.PathLike) -> np.ndarray:
    """Load a PNG/TIFF/JPEG/BMP image as unit-interval intensities.

    Grayscale sources give an (H, W) array, color sources (H, W, 3);
    8-bit values are scaled by 1/255.
    """
    path = os.fspath(path)
    if not os.path.exists(path):
        raise RasterError(f"image file not found: {path}")
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            if mode in ("I", "I;16", "I;16B", "I;16L", "F"):
                raise RasterError(f"unsupported bit depth ({mode}) in {path}")
            if mode in ("L", "1"):
                arr = np.asarray(img.convert("L"), dtype=np.float64)
            elif mode == "LA":
                arr = np.asarray(img.convert("L"), dtype=np.float64)
            else:
                arr = np.asarray(img.convert("RGB"), dtype=np.float64)
    except RasterError:
        raise
    except Exception as exc:
        raise RasterError(f"cannot decode image {path}: {exc}") from exc
    return validate_raster(arr / 255.0)


def save_mask(mask: np.ndarray, path: str | os.PathLike) -> None:
    """Write a mask as a single-channel 8-bit PNG (0 background, 255 pool)."""
    mask = validate_mask(mask)
    out = np.where(mask, np.uint8(255), np.uint8(0))
    Image.fromarray(out, mode="L").save(os.fspath(path), format="PNG")


def load_mask(path: str | os.PathLike) -> np.ndarray:
    """Load a mask PNG, rejecting any pixel value other than 0 or 255."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise RasterError(f"mask file not found: {path}")
    try:
        with Image.open(path) as img:
            img.load()
            if img.mode != "L":
                raise RasterError(f"mask {path} is not single-channel 8-bit (mode {img.mode})")
            arr = np.asarray(img, dtype=np.uint8)
    except RasterError:
        raise
    except Exception as exc:
        raise RasterError(f"cannot decode mask {path}: {exc}") from exc
    bad = (arr != 0) & (arr != 255)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise RasterError(
            f"mask {path} is not binary: value {arr[r, c]} at pixel (row={r}, col={c})"
        )
    return arr == 255


def _resize_array(arr: np.ndarray, width: int, height: int, resample) -> np.ndarray:
    return np.asarray(
        Image.fromarray(arr.astype(np.float32), mode="F").resize((width, height), resample),
        dtype=np.float64,
    )


def resize_image(image: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear resize of a grayscale or color image."""
    image = validate_raster(image)
    if image.shape[:2] == (height, width):
        return image.copy()
    if image.ndim == 2:
        out = _resize_array(image, width, height, Image.BILINEAR)
    else:
        out = np.stack(
            [_resize_array(image[:, :, c], width, height, Image.BILINEAR) for c in range(3)],
            axis=2,
        )
    # Bilinear interpolation of in-range values can pick up float round-off.
    return np.clip(out, 0.0, 1.0)


def resize_mask(mask: np.ndarray, width: int, height: int) -> np.ndarray:
    """Nearest-neighbor resize of a mask; stays strictly binary.

    Destination pixel (i, j) samples source pixel
    (floor((i + 0.5) * H / height), floor((j + 0.5) * W / width)).
    """
    mask = validate_mask(mask)
    if mask.shape == (height, width):
        return mask.copy()
    out = np.asarray(
        Image.fromarray(mask.astype(np.uint8) * 255, mode="L").resize(
            (width, height), Image.NEAREST
        )
    )
    return out > 0


def resize_pair(
    image: np.ndarray, mask: np.ndarray | None, side: int
) -> tuple[np.ndarray, np.ndarray | None]:
    """Rescale an image (bilinear) and its mask (nearest) to side x side.

    The aspect ratio is not preserved: this is a pure rescale, matching the
    square network input. Metrology always runs at original resolution.
    """
    if side < 16:
        raise ValueError(f"target side must be >= 16, got {side}")
    image_out = resize_image(image, side, side)
    mask_out = None
    if mask is not None:
        mask = validate_mask(mask)
        if mask.shape != image.shape[:2]:
            raise ValueError(f"mask shape {mask.shape} != image shape {image.shape[:2]}")
        mask_out = resize_mask(mask, side, side)
    return image_out, mask_out


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """Collapse a color image to luminance; grayscale passes through."""
    image = validate_raster(image)
    if image.ndim == 2:
        return image.copy()
    return np.clip(image @ LUMA_WEIGHTS, 0.0, 1.0)


def decode_raster(data: bytes) -> np.ndarray:
    """Decode in-memory image bytes (PNG/TIFF/JPEG/BMP) like load_raster."""
    import io

    try:
        with Image.open(io.BytesIO(data)) as img:
            img.load()
            mode = img.mode
            if mode in ("I", "I;16", "I;16B", "I;16L", "F"):
                raise RasterError(f"unsupported bit depth ({mode})")
            if mode in ("L", "1", "LA"):
                arr = np.asarray(img.convert("L"), dtype=np.float64)
            else:
                arr = np.asarray(img.convert("RGB"), dtype=np.float64)
    except RasterError:
        raise
    except Exception as exc:
        raise RasterError(f"cannot decode image bytes: {exc}") from exc
    return validate_raster(arr / 255.0)


def encode_mask_png(mask: np.ndarray) -> bytes:
    """Mask as PNG bytes, same bit-exact format as save_mask."""
    import io

    mask = validate_mask(mask)
    out = np.where(mask, np.uint8(255), np.uint8(0))
    buf = io.BytesIO()
    Image.fromarray(out, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def encode_image_png(image: np.ndarray) -> bytes:
    """Image as 8-bit PNG bytes."""
    import io

    image = validate_raster(image)
    arr = np.round(image * 255.0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L" if arr.ndim == 2 else "RGB").save(buf, format="PNG")
    return buf.getvalue()


def save_image(image: np.ndarray, path: str | os.PathLike) -> None:
    """Write an image as an 8-bit PNG (utility for demos and overlays)."""
    image = validate_raster(image)
    arr = np.round(image * 255.0).astype(np.uint8)
    mode = "L" if arr.ndim == 2 else "RGB"
    Image.fromarray(arr, mode=mode).save(os.fspath(path), format="PNG")
