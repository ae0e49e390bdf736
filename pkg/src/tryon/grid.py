"""Raster primitives: grids, binary masks, PNG I/O, and compositing.

Images are held as float64 arrays in [0, 1]; latents and noise fields reuse
the same container without the range constraint. Quantization to 8 bits
happens only when a grid is written to disk (round-half-up), so one
save/load cycle perturbs each value by at most 1/510.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, RangeError, ShapeError, UnsupportedFormatError

# PNG modes we accept, mapped to channel count. Everything else (palette,
# 16-bit, any alpha variant) is rejected rather than silently converted.
_IMAGE_MODES = {"L": 1, "RGB": 3}


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Grid2D:
    """H x W x C raster of finite float64 values.

    The constructor copies its input and marks the copy read-only, so grids
    can be shared across threads freely.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.values, dtype=np.float64, order="C")
        if arr.ndim != 3:
            raise ShapeError(f"grid must be HxWxC, got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ShapeError(f"grid dimensions must be positive, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise RangeError("grid values must be finite")
        object.__setattr__(self, "values", _frozen(arr))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    def is_image_kind(self) -> bool:
        """True when every value lies in [0, 1]."""
        return bool(self.values.min() >= 0.0 and self.values.max() <= 1.0)


@dataclass(frozen=True, eq=False)
class Mask:
    """H x W binary mask; 1 marks the editable region."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values)
        if arr.ndim != 2:
            raise ShapeError(f"mask must be HxW, got shape {arr.shape}")
        if min(arr.shape) < 1:
            raise ShapeError(f"mask dimensions must be positive, got {arr.shape}")
        if not np.all(np.isin(arr, (0, 1))):
            raise RangeError("mask values must be exactly 0 or 1")
        object.__setattr__(self, "values", _frozen(arr.astype(np.uint8)))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def selector(self) -> np.ndarray:
        """Boolean (H, W) view of the mask."""
        return self.values.astype(bool)


@dataclass(frozen=True, eq=False)
class ConditionSet:
    """Garment reference, edit mask, and dense body map for one denoiser call."""

    garment: Grid2D
    mask: Mask
    densepose: Grid2D

    def __post_init__(self) -> None:
        dims = {
            (self.garment.height, self.garment.width),
            (self.mask.height, self.mask.width),
            (self.densepose.height, self.densepose.width),
        }
        if len(dims) != 1:
            raise ShapeError(f"condition rasters disagree on spatial dims: {sorted(dims)}")

    @property
    def height(self) -> int:
        return self.mask.height

    @property
    def width(self) -> int:
        return self.mask.width


def load_image(path: str | Path) -> Grid2D:
    """Decode an 8-bit grayscale or RGB PNG into a [0, 1] grid.

    Byte c maps to c/255 exactly. Alpha, palette, and >8-bit files raise
    UnsupportedFormatError; undecodable files raise DecodeError; a missing
    file raises the usual FileNotFoundError.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        try:
            img = Image.open(fh)
            img.load()
        except UnidentifiedImageError as exc:
            raise DecodeError(f"{path}: not a decodable image") from exc
        except OSError as exc:
            raise DecodeError(f"{path}: truncated or corrupt image") from exc
    if img.mode not in _IMAGE_MODES:
        raise UnsupportedFormatError(
            f"{path}: mode {img.mode!r} not supported (8-bit L or RGB only, no alpha)"
        )
    arr = np.asarray(img, dtype=np.uint8)
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    return Grid2D(arr.astype(np.float64) / 255.0)


def save_image(grid: Grid2D, path: str | Path) -> None:
    """Write a [0, 1] grid as an 8-bit PNG (round-half-up quantization)."""
    if not grid.is_image_kind():
        raise RangeError("grid has values outside [0, 1]; clamp before saving")
    data = np.floor(grid.values * 255.0 + 0.5).astype(np.uint8)
    if grid.channels == 1:
        img = Image.fromarray(data[:, :, 0], mode="L")
    elif grid.channels == 3:
        img = Image.fromarray(data, mode="RGB")
    else:
        raise UnsupportedFormatError(f"cannot encode {grid.channels}-channel grid as PNG")
    img.save(Path(path), format="PNG")


def quantize_image(grid: Grid2D) -> Grid2D:
    """Apply one 8-bit save/load cycle in memory.

    Bit-identical to save_image followed by load_image; a fixed point of
    itself, so quantized grids survive further round trips unchanged.
    """
    if not grid.is_image_kind():
        raise RangeError("grid has values outside [0, 1]")
    data = np.floor(grid.values * 255.0 + 0.5)
    return Grid2D(data / 255.0)


def load_mask(path: str | Path) -> Mask:
    """Load a binary mask from a grayscale PNG whose bytes are 0 or 255."""
    grid = load_image(path)
    if grid.channels != 1:
        raise UnsupportedFormatError(f"{path}: mask PNG must be grayscale")
    vals = grid.values[:, :, 0]
    if not np.all(np.isin(vals, (0.0, 1.0))):
        raise RangeError(f"{path}: mask pixels must be byte 0 or 255")
    return Mask(vals.astype(np.uint8))


def save_mask(mask: Mask, path: str | Path) -> None:
    """Write a binary mask as a 0/255 grayscale PNG."""
    grid = Grid2D(mask.values.astype(np.float64)[:, :, np.newaxis])
    save_image(grid, path)


def composite(fg: Grid2D, bg: Grid2D, mask: Mask) -> Grid2D:
    """Per-pixel select: fg where mask is 1, bg elsewhere. No blending."""
    if fg.shape != bg.shape:
        raise ShapeError(f"foreground {fg.shape} vs background {bg.shape}")
    if (mask.height, mask.width) != (fg.height, fg.width):
        raise ShapeError(
            f"mask {(mask.height, mask.width)} vs grid {(fg.height, fg.width)}"
        )
    out = np.where(mask.selector()[:, :, np.newaxis], fg.values, bg.values)
    return Grid2D(out)


def constant_grid(height: int, width: int, channels: int, value: float) -> Grid2D:
    """Uniform grid filled with one value."""
    return Grid2D(np.full((height, width, channels), value, dtype=np.float64))
