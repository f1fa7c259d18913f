"""Image container, 8-bit raster I/O and bilinear resizing.

Images are stored channel-last: ``data`` has shape (height, width, channels)
with float64 intensities in [0, 1].
"""

from pathlib import Path
from typing import Union

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image as PILImage
from PIL import UnidentifiedImageError
from pydantic import BaseModel, ConfigDict, field_validator

from fastnet_dehazing.errors import (
    CorruptImageError,
    ImageNotFoundError,
    ImageWriteError,
    InvalidParameterError,
    UnsupportedImageError,
)

PathLike = Union[str, Path]

_FORMATS = {".png": "PNG", ".ppm": "PPM", ".pgm": "PPM"}
_READ_FORMATS = ("PNG", "PPM")
_MODES = {"L": 1, "RGB": 3}


class ArrayModel(BaseModel):
    """Base for validated numpy-carrying records."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


class Image(ArrayModel):
    """H x W x C raster of intensities in [0, 1] (channel-last, row-major)."""

    data: np.ndarray

    @field_validator("data", mode="before")
    @classmethod
    def _validate_data(cls, value):
        arr = np.ascontiguousarray(np.asarray(value, dtype=np.float64))
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3 or arr.shape[2] not in (1, 3):
            raise ValueError(f"expected H x W x {{1,3}} data, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image must be at least 1 x 1")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("image intensities must lie in [0, 1]")
        return arr

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @classmethod
    def constant(cls, height: int, width: int, value: float, channels: int = 3) -> "Image":
        return cls(data=np.full((height, width, channels), value, dtype=np.float64))


def load_image(path: PathLike) -> Image:
    """Decode an 8-bit grayscale/RGB PNG or binary PPM; each code v becomes v/255."""
    path = Path(path)
    if not path.exists():
        raise ImageNotFoundError(f"No image found at {path}")

    try:
        with PILImage.open(path) as raster:
            raster.load()
            if raster.format not in _READ_FORMATS:
                raise UnsupportedImageError(
                    f"{path}: {raster.format or 'unknown'} rasters are not supported; only PNG and PPM are read"
                )
            mode = raster.mode
            if mode not in _MODES:
                raise UnsupportedImageError(
                    f"{path}: unsupported raster mode '{mode}'; only 8-bit grayscale or RGB is accepted"
                )
            codes = np.asarray(raster, dtype=np.uint8)
    except UnsupportedImageError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as e:
        raise CorruptImageError(f"{path}: cannot decode raster ({e})") from e

    return Image(data=codes.astype(np.float64) / 255.0)


def quantize(img: Image) -> np.ndarray:
    """8-bit codes using round-half-away-from-zero of v * 255."""
    return np.floor(img.data * 255.0 + 0.5).clip(0, 255).astype(np.uint8)


def save_image(img: Image, path: PathLike) -> None:
    """Write ``img`` as PNG or PPM, chosen by file suffix."""
    path = Path(path)
    fmt = _FORMATS.get(path.suffix.lower())
    if fmt is None:
        raise UnsupportedImageError(f"{path}: only .png, .ppm and .pgm outputs are supported")

    codes = quantize(img)
    if img.channels == 1:
        raster = PILImage.fromarray(codes[:, :, 0])
    else:
        raster = PILImage.fromarray(codes)

    try:
        raster.save(path, format=fmt)
    except OSError as e:
        raise ImageWriteError(f"Cannot write image to {path}: {e}") from e


def image_to_tensor(img: Image, dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """1 x C x H x W tensor view of an image."""
    return torch.from_numpy(img.data.transpose(2, 0, 1).copy()).to(dtype).unsqueeze(0)


def tensor_to_image(tensor: torch.Tensor) -> Image:
    """Inverse of image_to_tensor for a single C x H x W (or 1 x C x H x W) tensor."""
    if tensor.dim() == 4:
        if tensor.shape[0] != 1:
            raise InvalidParameterError("tensor_to_image expects a batch of one")
        tensor = tensor[0]
    arr = tensor.detach().to(torch.float64).cpu().numpy().transpose(1, 2, 0)
    return Image(data=np.clip(arr, 0.0, 1.0))


def resize_bilinear(img: Image, out_h: int, out_w: int) -> Image:
    """Bilinear resize with the align-corners=false convention.

    For an output index i along an axis of input length n and output length m,
    the source coordinate is ``s = max((i + 0.5) * n / m - 0.5, 0)``; the value
    blends input samples ``floor(s)`` and ``min(floor(s) + 1, n - 1)`` with
    weights ``1 - frac(s)`` and ``frac(s)``. Both axes are separable.
    """
    if out_h < 1 or out_w < 1:
        raise InvalidParameterError(f"output size must be positive, got {out_h} x {out_w}")
    if (out_h, out_w) == (img.height, img.width):
        return Image(data=img.data.copy())

    x = torch.from_numpy(img.data.transpose(2, 0, 1).copy()).unsqueeze(0)
    y = F.interpolate(x, size=(out_h, out_w), mode="bilinear", align_corners=False)
    return Image(data=y[0].numpy().transpose(1, 2, 0).clip(0.0, 1.0))
