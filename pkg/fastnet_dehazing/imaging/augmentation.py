"""Multi-scale patch extraction and paired crop/rotate augmentation."""

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from fastnet_dehazing.errors import InvalidParameterError, PatchExtractionError, ShapeMismatchError
from fastnet_dehazing.imaging.image_core import Image, resize_bilinear

MIN_PATCH_SIZE = 8
QUARTER_TURNS = (0, 90, 180, 270)


class PatchSpec(BaseModel):
    """Square patch tiling applied at one or more relative scales.

    ``output_size`` is the training input size patches are reshaped to; it
    defaults to ``patch_size`` (no reshaping).
    """

    patch_size: int = Field(ge=MIN_PATCH_SIZE)
    stride: int = Field(ge=1)
    scales: List[float] = Field(default_factory=lambda: [1.0], min_length=1)
    output_size: Optional[int] = Field(default=None, ge=1)

    @field_validator("scales")
    @classmethod
    def _check_scales(cls, scales: List[float]) -> List[float]:
        for s in scales:
            if not (0.0 < s <= 1.0):
                raise ValueError(f"scale {s} outside (0, 1]")
        return scales


class AugmentSpec(BaseModel):
    crop_size: int = Field(ge=1)
    rotations: List[int] = Field(default_factory=lambda: [0], min_length=1)
    seed: int = Field(default=0, ge=0)

    @field_validator("rotations")
    @classmethod
    def _check_rotations(cls, rotations: List[int]) -> List[int]:
        for r in rotations:
            if r not in QUARTER_TURNS:
                raise ValueError(f"rotation {r} is not a quarter turn")
        return sorted(set(rotations))


def _scaled_size(length: int, scale: float) -> int:
    if scale == 1.0:
        return length
    return int(math.floor(scale * length))


def tile_count(height: int, width: int, spec: PatchSpec) -> int:
    """Closed-form number of patches extract_patches returns."""
    total = 0
    for s in spec.scales:
        h, w = _scaled_size(height, s), _scaled_size(width, s)
        if h < spec.patch_size or w < spec.patch_size:
            continue
        rows = (h - spec.patch_size) // spec.stride + 1
        cols = (w - spec.patch_size) // spec.stride + 1
        total += rows * cols
    return total


def extract_patches(img: Image, spec: PatchSpec) -> List[Image]:
    """Tile every rescaled copy of ``img``; order is scale-major, then row-major."""
    patches = []
    p = spec.patch_size
    for s in spec.scales:
        h, w = _scaled_size(img.height, s), _scaled_size(img.width, s)
        if h < p or w < p:
            continue
        source = img if (h, w) == (img.height, img.width) else resize_bilinear(img, h, w)
        for top in range(0, h - p + 1, spec.stride):
            for left in range(0, w - p + 1, spec.stride):
                patch = Image(data=source.data[top:top + p, left:left + p].copy())
                if spec.output_size is not None and spec.output_size != p:
                    patch = resize_bilinear(patch, spec.output_size, spec.output_size)
                patches.append(patch)

    if not patches:
        raise PatchExtractionError(
            f"No scale in {spec.scales} leaves a {img.height}x{img.width} image "
            f"at least {p} pixels on a side"
        )
    return patches


def augment_group(images: Sequence[Image], spec: AugmentSpec) -> Tuple[Image, ...]:
    """Apply one seeded crop window and quarter-turn rotation to every image."""
    if not images:
        return ()
    height, width = images[0].height, images[0].width
    for other in images[1:]:
        if (other.height, other.width) != (height, width):
            raise ShapeMismatchError(
                f"paired images differ in size: {height}x{width} vs {other.height}x{other.width}"
            )
    if spec.crop_size > min(height, width):
        raise InvalidParameterError(
            f"crop_size {spec.crop_size} exceeds image size {height}x{width}"
        )

    rng = np.random.default_rng(spec.seed)
    c = spec.crop_size
    top = int(rng.integers(0, height - c + 1))
    left = int(rng.integers(0, width - c + 1))
    turns = int(rng.choice(spec.rotations)) // 90

    out = []
    for img in images:
        window = img.data[top:top + c, left:left + c]
        out.append(Image(data=np.rot90(window, k=turns, axes=(0, 1)).copy()))
    return tuple(out)


def augment_pair(a: Image, b: Image, spec: AugmentSpec) -> Tuple[Image, Image]:
    """Crop and rotate a hazy/clean pair identically."""
    first, second = augment_group((a, b), spec)
    return first, second
