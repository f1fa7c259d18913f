"""
Image containers and preprocessing

8-bit PNG/PPM I/O, bilinear resizing, multi-scale patch extraction and
paired augmentation shared by every other subpackage.
"""

from .augmentation import AugmentSpec, PatchSpec, augment_group, augment_pair, extract_patches, tile_count
from .image_core import (
    Image,
    image_to_tensor,
    load_image,
    quantize,
    resize_bilinear,
    save_image,
    tensor_to_image,
)

__all__ = [
    'AugmentSpec',
    'Image',
    'PatchSpec',
    'augment_group',
    'augment_pair',
    'extract_patches',
    'image_to_tensor',
    'load_image',
    'quantize',
    'resize_bilinear',
    'save_image',
    'tensor_to_image',
    'tile_count',
]
