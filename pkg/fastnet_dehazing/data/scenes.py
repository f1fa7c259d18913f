"""Procedural clean-image + depth scenes for synthesis without external data."""

from pathlib import Path
from typing import Tuple, Union

import numpy as np

from fastnet_dehazing.data.fmap import write_fmap
from fastnet_dehazing.imaging.image_core import Image, save_image
from fastnet_dehazing.physics.scattering import DepthMap

# Keeps t >= exp(-1.6 * 0.8) so recovery from 8-bit hazy images stays within 2/255
MAX_DEPTH = 0.8

PathLike = Union[str, Path]


def _depth_field(height: int, width: int, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.meshgrid(np.linspace(0.0, 1.0, height), np.linspace(0.0, 1.0, width), indexing="ij")
    angle = rng.uniform(0.0, 2.0 * np.pi)
    ramp = 0.5 + 0.5 * (np.cos(angle) * (xx - 0.5) + np.sin(angle) * (yy - 0.5)) * np.sqrt(2.0)
    depth = np.clip(ramp, 0.0, 1.0)

    # Spheres sit in front of the background ramp
    for _ in range(rng.integers(1, 4)):
        cy, cx = rng.uniform(0.2, 0.8, size=2)
        radius = rng.uniform(0.1, 0.3)
        dist2 = (yy - cy) ** 2 + (xx - cx) ** 2
        inside = dist2 < radius ** 2
        bulge = rng.uniform(0.0, 0.4) + np.sqrt(np.maximum(radius ** 2 - dist2, 0.0))
        depth = np.where(inside, np.minimum(depth, np.clip(1.0 - bulge - 0.3, 0.0, 1.0)), depth)
    return depth * MAX_DEPTH


def _texture(height: int, width: int, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.meshgrid(np.linspace(0.0, 1.0, height), np.linspace(0.0, 1.0, width), indexing="ij")
    channels = []
    for _ in range(3):
        fy, fx = rng.uniform(0.5, 3.0, size=2)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        base = rng.uniform(0.2, 0.6)
        wave = np.sin(2.0 * np.pi * (fy * yy + fx * xx) + phase)
        channels.append(base + 0.3 * wave * rng.uniform(0.3, 1.0))
    return np.clip(np.stack(channels, axis=-1), 0.0, 1.0)


def generate_scene(height: int, width: int, seed: int) -> Tuple[Image, DepthMap]:
    """Smooth colour texture with a ramp-and-spheres depth raster in [0, MAX_DEPTH]."""
    rng = np.random.default_rng(seed)
    depth = _depth_field(height, width, rng)
    return Image(data=_texture(height, width, rng)), DepthMap(data=depth)


def write_scenes(root: PathLike, count: int, height: int = 64, width: int = 64, seed: int = 0) -> Tuple[Path, Path]:
    """Write ``count`` scenes as ``clean/scene_XXXX.png`` + ``depth/scene_XXXX.fmap``."""
    root = Path(root)
    clean_dir, depth_dir = root / "clean", root / "depth"
    clean_dir.mkdir(parents=True, exist_ok=True)
    depth_dir.mkdir(parents=True, exist_ok=True)
    for index in range(count):
        clean, depth = generate_scene(height, width, seed ^ index)
        save_image(clean, clean_dir / f"scene_{index:04d}.png")
        write_fmap(depth.data, depth_dir / f"scene_{index:04d}.fmap")
    return clean_dir, depth_dir
