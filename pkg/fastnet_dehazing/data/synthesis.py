"""Synthetic hazy dataset generation from clean + depth pairs.

Output layout under ``output_dir``::

    clean/<scene>.png          depth/<scene>.fmap
    hazy/<scene>_<v>.png       trans/<scene>_<v>.fmap      airlight/<scene>_<v>.fmap
    manifest.csv

Each scene gets ``variations_per_image`` independent draws of a global airlight
A (shared by all channels) and a scattering coefficient beta from a generator
seeded with ``seed ^ scene_index``, so parallel and serial runs write the same
bytes.
"""

import hashlib
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator

from fastnet_dehazing.data.fmap import read_fmap, write_fmap
from fastnet_dehazing.data.manifest import write_manifest
from fastnet_dehazing.data.records import SPLITS, HazeSample, SampleRecord
from fastnet_dehazing.errors import DatasetError
from fastnet_dehazing.imaging.image_core import Image, load_image, quantize, save_image
from fastnet_dehazing.physics.scattering import (
    AtmosphericLight,
    DepthMap,
    synthesize_haze,
    transmission_from_depth,
)
from fastnet_dehazing.utils.logging import StepLogger

PathLike = Union[str, Path]

CLEAN_SUFFIXES = (".png", ".ppm")
DEPTH_SUFFIXES = (".fmap", ".png", ".pgm", ".ppm")
MANIFEST_NAME = "manifest.csv"


class SynthesisSpec(BaseModel):
    A_range: Tuple[float, float] = (0.5, 1.0)
    beta_range: Tuple[float, float] = (1.4, 1.6)
    variations_per_image: int = Field(default=4, ge=1)
    seed: int = Field(default=0, ge=0)
    output_dir: Path = Path("dataset")
    split_fractions: Tuple[float, float, float] = (0.8, 0.1, 0.1)
    workers: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _check_ranges(self) -> "SynthesisSpec":
        a_lo, a_hi = self.A_range
        if not (0.0 < a_lo <= a_hi <= 1.0):
            raise ValueError(f"A_range {self.A_range} must satisfy 0 < lo <= hi <= 1")
        b_lo, b_hi = self.beta_range
        if not (0.0 < b_lo <= b_hi):
            raise ValueError(f"beta_range {self.beta_range} must satisfy 0 < lo <= hi")
        if any(f < 0.0 for f in self.split_fractions) or abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ValueError(f"split fractions {self.split_fractions} must be nonnegative and sum to 1")
        return self


def sha256_of(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def load_depth(path: PathLike) -> DepthMap:
    """Depth from an FMAP raster, or from an 8-bit grayscale raster normalized to [0, 1]."""
    path = Path(path)
    if path.suffix.lower() == ".fmap":
        return DepthMap(data=read_fmap(path)[:, :, 0])
    return DepthMap(data=load_image(path).data[:, :, 0])


def synthesize_sample(
    clean: Image,
    depth: DepthMap,
    A: float,
    beta: float,
    scene: str = "",
    variation: int = 0,
) -> HazeSample:
    """Haze one clean image; the hazy image is quantized exactly as it is stored."""
    if clean.shape[:2] != depth.shape:
        raise DatasetError(f"depth {depth.shape} does not match clean image {clean.shape[:2]}")
    t = transmission_from_depth(depth, beta)
    airlight = AtmosphericLight(data=np.full(clean.shape, A))
    hazy = synthesize_haze(clean, t, airlight)
    hazy = Image(data=quantize(hazy).astype(np.float64) / 255.0)
    return HazeSample(
        hazy=hazy,
        clean=clean,
        transmission=t,
        airlight=airlight,
        scene=scene,
        variation=variation,
        A=A,
        beta=beta,
    )


def find_pairs(clean_dir: PathLike, depth_dir: PathLike) -> List[Tuple[Path, Path]]:
    """Match every clean raster with the depth raster of the same stem."""
    clean_dir, depth_dir = Path(clean_dir), Path(depth_dir)
    for directory in (clean_dir, depth_dir):
        if not directory.is_dir():
            raise DatasetError(f"not a directory: {directory}")

    pairs = []
    for clean_path in sorted(p for p in clean_dir.iterdir() if p.suffix.lower() in CLEAN_SUFFIXES):
        candidates = [depth_dir / f"{clean_path.stem}{suffix}" for suffix in DEPTH_SUFFIXES]
        depth_path = next((c for c in candidates if c.exists()), None)
        if depth_path is None:
            raise DatasetError(f"no depth raster for {clean_path} in {depth_dir}")
        pairs.append((clean_path, depth_path))
    if not pairs:
        raise DatasetError(f"no PNG/PPM clean images in {clean_dir}")
    return pairs


def assign_splits(n_scenes: int, fractions: Tuple[float, float, float], seed: int) -> List[str]:
    """Scene-level split labels: round(f_train * n) train, round(f_val * n) val, rest test."""
    n_train = int(round(fractions[0] * n_scenes))
    n_val = min(int(round(fractions[1] * n_scenes)), n_scenes - n_train)
    order = np.random.default_rng(seed).permutation(n_scenes)
    labels = [SPLITS[2]] * n_scenes
    for rank, scene_index in enumerate(order):
        if rank < n_train:
            labels[scene_index] = SPLITS[0]
        elif rank < n_train + n_val:
            labels[scene_index] = SPLITS[1]
    return labels


class DatasetSynthesizer(StepLogger):
    """Writes the hazy dataset for a set of clean + depth pairs."""

    logger_name = "fastnet_dehazing.data"

    def __init__(self, spec: SynthesisSpec):
        self.spec = spec
        self.root = Path(spec.output_dir)

    def _prepare_dirs(self):
        for name in ("clean", "depth", "hazy", "trans", "airlight"):
            try:
                (self.root / name).mkdir(parents=True, exist_ok=True)
            except OSError as e:
                raise DatasetError(f"cannot create output directory {self.root / name}: {e}") from e

    def _synthesize_scene(self, index: int, clean_path: Path, depth_path: Path) -> List[Dict]:
        clean = load_image(clean_path)
        # Synthesize from the float32 depth that is stored so re-synthesis is exact
        depth = DepthMap(data=load_depth(depth_path).data.astype(np.float32))
        if clean.shape[:2] != depth.shape:
            raise DatasetError(
                f"depth {depth_path} is {depth.shape}, clean {clean_path} is {clean.shape[:2]}"
            )
        scene = clean_path.stem
        rel = {"clean": Path("clean") / f"{scene}.png", "depth": Path("depth") / f"{scene}.fmap"}
        save_image(clean, self.root / rel["clean"])
        write_fmap(depth.data, self.root / rel["depth"])

        rng = np.random.default_rng(self.spec.seed ^ index)
        rows = []
        for variation in range(self.spec.variations_per_image):
            A = float(rng.uniform(*self.spec.A_range))
            beta = float(rng.uniform(*self.spec.beta_range))
            sample = synthesize_sample(clean, depth, A, beta, scene, variation)

            paths = dict(rel)
            paths["hazy"] = Path("hazy") / f"{scene}_{variation}.png"
            paths["transmission"] = Path("trans") / f"{scene}_{variation}.fmap"
            paths["airlight"] = Path("airlight") / f"{scene}_{variation}.fmap"
            save_image(sample.hazy, self.root / paths["hazy"])
            write_fmap(sample.transmission.data, self.root / paths["transmission"])
            write_fmap(sample.airlight.data, self.root / paths["airlight"])

            row = {"scene": scene, "variation": variation, "A": A, "beta": beta}
            for name, rel_path in paths.items():
                row[name] = rel_path.as_posix()
                row[f"{name}_sha256"] = sha256_of(self.root / rel_path)
            rows.append(row)
        return rows

    def run(self, clean_dir: PathLike, depth_dir: PathLike) -> List[SampleRecord]:
        pairs = find_pairs(clean_dir, depth_dir)
        self._prepare_dirs()
        self._log_step("SYNTH", f"{len(pairs)} scenes x {self.spec.variations_per_image} variations -> {self.root}")

        jobs = [(index, clean, depth) for index, (clean, depth) in enumerate(pairs)]
        if self.spec.workers > 1:
            with ThreadPoolExecutor(max_workers=self.spec.workers) as pool:
                per_scene = list(pool.map(lambda job: self._synthesize_scene(*job), jobs))
        else:
            per_scene = [self._synthesize_scene(*job) for job in jobs]

        splits = assign_splits(len(pairs), self.spec.split_fractions, self.spec.seed)
        records = [
            SampleRecord(split=splits[index], **row)
            for index, rows in enumerate(per_scene)
            for row in rows
        ]
        write_manifest(records, self.root / MANIFEST_NAME)
        self._log_step("SYNTH", f"wrote {len(records)} records to {self.root / MANIFEST_NAME}")
        return records


def synthesize_dataset(
    clean_dir: PathLike,
    depth_dir: PathLike,
    spec: Optional[SynthesisSpec] = None,
) -> List[SampleRecord]:
    return DatasetSynthesizer(spec or SynthesisSpec()).run(clean_dir, depth_dir)


def resynthesize(record: SampleRecord, root: PathLike) -> Image:
    """Recompute a record's hazy image from its stored clean image, depth and draw."""
    root = Path(root)
    clean = load_image(root / record.clean)
    depth = load_depth(root / record.depth)
    return synthesize_sample(clean, depth, record.A, record.beta).hazy
