"""Dataset manifest (CSV, one record per line) and lazy split loading."""

import hashlib
from collections import abc
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from fastnet_dehazing.data.fmap import read_fmap
from fastnet_dehazing.data.records import ARTIFACTS, SPLITS, HazeSample, SampleRecord
from fastnet_dehazing.errors import (
    ArtifactWriteError,
    ChecksumMismatchError,
    DatasetError,
    InvalidParameterError,
)
from fastnet_dehazing.imaging.image_core import load_image
from fastnet_dehazing.physics.scattering import AtmosphericLight, TransmissionMap

PathLike = Union[str, Path]

COLUMNS = ["scene", "variation", "split", "A", "beta"] + list(ARTIFACTS) + [f"{a}_sha256" for a in ARTIFACTS]
TEXT_COLUMNS = ["scene", "split"] + list(ARTIFACTS) + [f"{a}_sha256" for a in ARTIFACTS]


def write_manifest(records: Sequence[SampleRecord], path: PathLike) -> None:
    path = Path(path)
    frame = pd.DataFrame([r.model_dump() for r in records], columns=COLUMNS)
    try:
        frame.to_csv(path, index=False)
    except OSError as e:
        raise ArtifactWriteError(f"Cannot write manifest to {path}: {e}") from e


def read_manifest(path: PathLike) -> List[SampleRecord]:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"No manifest found at {path}")
    try:
        frame = pd.read_csv(path, dtype={c: str for c in TEXT_COLUMNS}, keep_default_na=False, float_precision="round_trip")
        return [SampleRecord(**row) for row in frame.to_dict(orient="records")]
    except (ValidationError, pd.errors.ParserError, pd.errors.EmptyDataError, TypeError) as e:
        raise DatasetError(f"{path}: malformed manifest ({e})") from e


class HazeDataset(abc.Sequence):
    """Samples of one manifest split, decoded on access in manifest order.

    Every file is checked against its stored SHA-256 before decoding.
    """

    def __init__(self, records: Sequence[SampleRecord], root: PathLike, verify: bool = True):
        self.records = list(records)
        self.root = Path(root)
        self.verify = verify

    def __len__(self) -> int:
        return len(self.records)

    def _read(self, record: SampleRecord, artifact: str) -> bytes:
        path = self.root / getattr(record, artifact)
        if not path.exists():
            raise DatasetError(f"missing dataset file {path}")
        payload = path.read_bytes()
        if self.verify and hashlib.sha256(payload).hexdigest() != getattr(record, f"{artifact}_sha256"):
            raise ChecksumMismatchError(f"{path} does not match its manifest checksum")
        return payload

    def __getitem__(self, index: int) -> HazeSample:
        record = self.records[index]
        for artifact in ARTIFACTS:
            self._read(record, artifact)
        transmission = read_fmap(self.root / record.transmission)[:, :, 0]
        return HazeSample(
            hazy=load_image(self.root / record.hazy),
            clean=load_image(self.root / record.clean),
            transmission=TransmissionMap(data=transmission),
            airlight=AtmosphericLight(data=np.clip(read_fmap(self.root / record.airlight), 0.0, 1.0)),
            scene=record.scene,
            variation=record.variation,
            A=record.A,
            beta=record.beta,
        )

    def __iter__(self) -> Iterator[HazeSample]:
        for index in range(len(self)):
            yield self[index]


def load_dataset(manifest: PathLike, split: Optional[str] = None, verify: bool = True) -> HazeDataset:
    """Records of ``split`` (all records when None) as recorded in the manifest."""
    if split is not None and split not in SPLITS:
        raise InvalidParameterError(f"unknown split '{split}'; expected one of {SPLITS}")
    manifest = Path(manifest)
    records = read_manifest(manifest)
    if split is not None:
        records = [r for r in records if r.split == split]
    return HazeDataset(records, manifest.parent, verify=verify)
