from typing import Literal, Optional

from pydantic import BaseModel, Field

from fastnet_dehazing.imaging.image_core import ArrayModel, Image
from fastnet_dehazing.physics.scattering import AtmosphericLight, TransmissionMap

Split = Literal["train", "val", "test"]
SPLITS = ("train", "val", "test")

# Files each record owns, in manifest column order
ARTIFACTS = ("clean", "depth", "hazy", "transmission", "airlight")


class SampleRecord(BaseModel):
    """One manifest line: artifact paths (relative to the manifest), draw metadata, checksums."""

    scene: str
    variation: int = Field(ge=0)
    split: Split
    A: float
    beta: float
    clean: str
    depth: str
    hazy: str
    transmission: str
    airlight: str
    clean_sha256: str
    depth_sha256: str
    hazy_sha256: str
    transmission_sha256: str
    airlight_sha256: str


class HazeSample(ArrayModel):
    """Decoded training sample. Transmission and airlight truths are optional
    for FastNet-only use."""

    hazy: Image
    clean: Image
    transmission: Optional[TransmissionMap] = None
    airlight: Optional[AtmosphericLight] = None
    scene: str = ""
    variation: int = 0
    A: Optional[float] = None
    beta: Optional[float] = None
