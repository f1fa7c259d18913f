"""Training and experiment configuration.

An experiment file is JSON validated into ``ExperimentConfig``; see
``configs/toy_fastnet.json`` for the canonical example.
"""

from pathlib import Path
from typing import Literal, Optional, Tuple, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from fastnet_dehazing.bench.benchmark import BenchSpec
from fastnet_dehazing.data.synthesis import SynthesisSpec
from fastnet_dehazing.errors import DehazeError, InvalidParameterError
from fastnet_dehazing.imaging.augmentation import QUARTER_TURNS
from fastnet_dehazing.losses.composite import COMPOSITE_PRESETS, CompositeSpec
from fastnet_dehazing.losses.losses import LossSpec, parse_combination
from fastnet_dehazing.models.config import ENCODER_STRIDE, PRESETS, FastNetConfig

Regime = Literal["mse_x1", "mse_x4", "step"]


class AugmentConfig(BaseModel):
    """Per-sample crop/rotate settings; the seed comes from the training run."""

    crop_size: int = Field(ge=32)
    rotations: Tuple[int, ...] = QUARTER_TURNS

    @field_validator("crop_size")
    @classmethod
    def _stride_multiple(cls, crop_size: int) -> int:
        if crop_size % ENCODER_STRIDE:
            raise ValueError(f"crop_size must be a multiple of {ENCODER_STRIDE}, got {crop_size}")
        return crop_size


class TrainConfig(BaseModel):
    lr: float = Field(default=1e-3, gt=0.0)
    adam_beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(default=1e-8, gt=0.0)
    batch_size: int = Field(default=1, ge=1)
    max_epochs: int = Field(default=50, ge=1)
    early_stop_patience: int = Field(default=10, ge=1)
    seed: int = Field(default=0, ge=0)

    loss: Union[CompositeSpec, LossSpec] = Field(default_factory=LossSpec, union_mode="left_to_right")
    refinement_loss: Optional[LossSpec] = None
    refinement_epochs: int = Field(default=10, ge=1)
    refinement_lr: Optional[float] = Field(default=None, gt=0.0)
    combination: Optional[str] = None
    regime: Optional[Regime] = None

    augment: Optional[AugmentConfig] = None
    loader_workers: int = Field(default=0, ge=0)
    deterministic: bool = True
    checkpoint_dir: Optional[Path] = None

    @model_validator(mode="after")
    def _apply_shorthands(self) -> "TrainConfig":
        if self.combination is not None:
            try:
                base, refinement = parse_combination(self.combination)
            except InvalidParameterError as e:
                raise ValueError(str(e)) from e
            self.loss, self.refinement_loss = base, refinement
        if self.regime in COMPOSITE_PRESETS:
            self.loss = COMPOSITE_PRESETS[self.regime]()
        return self


class ModelSection(BaseModel):
    preset: Optional[str] = None
    architecture: Literal["fastnet", "dual_fastnet"] = "fastnet"
    config: FastNetConfig = Field(default_factory=FastNetConfig)

    @model_validator(mode="after")
    def _known_preset(self) -> "ModelSection":
        if self.preset is not None and self.preset not in PRESETS:
            raise ValueError(f"unknown preset '{self.preset}'; expected one of {sorted(PRESETS)}")
        return self

    def resolve(self) -> Tuple[str, FastNetConfig]:
        if self.preset is not None:
            architecture, cfg = PRESETS[self.preset]
            return architecture, cfg.model_copy(deep=True)
        return self.architecture, self.config


class ExperimentConfig(BaseModel):
    model: ModelSection = Field(default_factory=ModelSection)
    train: TrainConfig = Field(default_factory=TrainConfig)
    data: Optional[SynthesisSpec] = None
    bench: Optional[BenchSpec] = None


def load_experiment(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise DehazeError(f"No experiment config at {path}")
    return ExperimentConfig.model_validate_json(path.read_text(encoding="utf-8"))

