from typing import Dict, List, Literal, Tuple

from pydantic import BaseModel, Field, field_validator

ARCHITECTURES = ("fastnet", "dual_fastnet")

# Published totals for the three variants and the refinement-head size their
# difference implies (dual = 2 * (small - R) + R).
REFERENCE_PARAMS: Dict[str, int] = {
    "small_fastnet": 11_554_167,
    "big_fastnet": 28_782_647,
    "dual_fastnet": 23_072_725,
}
REFINEMENT_BUDGET = 35_609

ENCODER_STRIDE = 32


class FastNetConfig(BaseModel):
    encoder_kind: Literal["basic", "bottleneck"] = "basic"
    blocks_per_stage: List[int] = Field(default_factory=lambda: [2, 2, 2, 2])
    base_width: int = Field(default=64, ge=4)
    feature_channels: int = Field(default=32, ge=4)
    refinement_scales: List[int] = Field(default_factory=lambda: [1, 2, 4, 8], min_length=1)
    t_min: float = Field(default=0.05, gt=0.0, lt=1.0)

    @field_validator("blocks_per_stage")
    @classmethod
    def _four_stages(cls, blocks: List[int]) -> List[int]:
        if len(blocks) != 4:
            raise ValueError(f"blocks_per_stage needs 4 entries, got {len(blocks)}")
        if any(b < 1 for b in blocks):
            raise ValueError("every encoder stage needs at least one block")
        return blocks

    @field_validator("refinement_scales")
    @classmethod
    def _positive_scales(cls, scales: List[int]) -> List[int]:
        if any(g < 1 for g in scales):
            raise ValueError("refinement pool grids must be at least 1x1")
        return scales

    @property
    def expansion(self) -> int:
        return 4 if self.encoder_kind == "bottleneck" else 1

    @property
    def stage_widths(self) -> List[int]:
        """Output channels of the four residual stages."""
        return [self.base_width * m * self.expansion for m in (1, 2, 4, 8)]


def small_fastnet_config() -> FastNetConfig:
    return FastNetConfig(encoder_kind="basic", blocks_per_stage=[2, 2, 2, 2], base_width=64)


def big_fastnet_config() -> FastNetConfig:
    return FastNetConfig(encoder_kind="bottleneck", blocks_per_stage=[3, 4, 6, 3], base_width=64)


def toy_config() -> FastNetConfig:
    return FastNetConfig(encoder_kind="basic", blocks_per_stage=[1, 1, 1, 1], base_width=8, feature_channels=8)


PRESETS: Dict[str, Tuple[str, FastNetConfig]] = {
    "small_fastnet": ("fastnet", small_fastnet_config()),
    "big_fastnet": ("fastnet", big_fastnet_config()),
    "dual_fastnet": ("dual_fastnet", small_fastnet_config()),
    "toy_fastnet": ("fastnet", toy_config()),
    "toy_dual_fastnet": ("dual_fastnet", toy_config()),
}
