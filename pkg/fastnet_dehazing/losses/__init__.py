"""
Training objectives

Single losses (MSE, L1, SSIM, content) and composite objectives over the
named model outputs, with the base → refinement combinations used for
fine-tuning.
"""

from .composite import (
    COMPOSITE_PRESETS,
    TARGET_TRUTH,
    TARGETS,
    CompositeSpec,
    CompositeTerm,
    as_composite,
    composite_loss,
    composite_objective,
    mse_x1,
    mse_x4,
    single_target,
)
from .losses import (
    LOSS_COMBINATIONS,
    ContentLoss,
    LossSpec,
    SSIMLoss,
    build_loss,
    combination_tag,
    loss_forward_backward,
    loss_from_label,
    loss_value,
    parse_combination,
)

__all__ = [
    'COMPOSITE_PRESETS',
    'LOSS_COMBINATIONS',
    'TARGETS',
    'TARGET_TRUTH',
    'CompositeSpec',
    'CompositeTerm',
    'ContentLoss',
    'LossSpec',
    'SSIMLoss',
    'as_composite',
    'build_loss',
    'combination_tag',
    'composite_loss',
    'composite_objective',
    'loss_forward_backward',
    'loss_from_label',
    'loss_value',
    'mse_x1',
    'mse_x4',
    'parse_combination',
    'single_target',
]
