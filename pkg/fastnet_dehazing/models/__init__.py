"""
Dehazing architectures

FastNet (single encoder-decoder + pyramid refinement) and DualFastNet
(transmission and airlight encoder-decoders, scattering-model image formation,
shared refinement), with presets, padding helpers and FDHZ checkpoints.
"""

from .blocks import EncoderDecoder, RefinementHead
from .builder import (
    DehazeModel,
    build_dualfastnet,
    build_fastnet,
    build_model,
    build_preset,
    crop_to,
    dehaze,
    dehaze_tensor,
    encoder_decoder_params,
    forward,
    pad_to_multiple,
    parameter_breakdown,
    required_padding,
)
from .checkpoint import (
    Checkpoint,
    decode_checkpoint,
    encode_checkpoint,
    import_encoder_weights,
    load_checkpoint,
    model_from_checkpoint,
    read_checkpoint,
    save_checkpoint,
)
from .config import (
    PRESETS,
    REFERENCE_PARAMS,
    REFINEMENT_BUDGET,
    FastNetConfig,
    big_fastnet_config,
    small_fastnet_config,
    toy_config,
)
from .dual_fastnet import DualFastNet
from .fastnet import FastNet

__all__ = [
    'PRESETS',
    'REFERENCE_PARAMS',
    'REFINEMENT_BUDGET',
    'Checkpoint',
    'DehazeModel',
    'DualFastNet',
    'EncoderDecoder',
    'FastNet',
    'FastNetConfig',
    'RefinementHead',
    'big_fastnet_config',
    'build_dualfastnet',
    'build_fastnet',
    'build_model',
    'build_preset',
    'crop_to',
    'decode_checkpoint',
    'dehaze',
    'dehaze_tensor',
    'encode_checkpoint',
    'encoder_decoder_params',
    'forward',
    'import_encoder_weights',
    'load_checkpoint',
    'model_from_checkpoint',
    'pad_to_multiple',
    'parameter_breakdown',
    'read_checkpoint',
    'required_padding',
    'save_checkpoint',
    'small_fastnet_config',
    'toy_config',
]
