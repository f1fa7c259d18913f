"""
Scattering physics

The atmospheric scattering model and its single-variable K reformulation.
"""

from .scattering import (
    EPS_K,
    T_MIN_RECOVERY,
    T_MIN_SYNTHESIS,
    AtmosphericLight,
    DepthMap,
    ScatterParams,
    TransmissionMap,
    apply_k,
    apply_k_array,
    k_transform,
    recover_array,
    recover_scene,
    recover_scene_tensor,
    synthesize_haze,
    transmission_from_depth,
)

__all__ = [
    'EPS_K',
    'T_MIN_RECOVERY',
    'T_MIN_SYNTHESIS',
    'AtmosphericLight',
    'DepthMap',
    'ScatterParams',
    'TransmissionMap',
    'apply_k',
    'apply_k_array',
    'k_transform',
    'recover_array',
    'recover_scene',
    'recover_scene_tensor',
    'synthesize_haze',
    'transmission_from_depth',
]
