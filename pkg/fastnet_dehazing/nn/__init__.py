"""
Differentiable building blocks

Layer forwards/backwards, weight initialization, parameter accounting and
finite-difference gradient verification for the dehazing architectures.
"""

from . import functional
from .gradcheck import GradCheckEntry, GradCheckReport, grad_check, numerical_gradient, relative_error
from .layers import LayerKind, conv_bn_relu, deconv_bn_relu, init_weights, layer_kind, layer_table, param_count

__all__ = [
    'GradCheckEntry',
    'GradCheckReport',
    'LayerKind',
    'conv_bn_relu',
    'deconv_bn_relu',
    'functional',
    'grad_check',
    'init_weights',
    'layer_kind',
    'layer_table',
    'numerical_gradient',
    'param_count',
    'relative_error',
]
