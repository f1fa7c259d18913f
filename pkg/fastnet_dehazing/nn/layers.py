from enum import Enum
from typing import Dict, Iterable, List, Optional, Union

from torch import nn


class LayerKind(str, Enum):
    CONV = "conv"
    CONV_TRANSPOSE = "conv_transpose"
    BATCHNORM = "batchnorm"
    RELU = "relu"
    SIGMOID = "sigmoid"
    MAXPOOL = "maxpool"
    ADAPTIVE_AVGPOOL = "adaptive_avgpool"
    UPSAMPLE_BILINEAR = "upsample_bilinear"
    ADD_SKIP = "add_skip"
    CONCAT = "concat"


_MODULE_KINDS = {
    nn.Conv2d: LayerKind.CONV,
    nn.ConvTranspose2d: LayerKind.CONV_TRANSPOSE,
    nn.BatchNorm2d: LayerKind.BATCHNORM,
    nn.ReLU: LayerKind.RELU,
    nn.Sigmoid: LayerKind.SIGMOID,
    nn.MaxPool2d: LayerKind.MAXPOOL,
    nn.AdaptiveAvgPool2d: LayerKind.ADAPTIVE_AVGPOOL,
}


def layer_kind(module: nn.Module) -> Optional[LayerKind]:
    """Kind of a leaf module, or None for containers."""
    return _MODULE_KINDS.get(type(module))


def conv_bn_relu(in_channels: int, out_channels: int, kernel: int, stride: int = 1, padding: int = 0) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_channels, out_channels, kernel, stride, padding, bias=False),
        nn.BatchNorm2d(out_channels),
        nn.ReLU(inplace=False),
    )


def deconv_bn_relu(in_channels: int, out_channels: int, kernel: int = 3, stride: int = 2) -> nn.Sequential:
    """Transposed conv that exactly multiplies spatial size by ``stride``."""
    padding = (kernel - 1) // 2
    output_padding = stride - 1 if stride > 1 else 0
    return nn.Sequential(
        nn.ConvTranspose2d(in_channels, out_channels, kernel, stride, padding, output_padding, bias=False),
        nn.BatchNorm2d(out_channels),
        nn.ReLU(inplace=False),
    )


def init_weights(module: nn.Module):
    """He-uniform fan-in for conv weights, zero biases, identity affine for norms."""
    if isinstance(module, (nn.Conv2d, nn.ConvTranspose2d)):
        nn.init.kaiming_uniform_(module.weight, mode="fan_in", nonlinearity="relu")
        if module.bias is not None:
            nn.init.zeros_(module.bias)
    elif isinstance(module, nn.BatchNorm2d):
        nn.init.ones_(module.weight)
        nn.init.zeros_(module.bias)


def param_count(layers: Union[nn.Module, Iterable[nn.Module]]) -> int:
    """Learnable parameter elements; running statistics are buffers and are not counted."""
    if isinstance(layers, nn.Module):
        layers = [layers]
    seen = set()
    total = 0
    for layer in layers:
        for p in layer.parameters():
            if id(p) in seen:
                continue
            seen.add(id(p))
            total += p.numel()
    return total


def layer_table(model: nn.Module) -> List[Dict[str, object]]:
    """One row per parameterised leaf layer: name, kind, parameter count."""
    rows = []
    for name, module in model.named_modules():
        kind = layer_kind(module)
        if kind is None:
            continue
        rows.append({"name": name, "kind": kind.value, "params": param_count(module)})
    return rows
