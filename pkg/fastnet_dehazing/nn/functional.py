"""Forward and backward passes for every layer kind the architectures use.

Forwards wrap ``torch.nn.functional``. Convolution backwards are written out
with ``torch.nn.grad``; the remaining backwards are vector-Jacobian products
of the matching forward.
"""

from typing import Callable, Dict, List, Sequence, Tuple

import torch
import torch.nn.functional as F
from torch import nn
from torch.nn import grad as nn_grad

from fastnet_dehazing.errors import InvalidParameterError, ShapeMismatchError

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


def _pair(value) -> Tuple[int, int]:
    return tuple(value) if isinstance(value, (tuple, list)) else (value, value)


def _check_upstream(expected: Sequence[int], upstream: torch.Tensor):
    if tuple(upstream.shape) != tuple(expected):
        raise ShapeMismatchError(
            f"upstream gradient {tuple(upstream.shape)} does not match forward output {tuple(expected)}"
        )


def _vjp(fn: Callable, inputs: Sequence[torch.Tensor], upstream: torch.Tensor) -> List[torch.Tensor]:
    leaves = [t.detach().requires_grad_(True) for t in inputs]
    with torch.enable_grad():
        out = fn(*leaves)
        _check_upstream(out.shape, upstream)
        grads = torch.autograd.grad(out, leaves, upstream, allow_unused=True)
    return [torch.zeros_like(leaf) if g is None else g for g, leaf in zip(grads, leaves)]


def conv_output_size(size: int, kernel: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - kernel) // stride + 1


def conv_transpose_output_size(size: int, kernel: int, stride: int, padding: int, output_padding: int = 0) -> int:
    return (size - 1) * stride - 2 * padding + kernel + output_padding


# Convolution

def _conv_out_shape(x: torch.Tensor, layer: nn.Conv2d) -> Tuple[int, int, int, int]:
    if x.dim() != 4 or x.shape[1] != layer.in_channels:
        raise ShapeMismatchError(
            f"conv expects N x {layer.in_channels} x H x W input, got {tuple(x.shape)}"
        )
    kh, kw = layer.kernel_size
    sh, sw = layer.stride
    ph, pw = layer.padding
    out_h = conv_output_size(x.shape[2], kh, sh, ph)
    out_w = conv_output_size(x.shape[3], kw, sw, pw)
    if out_h < 1 or out_w < 1:
        raise ShapeMismatchError(f"input {tuple(x.shape)} too small for kernel {layer.kernel_size}")
    return x.shape[0], layer.out_channels, out_h, out_w


def conv2d_forward(x: torch.Tensor, layer: nn.Conv2d) -> torch.Tensor:
    """Cross-correlation plus bias (no kernel flip)."""
    _conv_out_shape(x, layer)
    return F.conv2d(x, layer.weight, layer.bias, layer.stride, layer.padding)


def conv2d_backward(
    x: torch.Tensor, layer: nn.Conv2d, upstream: torch.Tensor
) -> Tuple[torch.Tensor, Dict[str, torch.Tensor]]:
    """Exact input and parameter gradients of conv2d_forward."""
    _check_upstream(_conv_out_shape(x, layer), upstream)
    weight = layer.weight.detach()
    grad_input = nn_grad.conv2d_input(x.shape, weight, upstream, layer.stride, layer.padding)
    grads = {"weight": nn_grad.conv2d_weight(x.detach(), weight.shape, upstream, layer.stride, layer.padding)}
    if layer.bias is not None:
        grads["bias"] = upstream.sum(dim=(0, 2, 3))
    return grad_input, grads


def conv_transpose2d_forward(x: torch.Tensor, layer: nn.ConvTranspose2d) -> torch.Tensor:
    if x.dim() != 4 or x.shape[1] != layer.in_channels:
        raise ShapeMismatchError(
            f"transposed conv expects N x {layer.in_channels} x H x W input, got {tuple(x.shape)}"
        )
    return F.conv_transpose2d(
        x, layer.weight, layer.bias, layer.stride, layer.padding, layer.output_padding
    )


def conv_transpose2d_backward(
    x: torch.Tensor, layer: nn.ConvTranspose2d, upstream: torch.Tensor
) -> Tuple[torch.Tensor, Dict[str, torch.Tensor]]:
    params = [layer.weight] + ([layer.bias] if layer.bias is not None else [])

    def fn(inp, weight, *bias):
        return F.conv_transpose2d(
            inp, weight, bias[0] if bias else None, layer.stride, layer.padding, layer.output_padding
        )

    grad_input, *param_grads = _vjp(fn, [x] + [p.detach() for p in params], upstream)
    names = ["weight", "bias"][: len(param_grads)]
    return grad_input, dict(zip(names, param_grads))


# Normalization

def _check_batch(x: torch.Tensor, training: bool):
    if training and x.shape[0] * x.shape[2] * x.shape[3] < 2:
        raise InvalidParameterError(
            f"batch norm in train mode needs at least two values per channel, got {tuple(x.shape)}"
        )


def batchnorm2d(x: torch.Tensor, layer: nn.BatchNorm2d, mode: str = "train") -> torch.Tensor:
    """Train mode standardizes by batch statistics and updates running stats; eval uses them."""
    training = mode == "train"
    _check_batch(x, training)
    return F.batch_norm(
        x,
        layer.running_mean,
        layer.running_var,
        layer.weight,
        layer.bias,
        training=training,
        momentum=BN_MOMENTUM,
        eps=BN_EPS,
    )


def batchnorm2d_backward(
    x: torch.Tensor, layer: nn.BatchNorm2d, upstream: torch.Tensor, mode: str = "train"
) -> Tuple[torch.Tensor, Dict[str, torch.Tensor]]:
    training = mode == "train"
    _check_batch(x, training)
    # Copies keep the running statistics untouched by the replayed forward
    running_mean = layer.running_mean.clone()
    running_var = layer.running_var.clone()

    def fn(inp, weight, bias):
        return F.batch_norm(inp, running_mean, running_var, weight, bias, training, BN_MOMENTUM, BN_EPS)

    grad_input, grad_weight, grad_bias = _vjp(
        fn, [x, layer.weight.detach(), layer.bias.detach()], upstream
    )
    return grad_input, {"weight": grad_weight, "bias": grad_bias}


# Activations, pooling and resampling

def relu(x: torch.Tensor) -> torch.Tensor:
    return F.relu(x)


def relu_backward(x: torch.Tensor, upstream: torch.Tensor) -> torch.Tensor:
    _check_upstream(x.shape, upstream)
    return upstream * (x > 0).to(upstream.dtype)


def sigmoid(x: torch.Tensor) -> torch.Tensor:
    return torch.sigmoid(x)


def sigmoid_backward(x: torch.Tensor, upstream: torch.Tensor) -> torch.Tensor:
    _check_upstream(x.shape, upstream)
    s = torch.sigmoid(x)
    return upstream * s * (1.0 - s)


def maxpool2d(x: torch.Tensor, kernel: int, stride: int, padding: int = 0) -> torch.Tensor:
    return F.max_pool2d(x, kernel, stride, padding)


def maxpool2d_backward(
    x: torch.Tensor, upstream: torch.Tensor, kernel: int, stride: int, padding: int = 0
) -> torch.Tensor:
    return _vjp(lambda inp: F.max_pool2d(inp, kernel, stride, padding), [x], upstream)[0]


def adaptive_avgpool(x: torch.Tensor, out_hw) -> torch.Tensor:
    return F.adaptive_avg_pool2d(x, _pair(out_hw))


def adaptive_avgpool_backward(x: torch.Tensor, upstream: torch.Tensor, out_hw) -> torch.Tensor:
    return _vjp(lambda inp: F.adaptive_avg_pool2d(inp, _pair(out_hw)), [x], upstream)[0]


def upsample_bilinear(x: torch.Tensor, out_hw) -> torch.Tensor:
    """Bilinear resampling with align_corners=False, matching imaging.resize_bilinear."""
    return F.interpolate(x, size=_pair(out_hw), mode="bilinear", align_corners=False)


def upsample_bilinear_backward(x: torch.Tensor, upstream: torch.Tensor, out_hw) -> torch.Tensor:
    return _vjp(lambda inp: upsample_bilinear(inp, out_hw), [x], upstream)[0]


def add_skip(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Elementwise feature forwarding of an encoder output onto a decoder output."""
    if a.shape != b.shape:
        raise ShapeMismatchError(f"skip link shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")
    return a + b


def add_skip_backward(upstream: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
    return upstream, upstream.clone()


def concat(tensors: Sequence[torch.Tensor]) -> torch.Tensor:
    """Channel concatenation of N x C_i x H x W tensors."""
    first = tensors[0]
    for t in tensors[1:]:
        if t.shape[0] != first.shape[0] or t.shape[2:] != first.shape[2:]:
            raise ShapeMismatchError(
                f"cannot concatenate {tuple(t.shape)} with {tuple(first.shape)} along channels"
            )
    return torch.cat(list(tensors), dim=1)


def concat_backward(upstream: torch.Tensor, channel_sizes: Sequence[int]) -> List[torch.Tensor]:
    if sum(channel_sizes) != upstream.shape[1]:
        raise ShapeMismatchError(
            f"channel sizes {list(channel_sizes)} do not sum to {upstream.shape[1]}"
        )
    return list(torch.split(upstream, list(channel_sizes), dim=1))
