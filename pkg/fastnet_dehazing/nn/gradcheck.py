"""Central finite-difference verification of analytic gradients."""

import copy
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import torch
from pydantic import BaseModel
from torch import nn

from fastnet_dehazing.errors import NonFiniteValueError

DEFAULT_MAX_ELEMENTS = 10_000


class GradCheckEntry(BaseModel):
    name: str
    checked: int
    total: int
    max_rel_error: float


class GradCheckReport(BaseModel):
    entries: List[GradCheckEntry]
    tolerance: float
    step: float
    subsampled: bool
    seed: int

    @property
    def max_error(self) -> float:
        return max((e.max_rel_error for e in self.entries), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance

    def to_text(self) -> str:
        lines = [f"{'tensor':<48}{'checked':>10}{'total':>10}{'max rel err':>14}"]
        for e in self.entries:
            lines.append(f"{e.name:<48}{e.checked:>10}{e.total:>10}{e.max_rel_error:>14.3e}")
        status = "PASS" if self.passed else "FAIL"
        lines.append(
            f"{status}: max rel err {self.max_error:.3e} (tol {self.tolerance:.1e}, h {self.step:.1e}, "
            f"subsampled={self.subsampled}, seed={self.seed})"
        )
        return "\n".join(lines)


def relative_error(analytic: torch.Tensor, numeric: torch.Tensor) -> float:
    """max|a - n| / max(1e-8, max(|a| + |n|)) over the compared elements."""
    diff = (analytic - numeric).abs().max().item()
    scale = (analytic.abs() + numeric.abs()).max().item()
    return diff / max(1e-8, scale)


def numerical_gradient(
    fn: Callable[[], torch.Tensor],
    tensor: torch.Tensor,
    h: float,
    indices: Optional[Sequence[int]] = None,
) -> torch.Tensor:
    """Central differences of scalar ``fn()`` w.r.t. the flat entries of ``tensor``.

    ``tensor`` is perturbed in place and restored. Returns the numeric
    gradient at ``indices`` (all entries when None), flattened.
    """
    flat = tensor.data.view(-1)
    if indices is None:
        indices = range(flat.numel())
    out = []
    with torch.no_grad():
        for i in indices:
            original = flat[i].item()
            flat[i] = original + h
            f_plus = float(fn())
            flat[i] = original - h
            f_minus = float(fn())
            flat[i] = original
            out.append((f_plus - f_minus) / (2.0 * h))
    return torch.tensor(out, dtype=torch.float64)


def _flatten_outputs(outputs) -> torch.Tensor:
    if isinstance(outputs, torch.Tensor):
        return outputs.reshape(-1)
    if isinstance(outputs, Mapping):
        return torch.cat([outputs[k].reshape(-1) for k in sorted(outputs)])
    return torch.cat([o.reshape(-1) for o in outputs])


def randomize_batchnorm(model: nn.Module, gen: torch.Generator):
    """Draw BN running statistics and affine parameters from ``gen``.

    Fresh BN layers are the identity in eval mode, so an all-zero ReLU output
    feeding conv -> BN lands exactly on the next ReLU's kink.
    """
    with torch.no_grad():
        for module in model.modules():
            if not isinstance(module, nn.BatchNorm2d):
                continue
            n = module.num_features
            if module.running_mean is not None:
                module.running_mean.copy_(0.1 * torch.randn(n, generator=gen, dtype=torch.float64))
                module.running_var.copy_(0.5 + torch.rand(n, generator=gen, dtype=torch.float64))
            if module.affine:
                module.weight.copy_(0.5 + torch.rand(n, generator=gen, dtype=torch.float64))
                module.bias.copy_(0.2 * torch.randn(n, generator=gen, dtype=torch.float64))


def grad_check(
    fragment: nn.Module,
    input_shape: Tuple[int, ...],
    h: float = 1e-6,
    tol: float = 1e-4,
    seed: int = 0,
    max_elements: int = DEFAULT_MAX_ELEMENTS,
    samples_per_tensor: int = 16,
    mode: str = "eval",
    randomize_bn: bool = True,
) -> GradCheckReport:
    """Compare backprop gradients of a module against central differences in float64.

    The check runs on a copy; with ``randomize_bn`` its BN layers get seeded
    random statistics and affine parameters first. The scalar objective is a
    fixed random projection of every output. When the input plus parameters
    exceed ``max_elements`` entries, each tensor is checked at
    ``samples_per_tensor`` positions drawn with ``seed``.
    """
    model = copy.deepcopy(fragment).double()
    model.train(mode == "train")

    gen = torch.Generator().manual_seed(seed)
    if randomize_bn:
        randomize_batchnorm(model, gen)
    x = torch.rand(input_shape, generator=gen, dtype=torch.float64)
    with torch.no_grad():
        reference = _flatten_outputs(model(x))
    projection = torch.randn(reference.shape, generator=gen, dtype=torch.float64)

    def objective() -> torch.Tensor:
        value = (_flatten_outputs(model(x)) * projection).sum()
        if not torch.isfinite(value):
            raise NonFiniteValueError("non-finite objective during gradient check")
        return value

    tensors: Dict[str, torch.Tensor] = {"input": x}
    tensors.update({name: p for name, p in model.named_parameters() if p.requires_grad})

    x.requires_grad_(True)
    model.zero_grad()
    objective().backward()
    analytic = {
        name: (torch.zeros_like(t) if t.grad is None else t.grad.detach().clone()).reshape(-1)
        for name, t in tensors.items()
    }
    for name, grad in analytic.items():
        if not torch.all(torch.isfinite(grad)):
            raise NonFiniteValueError(f"non-finite analytic gradient for {name}")
    x.requires_grad_(False)

    total = sum(t.numel() for t in tensors.values())
    subsampled = total > max_elements
    entries = []
    for name, t in tensors.items():
        if subsampled and t.numel() > samples_per_tensor:
            indices = torch.randperm(t.numel(), generator=gen)[:samples_per_tensor].tolist()
        else:
            indices = list(range(t.numel()))
        numeric = numerical_gradient(objective, t, h, indices)
        error = relative_error(analytic[name][indices], numeric)
        entries.append(GradCheckEntry(name=name, checked=len(indices), total=t.numel(), max_rel_error=error))

    return GradCheckReport(entries=entries, tolerance=tol, step=h, subsampled=subsampled, seed=seed)
