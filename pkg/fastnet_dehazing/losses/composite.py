from typing import Dict, List, Literal, Mapping, Optional, Tuple, Union

import torch
from pydantic import BaseModel, Field
from torch import nn

from fastnet_dehazing.errors import MissingTargetError
from fastnet_dehazing.losses.losses import LossSpec, loss_value

Target = Literal["refined", "dehazed", "transmission", "airlight"]
TARGETS: Tuple[str, ...] = ("refined", "dehazed", "transmission", "airlight")

# Ground-truth raster each model output is compared against
TARGET_TRUTH: Dict[str, str] = {
    "refined": "clean",
    "dehazed": "clean",
    "transmission": "transmission",
    "airlight": "airlight",
}


class CompositeTerm(BaseModel):
    target: Target
    loss: LossSpec = Field(default_factory=LossSpec)


class CompositeSpec(BaseModel):
    terms: List[CompositeTerm] = Field(min_length=1)
    name: Optional[str] = None

    @property
    def targets(self) -> List[str]:
        return [term.target for term in self.terms]

    @property
    def needs_extractor(self) -> bool:
        return any(term.loss.kind == "content" for term in self.terms)


def mse_x1() -> CompositeSpec:
    """MSE on the refined output only."""
    return CompositeSpec(name="mse_x1", terms=[CompositeTerm(target="refined")])


def mse_x4() -> CompositeSpec:
    """Unit-weight MSE on airlight, transmission, dehazed and refined outputs."""
    return CompositeSpec(name="mse_x4", terms=[CompositeTerm(target=t) for t in TARGETS])


def single_target(spec: LossSpec, target: str = "refined") -> CompositeSpec:
    return CompositeSpec(terms=[CompositeTerm(target=target, loss=spec)])


def as_composite(loss: Union[LossSpec, CompositeSpec]) -> CompositeSpec:
    return loss if isinstance(loss, CompositeSpec) else single_target(loss)


COMPOSITE_PRESETS = {"mse_x1": mse_x1, "mse_x4": mse_x4}


def _lookup(named: Mapping[str, torch.Tensor], target: str, what: str) -> torch.Tensor:
    if target in named:
        return named[target]
    truth_key = TARGET_TRUTH[target]
    if what == "truths" and truth_key in named:
        return named[truth_key]
    raise MissingTargetError(f"target '{target}' missing from {what} (have {sorted(named)})")


def composite_objective(
    outputs: Mapping[str, torch.Tensor],
    truths: Mapping[str, torch.Tensor],
    spec: CompositeSpec,
    feature_extractor: Optional[nn.Module] = None,
) -> torch.Tensor:
    """Differentiable weighted sum of every term in ``spec``.

    Truths may be keyed by target name or by the raster the target is
    compared against (``clean``, ``transmission``, ``airlight``).
    """
    total = None
    for term in spec.terms:
        pred = _lookup(outputs, term.target, "outputs")
        truth = _lookup(truths, term.target, "truths")
        value = loss_value(pred, truth, term.loss, feature_extractor)
        total = value if total is None else total + value
    return total


def composite_loss(
    outputs: Mapping[str, torch.Tensor],
    truths: Mapping[str, torch.Tensor],
    spec: CompositeSpec,
    feature_extractor: Optional[nn.Module] = None,
) -> Tuple[float, Dict[str, torch.Tensor]]:
    """Scalar composite loss and its gradient for each output named in ``spec``."""
    leaves = {}
    for target in dict.fromkeys(spec.targets):
        leaves[target] = _lookup(outputs, target, "outputs").detach().clone().requires_grad_(True)
    detached = {key: value.detach() for key, value in truths.items()}
    value = composite_objective(leaves, detached, spec, feature_extractor)
    grads = torch.autograd.grad(value, list(leaves.values()))
    return float(value.detach()), dict(zip(leaves.keys(), grads))
