from typing import List, Sequence

import torch
from pydantic import BaseModel, ConfigDict, Field

from fastnet_dehazing.errors import NonFiniteValueError, ShapeMismatchError


class AdamState(BaseModel):
    """First/second moment estimates and the step counter."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    step: int = 0
    m: List[torch.Tensor] = Field(default_factory=list)
    v: List[torch.Tensor] = Field(default_factory=list)


def init_adam_state(params: Sequence[torch.Tensor]) -> AdamState:
    return AdamState(
        step=0,
        m=[torch.zeros_like(p) for p in params],
        v=[torch.zeros_like(p) for p in params],
    )


def adam_step(
    params: Sequence[torch.Tensor],
    grads: Sequence[torch.Tensor],
    state: AdamState,
    cfg,
) -> AdamState:
    """One bias-corrected Adam update, applied to ``params`` in place.

    ``cfg`` supplies ``lr``, ``adam_beta1``, ``adam_beta2`` and ``adam_eps``
    (a TrainConfig). All gradients are checked before any parameter moves.
    """
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise ShapeMismatchError("params, grads and optimizer state differ in length")
    for index, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ShapeMismatchError(f"gradient {index} has shape {tuple(g.shape)}, parameter {tuple(p.shape)}")
        if not torch.isfinite(g).all():
            raise NonFiniteValueError(f"gradient {index} contains NaN or infinity")

    beta1, beta2 = cfg.adam_beta1, cfg.adam_beta2
    state.step += 1
    bc1 = 1.0 - beta1 ** state.step
    bc2 = 1.0 - beta2 ** state.step
    with torch.no_grad():
        for p, g, m, v in zip(params, grads, state.m, state.v):
            m.mul_(beta1).add_(g, alpha=1.0 - beta1)
            v.mul_(beta2).addcmul_(g, g, value=1.0 - beta2)
            denom = (v / bc2).sqrt_().add_(cfg.adam_eps)
            p.sub_(cfg.lr * (m / bc1) / denom)
    return state
