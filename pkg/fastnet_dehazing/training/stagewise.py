"""Stage-wise DualFastNet training and the named DualFastNet regimes.

Stages run in order: transmission branch alone, airlight branch alone,
refinement head with both branches frozen, then the whole model end to end.
Each stage is an ordinary training run with its own early stopping, and the
model leaves each stage at that stage's best validation-loss checkpoint.
"""

from typing import List, Sequence, Tuple

from torch import nn

from fastnet_dehazing.data.records import HazeSample
from fastnet_dehazing.errors import InvalidParameterError, ModelLoadError
from fastnet_dehazing.losses.composite import single_target
from fastnet_dehazing.losses.losses import LossSpec
from fastnet_dehazing.models.dual_fastnet import DualFastNet
from fastnet_dehazing.training.batching import require_truths
from fastnet_dehazing.training.config import TrainConfig
from fastnet_dehazing.training.trainer import (
    BestCheckpoints,
    Trainer,
    TrainHistory,
    deterministic_mode,
    train,
)

STAGES: Tuple[Tuple[str, str], ...] = (
    ("transmission", "transmission"),
    ("airlight", "airlight"),
    ("refinement", "refined"),
    ("end_to_end", "refined"),
)


def _active_modules(model: DualFastNet, stage: str) -> List[nn.Module]:
    if stage == "transmission":
        return [model.transmission]
    if stage == "airlight":
        return [model.airlight]
    if stage == "refinement":
        return [model.refinement]
    return [model]


def _set_frozen(modules: Sequence[nn.Module], frozen: bool):
    for module in modules:
        module.requires_grad_(not frozen)


def train_stagewise(
    model: DualFastNet,
    train_set: Sequence[HazeSample],
    val_set: Sequence[HazeSample],
    cfg: TrainConfig,
) -> Tuple[BestCheckpoints, TrainHistory]:
    if not isinstance(model, DualFastNet):
        raise ModelLoadError("stage-wise training needs a DualFastNet")
    for dataset, where in ((train_set, "training"), (val_set, "validation")):
        if len(dataset) == 0:
            raise InvalidParameterError(f"{where} set is empty")
        require_truths(dataset[0], ("transmission", "airlight"), where)

    trainer = Trainer(cfg, tag="stagewise")
    history = TrainHistory(tag="stagewise")
    best = BestCheckpoints()
    branches = [model.transmission, model.airlight, model.refinement]

    with deterministic_mode(cfg.seed, cfg.deterministic):
        for stage, target in STAGES:
            active = _active_modules(model, stage)
            frozen = [m for m in branches if all(m is not a for a in active)] if stage != "end_to_end" else []
            _set_frozen(frozen, True)
            try:
                best, stage_history = trainer.fit(
                    model,
                    train_set,
                    val_set,
                    single_target(LossSpec(kind="mse"), target),
                    stage=stage,
                    frozen=frozen,
                )
            finally:
                _set_frozen(frozen, False)
            if best.best_loss is not None:
                best.best_loss.restore(model)
            history.extend(stage_history)
    history.logs = list(trainer.logs)
    return best, history


def train_regime(
    model: DualFastNet,
    train_set: Sequence[HazeSample],
    val_set: Sequence[HazeSample],
    cfg: TrainConfig,
) -> Tuple[BestCheckpoints, TrainHistory]:
    """Run ``cfg.regime``: ``mse_x1``/``mse_x4`` train end to end, ``step`` runs the stages."""
    if cfg.regime == "step":
        return train_stagewise(model, train_set, val_set, cfg)
    if cfg.regime is None:
        raise InvalidParameterError("train_regime needs cfg.regime to be set")
    return train(model, train_set, val_set, cfg)
