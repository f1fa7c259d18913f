"""Epoch loop with validation-driven checkpoints and early stopping, plus
refinement-loss fine-tuning."""

import math
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import torch
from pydantic import BaseModel, ConfigDict, Field
from torch import nn

from fastnet_dehazing.data.records import HazeSample
from fastnet_dehazing.errors import (
    DatasetError,
    MissingTargetError,
    NonFiniteValueError,
    TrainingDivergedError,
)
from fastnet_dehazing.losses.composite import TARGET_TRUTH, CompositeSpec, as_composite, composite_objective
from fastnet_dehazing.losses.losses import LossSpec, parse_combination
from fastnet_dehazing.metrics.quality import ssim_tensor
from fastnet_dehazing.models.builder import DehazeModel, forward
from fastnet_dehazing.models.checkpoint import (
    PathLike,
    apply_checkpoint,
    decode_checkpoint,
    encode_checkpoint,
    read_checkpoint,
)
from fastnet_dehazing.training.batching import augment_sample, augmentation_seed, collate, require_truths
from fastnet_dehazing.training.config import TrainConfig
from fastnet_dehazing.training.optimizer import adam_step, init_adam_state
from fastnet_dehazing.utils.logging import StepLogger

MODEL_OUTPUTS = {"fastnet": ("refined",), "dual_fastnet": ("refined", "dehazed", "transmission", "airlight")}


class EpochRecord(BaseModel):
    stage: str
    epoch: int
    train_loss: float
    val_loss: float
    val_psnr_db: float
    val_ssim: float
    saved_best_loss: bool = False
    saved_best_ssim: bool = False


class TrainHistory(BaseModel):
    tag: str = ""
    records: List[EpochRecord] = Field(default_factory=list)
    stages: List[str] = Field(default_factory=list)
    stop_reason: str = ""
    logs: List[str] = Field(default_factory=list)

    @property
    def epochs_run(self) -> int:
        return len(self.records)

    def stage_records(self, stage: str) -> List[EpochRecord]:
        return [r for r in self.records if r.stage == stage]

    def extend(self, other: "TrainHistory"):
        self.records.extend(other.records)
        self.stages.extend(s for s in other.stages if s not in self.stages)
        self.logs.extend(other.logs)
        self.stop_reason = other.stop_reason

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([r.model_dump() for r in self.records], columns=list(EpochRecord.model_fields))
        frame.insert(0, "tag", self.tag)
        return frame.replace([np.inf, -np.inf], np.nan)

    def to_jsonl(self) -> str:
        if not self.records:
            return ""
        return self.to_frame().to_json(orient="records", lines=True, force_ascii=False)

    def write(self, path: PathLike):
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")


class CheckpointSlot(BaseModel):
    """Serialized model state saved at one epoch."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    stage: str
    epoch: int
    value: float
    payload: bytes
    path: Optional[Path] = None

    def restore(self, model: DehazeModel) -> DehazeModel:
        return apply_checkpoint(model, decode_checkpoint(self.payload, f"<{self.stage}@{self.epoch}>"))


class BestCheckpoints(BaseModel):
    """Best validation-loss and best validation-SSIM snapshots."""

    best_loss: Optional[CheckpointSlot] = None
    best_ssim: Optional[CheckpointSlot] = None


class EarlyStopping:
    """Stops after ``patience`` consecutive epochs without a strict improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = math.inf
        self.bad_epochs = 0

    def update(self, value: float) -> bool:
        """Record one epoch's validation loss; returns True on improvement."""
        if value < self.best:
            self.best = value
            self.bad_epochs = 0
            return True
        self.bad_epochs += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.bad_epochs >= self.patience


@contextmanager
def deterministic_mode(seed: int, enabled: bool = True) -> Iterator[None]:
    """Single-threaded, deterministic torch kernels for the duration of a run."""
    if not enabled:
        yield
        return
    threads = torch.get_num_threads()
    was_deterministic = torch.are_deterministic_algorithms_enabled()
    torch.set_num_threads(1)
    torch.use_deterministic_algorithms(True, warn_only=True)
    torch.manual_seed(seed)
    try:
        yield
    finally:
        torch.set_num_threads(threads)
        torch.use_deterministic_algorithms(was_deterministic)


def loss_label(loss: Union[LossSpec, CompositeSpec]) -> str:
    if isinstance(loss, CompositeSpec):
        return loss.name or "+".join(f"{t.loss.label}({t.target})" for t in loss.terms)
    return loss.label


def _psnr_db(mse: torch.Tensor) -> torch.Tensor:
    return torch.where(mse > 0, -10.0 * torch.log10(mse), torch.full_like(mse, math.inf))


class Trainer(StepLogger):
    """Runs the Adam epoch loop for one model and one objective at a time."""

    logger_name = "fastnet_dehazing.training"

    def __init__(self, cfg: TrainConfig, tag: str = ""):
        self.cfg = cfg
        self.tag = tag

    # -- data -------------------------------------------------------------

    def _batch_plan(self, n: int, rng: Optional[np.random.Generator]) -> List[List[int]]:
        order = rng.permutation(n) if rng is not None else np.arange(n)
        size = self.cfg.batch_size
        return [order[i:i + size].tolist() for i in range(0, n, size)]

    def _iter_batches(
        self,
        dataset: Sequence[HazeSample],
        plan: List[List[int]],
        dtype: torch.dtype,
        epoch: Optional[int],
    ) -> Iterator[Dict[str, torch.Tensor]]:
        def build(indices: List[int]) -> Dict[str, torch.Tensor]:
            samples = [dataset[i] for i in indices]
            if epoch is not None and self.cfg.augment is not None:
                samples = [
                    augment_sample(
                        s,
                        self.cfg.augment.crop_size,
                        self.cfg.augment.rotations,
                        augmentation_seed(self.cfg.seed, epoch, i),
                    )
                    for s, i in zip(samples, indices)
                ]
            return collate(samples, dtype)

        if self.cfg.loader_workers > 0:
            # map() yields in submission order, so batch order is unchanged
            with ThreadPoolExecutor(max_workers=self.cfg.loader_workers) as pool:
                yield from pool.map(build, plan)
        else:
            for indices in plan:
                yield build(indices)

    def _check_targets(self, model: DehazeModel, spec: CompositeSpec, datasets: Sequence[Sequence[HazeSample]]):
        available = MODEL_OUTPUTS[model.architecture]
        for target in spec.targets:
            if target not in available:
                raise MissingTargetError(f"{model.architecture} has no '{target}' output")
        truths = sorted({TARGET_TRUTH[t] for t in spec.targets})
        for dataset in datasets:
            require_truths(dataset[0], truths)

    # -- evaluation -------------------------------------------------------

    def evaluate(
        self,
        model: DehazeModel,
        dataset: Sequence[HazeSample],
        spec: CompositeSpec,
        extractor: Optional[nn.Module] = None,
    ) -> Tuple[float, float, float]:
        """Eval-mode (loss, PSNR dB, SSIM) averaged over samples.

        PSNR averages only samples with nonzero error; it is inf when every
        output matches its truth exactly.
        """
        dtype = next(model.parameters()).dtype
        was_training = model.training
        model.eval()
        total_loss = total_ssim = 0.0
        psnrs: List[float] = []
        try:
            with torch.no_grad():
                for batch in self._iter_batches(dataset, self._batch_plan(len(dataset), None), dtype, None):
                    n = batch["hazy"].shape[0]
                    outputs = forward(model, batch["hazy"])
                    total_loss += float(composite_objective(outputs, batch, spec, extractor)) * n
                    refined, clean = outputs["refined"], batch["clean"]
                    mse = ((refined - clean) ** 2).flatten(1).mean(dim=1)
                    psnrs.extend(_psnr_db(mse[mse > 0]).tolist())
                    for i in range(n):
                        total_ssim += float(ssim_tensor(refined[i:i + 1], clean[i:i + 1]))
        finally:
            model.train(was_training)
        count = len(dataset)
        psnr = sum(psnrs) / len(psnrs) if psnrs else math.inf
        return total_loss / count, psnr, total_ssim / count

    # -- loop -------------------------------------------------------------

    def _snapshot(self, model: DehazeModel, stage: str, epoch: int, value: float, slot: str) -> CheckpointSlot:
        meta = {"stage": stage, "epoch": epoch, "slot": slot, "value": value, "tag": self.tag}
        payload = encode_checkpoint(model, meta)
        path = None
        if self.cfg.checkpoint_dir is not None:
            directory = Path(self.cfg.checkpoint_dir)
            directory.mkdir(parents=True, exist_ok=True)
            name = f"{self.tag or model.architecture}_{stage}_{slot}.fdhz".replace(" ", "").replace("→", "-")
            path = directory / name
            path.write_bytes(payload)
        return CheckpointSlot(stage=stage, epoch=epoch, value=value, payload=payload, path=path)

    def fit(
        self,
        model: DehazeModel,
        train_set: Sequence[HazeSample],
        val_set: Sequence[HazeSample],
        loss: Union[LossSpec, CompositeSpec],
        stage: str = "train",
        max_epochs: Optional[int] = None,
        lr: Optional[float] = None,
        frozen: Sequence[nn.Module] = (),
        extractor: Optional[nn.Module] = None,
    ) -> Tuple[BestCheckpoints, TrainHistory]:
        """Train ``model`` in place; modules in ``frozen`` get no updates and keep eval-mode BN."""
        if len(train_set) == 0 or len(val_set) == 0:
            raise DatasetError("training and validation sets must be nonempty")
        spec = as_composite(loss)
        self._check_targets(model, spec, (train_set, val_set))
        if spec.needs_extractor and extractor is None:
            extractor = model.feature_extractor()

        cfg = self.cfg.model_copy(update={"lr": lr or self.cfg.lr})
        epochs = max_epochs or self.cfg.max_epochs
        frozen_ids = {id(p) for module in frozen for p in module.parameters()}
        params = [p for p in model.parameters() if p.requires_grad and id(p) not in frozen_ids]
        state = init_adam_state(params)
        dtype = next(model.parameters()).dtype

        history = TrainHistory(tag=self.tag, stages=[stage])
        best = BestCheckpoints()
        best_ssim = -math.inf
        stopper = EarlyStopping(self.cfg.early_stop_patience)
        rng = np.random.default_rng(self.cfg.seed)
        self._log_step("STAGE", f"{stage}: {len(params)} trainable tensors, up to {epochs} epochs, lr {cfg.lr:g}")

        def diverged(message: str):
            history.stop_reason = "diverged"
            self._log_step("DIVERGED", message)
            history.logs = list(self.logs)
            return TrainingDivergedError(message, checkpoints=best, history=history)

        for epoch in range(1, epochs + 1):
            model.train()
            for module in frozen:
                module.eval()
            losses = []
            for batch in self._iter_batches(train_set, self._batch_plan(len(train_set), rng), dtype, epoch):
                outputs = forward(model, batch["hazy"])
                value = composite_objective(outputs, batch, spec, extractor)
                if not torch.isfinite(value):
                    raise diverged(f"{stage} epoch {epoch}: loss became {float(value)}")
                grads = torch.autograd.grad(value, params, allow_unused=True)
                grads = [torch.zeros_like(p) if g is None else g for p, g in zip(params, grads)]
                try:
                    adam_step(params, grads, state, cfg)
                except NonFiniteValueError as e:
                    raise diverged(f"{stage} epoch {epoch}: {e}") from e
                losses.append(float(value.detach()))

            val_loss, val_psnr, val_ssim = self.evaluate(model, val_set, spec, extractor)
            if not math.isfinite(val_loss):
                raise diverged(f"{stage} epoch {epoch}: validation loss became {val_loss}")

            record = EpochRecord(
                stage=stage,
                epoch=epoch,
                train_loss=float(np.mean(losses)),
                val_loss=val_loss,
                val_psnr_db=val_psnr,
                val_ssim=val_ssim,
            )
            if stopper.update(val_loss):
                best.best_loss = self._snapshot(model, stage, epoch, val_loss, "best_loss")
                record.saved_best_loss = True
            if val_ssim > best_ssim:
                best_ssim = val_ssim
                best.best_ssim = self._snapshot(model, stage, epoch, val_ssim, "best_ssim")
                record.saved_best_ssim = True
            history.records.append(record)
            self._log_step(
                "EPOCH",
                f"{stage} {epoch}/{epochs} train {record.train_loss:.6f} val {val_loss:.6f} "
                f"psnr {val_psnr:.2f} ssim {val_ssim:.4f}",
            )

            if stopper.should_stop:
                history.stop_reason = "early_stop"
                break
        else:
            history.stop_reason = "max_epochs"

        self._log_step("STAGE", f"{stage} finished after {history.epochs_run} epochs ({history.stop_reason})")
        history.logs = list(self.logs)
        return best, history


def train(
    model: DehazeModel,
    train_set: Sequence[HazeSample],
    val_set: Sequence[HazeSample],
    cfg: TrainConfig,
) -> Tuple[BestCheckpoints, TrainHistory]:
    """Train with ``cfg.loss``; checkpoints and history for the base loss only."""
    tag = loss_label(cfg.loss)
    with deterministic_mode(cfg.seed, cfg.deterministic):
        return Trainer(cfg, tag=tag).fit(model, train_set, val_set, cfg.loss, stage="train")


def fine_tune(
    model: DehazeModel,
    checkpoint: Union[CheckpointSlot, PathLike, None],
    refinement: LossSpec,
    cfg: TrainConfig,
    train_set: Sequence[HazeSample],
    val_set: Sequence[HazeSample],
) -> Tuple[BestCheckpoints, TrainHistory]:
    """Continue training from ``checkpoint`` with the refinement loss.

    Optimizer state starts fresh; the content-loss extractor is snapshotted
    from the restored model.
    """
    if isinstance(checkpoint, CheckpointSlot):
        checkpoint.restore(model)
    elif checkpoint is not None:
        apply_checkpoint(model, read_checkpoint(checkpoint))

    tag = f"{loss_label(cfg.loss)} → {refinement.label}"
    extractor = model.feature_extractor() if refinement.kind == "content" else None
    with deterministic_mode(cfg.seed, cfg.deterministic):
        return Trainer(cfg, tag=tag).fit(
            model,
            train_set,
            val_set,
            refinement,
            stage="refine",
            max_epochs=cfg.refinement_epochs,
            lr=cfg.refinement_lr,
            extractor=extractor,
        )


def train_combination(
    model: DehazeModel,
    train_set: Sequence[HazeSample],
    val_set: Sequence[HazeSample],
    cfg: TrainConfig,
    name: Optional[str] = None,
) -> Tuple[BestCheckpoints, TrainHistory]:
    """Base-loss training followed, when a refinement loss is set, by fine-tuning
    from the best validation-loss checkpoint. ``name`` is e.g. ``"L1 → SSIM"``."""
    if name is not None:
        base, refinement = parse_combination(name)
        cfg = cfg.model_copy(update={"loss": base, "refinement_loss": refinement, "combination": None})
    best, history = train(model, train_set, val_set, cfg)
    if cfg.refinement_loss is None:
        return best, history

    refined_best, refined_history = fine_tune(model, best.best_loss, cfg.refinement_loss, cfg, train_set, val_set)
    combined = TrainHistory(tag=refined_history.tag)
    combined.extend(history)
    combined.extend(refined_history)
    return refined_best, combined
