"""
Training

Adam, the validation-driven epoch loop with early stopping and two
best-checkpoint slots, refinement-loss fine-tuning and stage-wise
DualFastNet training.
"""

from .batching import augment_sample, augmentation_seed, collate
from .config import AugmentConfig, ExperimentConfig, ModelSection, TrainConfig, load_experiment
from .optimizer import AdamState, adam_step, init_adam_state
from .stagewise import STAGES, train_regime, train_stagewise
from .trainer import (
    BestCheckpoints,
    CheckpointSlot,
    EarlyStopping,
    EpochRecord,
    Trainer,
    TrainHistory,
    deterministic_mode,
    fine_tune,
    loss_label,
    train,
    train_combination,
)

__all__ = [
    'STAGES',
    'AdamState',
    'AugmentConfig',
    'BestCheckpoints',
    'CheckpointSlot',
    'EarlyStopping',
    'EpochRecord',
    'ExperimentConfig',
    'ModelSection',
    'TrainConfig',
    'TrainHistory',
    'Trainer',
    'adam_step',
    'augment_sample',
    'augmentation_seed',
    'collate',
    'deterministic_mode',
    'fine_tune',
    'init_adam_state',
    'load_experiment',
    'loss_label',
    'train',
    'train_combination',
    'train_regime',
    'train_stagewise',
]
