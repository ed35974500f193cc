from .buffer import RolloutBuffer, compute_advantages
from .checkpoint import (
    KIND_POLICY,
    config_from_meta,
    load_policy_checkpoint,
    save_policy_checkpoint,
)
from .network import FROZEN_TRUNK_PREFIXES, PolicyNet, sample_categorical
from .trainer import (
    EnvRewardSource,
    PpoConfig,
    PpoTrainer,
    TrainingDiverged,
    clipped_surrogate,
    ppo_clip_loss,
)
