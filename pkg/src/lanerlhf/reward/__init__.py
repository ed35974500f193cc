from .model import (
    REWARD_KIND,
    RewardNet,
    SequencePreferenceClassifier,
    load_reward_net,
)
from .surrogate import SURROGATE_CLIP, SurrogateReward

__all__ = [
    "REWARD_KIND",
    "RewardNet",
    "SequencePreferenceClassifier",
    "load_reward_net",
    "SURROGATE_CLIP",
    "SurrogateReward",
]
