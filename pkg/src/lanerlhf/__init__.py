"""Highway lane-change policies trained from pairwise trajectory preferences.

Pipeline: pre-train a recurrent policy in a two- or three-lane highway
simulator, collect trajectory segments, gather pairwise preference labels
(synthetic style oracle or human annotation service), fit a recurrent
preference classifier, and fine-tune the policy against its logit margin
with the feature-extraction trunk frozen.
"""

__version__ = "1.0.0"

from .evaluation import (
    EvalReport,
    GAP_THRESHOLD_M,
    LaneChangeEvent,
    compare_models,
    run_eval,
)
from .finetune import SurrogateSource, finetune, verify_compat
from .mdp import Action, LaneChangeEnv
from .ppo import PolicyNet, PpoConfig, PpoTrainer
from .prefs import SegmentStore, StyleOracle, collect_segments, sample_pairs
from .reward import SequencePreferenceClassifier, SurrogateReward
from .sim import ScenarioConfig, load_scenario, resolve_scenario

__all__ = [
    "__version__",
    "EvalReport",
    "GAP_THRESHOLD_M",
    "LaneChangeEvent",
    "compare_models",
    "run_eval",
    "SurrogateSource",
    "finetune",
    "verify_compat",
    "Action",
    "LaneChangeEnv",
    "PolicyNet",
    "PpoConfig",
    "PpoTrainer",
    "SegmentStore",
    "StyleOracle",
    "collect_segments",
    "sample_pairs",
    "SequencePreferenceClassifier",
    "SurrogateReward",
    "ScenarioConfig",
    "load_scenario",
    "resolve_scenario",
]
