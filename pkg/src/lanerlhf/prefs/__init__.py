from .segments import (
    DecisionEntry,
    Frame,
    SegmentStore,
    TrajectorySegment,
    collect_segments,
    replay_document,
    segment_from_dict,
)
from .pairs import SegmentPair, pair_id_for, sample_pairs
from .oracle import (
    CHOICE_LEFT,
    CHOICE_RIGHT,
    CHOICE_SKIP,
    GAP_TIE_BAND_M,
    PreferenceLabel,
    STYLE_AGGRESSIVE,
    STYLE_CONSERVATIVE,
    STYLES,
    StyleOracle,
    label_from_dict,
    oracle_choice,
)
from .export import export_training_set

__all__ = [
    "DecisionEntry",
    "Frame",
    "SegmentStore",
    "TrajectorySegment",
    "collect_segments",
    "replay_document",
    "segment_from_dict",
    "SegmentPair",
    "pair_id_for",
    "sample_pairs",
    "CHOICE_LEFT",
    "CHOICE_RIGHT",
    "CHOICE_SKIP",
    "GAP_TIE_BAND_M",
    "PreferenceLabel",
    "STYLE_AGGRESSIVE",
    "STYLE_CONSERVATIVE",
    "STYLES",
    "StyleOracle",
    "label_from_dict",
    "oracle_choice",
    "export_training_set",
]
